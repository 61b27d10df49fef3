#pragma once

#include "polyterm/errors.hpp"

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <string>

namespace polyterm {

namespace detail {

// Pade coefficients b_0..b_m for m = 3, 5, 7, 9, 13 and the 1-norm bounds
// below which each degree meets double precision (Higham, 2005).
inline constexpr std::array<double, 4> kPade3 = {120.0, 60.0, 12.0, 1.0};
inline constexpr std::array<double, 6> kPade5 = {30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0};
inline constexpr std::array<double, 8> kPade7 = {17297280.0, 8648640.0, 1995840.0, 277200.0,
                                                 25200.0,    1512.0,    56.0,      1.0};
inline constexpr std::array<double, 10> kPade9 = {17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
                                                  2162160.0,     110880.0,     3960.0,       90.0,        1.0};
inline constexpr std::array<double, 14> kPade13 = {
    64764752532480000.0, 32382376266240000.0, 7771770303897600.0, 1187353796428800.0, 129060195264000.0,
    10559470521600.0,    670442572800.0,      33522128640.0,      1323241920.0,       40840800.0,
    960960.0,            16380.0,             182.0,              1.0};
inline constexpr std::array<double, 5> kPadeTheta = {1.495585217958292e-2, 2.539398330063230e-1,
                                                     9.504178996162932e-1, 2.097847961257068e0,
                                                     5.371920351148152e0};

template <std::size_t K>
Eigen::MatrixXd pade_low(const Eigen::MatrixXd& A, const std::array<double, K>& b) {
    const auto n = A.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd A2 = A * A;
    Eigen::MatrixXd power = I;  // A^(2j)
    Eigen::MatrixXd odd = Eigen::MatrixXd::Zero(n, n), even = Eigen::MatrixXd::Zero(n, n);
    for (std::size_t j = 0; 2 * j < K; ++j) {
        even += b[2 * j] * power;
        if (2 * j + 1 < K) odd += b[2 * j + 1] * power;
        power = power * A2;
    }
    const Eigen::MatrixXd U = A * odd;
    return (even - U).partialPivLu().solve(even + U);
}

inline Eigen::MatrixXd pade13(const Eigen::MatrixXd& A) {
    const auto& b = kPade13;
    const auto n = A.rows();
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    const Eigen::MatrixXd A2 = A * A, A4 = A2 * A2, A6 = A4 * A2;
    const Eigen::MatrixXd U =
        A * (A6 * (b[13] * A6 + b[11] * A4 + b[9] * A2) + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * I);
    const Eigen::MatrixXd V = A6 * (b[12] * A6 + b[10] * A4 + b[8] * A2) + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * I;
    return (V - U).partialPivLu().solve(V + U);
}

} // namespace detail

/// e^{M x} by scaling and squaring with Pade approximants of degree up to 13.
inline Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& M, double x) {
    if (M.rows() != M.cols()) throw ParamError("matrix_exponential needs a square matrix");
    if (!(x >= 0.0) || !std::isfinite(x)) throw ParamError("matrix_exponential needs finite x >= 0");
    if (!M.allFinite()) throw OverflowError("matrix_exponential: matrix has non-finite entries");
    const auto n = M.rows();
    if (n == 0) return M;
    if (x == 0.0) return Eigen::MatrixXd::Identity(n, n);

    Eigen::MatrixXd A = M * x;
    const double norm = A.cwiseAbs().colwise().sum().maxCoeff();
    if (!std::isfinite(norm)) throw OverflowError("matrix_exponential: |M x| is not representable");

    const auto& th = detail::kPadeTheta;
    if (norm <= th[0]) return detail::pade_low(A, detail::kPade3);
    if (norm <= th[1]) return detail::pade_low(A, detail::kPade5);
    if (norm <= th[2]) return detail::pade_low(A, detail::kPade7);
    if (norm <= th[3]) return detail::pade_low(A, detail::kPade9);

    int squarings = std::max(0, static_cast<int>(std::ceil(std::log2(norm / th[4]))));
    if (squarings > 1000) throw OverflowError("matrix_exponential: scaled norm too large");
    A /= std::ldexp(1.0, squarings);
    Eigen::MatrixXd E = detail::pade13(A);
    for (int k = 0; k < squarings; ++k) E = E * E;
    if (!E.allFinite()) throw OverflowError("matrix_exponential: result overflows double range");
    return E;
}

} // namespace polyterm
