#pragma once

#include "polyterm/errors.hpp"
#include "polyterm/matrix_exp.hpp"
#include "polyterm/model.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

namespace polyterm {

/// Square matrix with row/column index i meaning the coefficient of z^i:
/// entry (i, j) multiplies g_j in the equation for d g_i / dx.
template <class T>
struct InformationMatrix {
    std::size_t dim = 0;
    std::vector<T> entries;

    explicit InformationMatrix(std::size_t d = 0) : dim(d), entries(d * d, T(0)) {}

    T& operator()(std::size_t i, std::size_t j) { return entries[i * dim + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return entries[i * dim + j]; }

    /// True when every entry with |i - j| > 2 is exactly zero.
    bool five_banded() const {
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                if ((i > j + 2 || j > i + 2) && (*this)(i, j) != T(0)) return false;
        return true;
    }

    Eigen::MatrixXd to_eigen() const {
        Eigen::MatrixXd m(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(dim));
        for (std::size_t i = 0; i < dim; ++i)
            for (std::size_t j = 0; j < dim; ++j)
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = to_double((*this)(i, j));
        return m;
    }

    friend bool operator==(const InformationMatrix& x, const InformationMatrix& y) {
        return x.dim == y.dim && x.entries == y.entries;
    }
};

/// Five-band generator matrix of size (n+1) for drift `a`, squared diffusion
/// `b2` and killing rate `R`, i.e. the coefficient recursion
///   g_i' = g_{i+2} (i+2)(i+1)/2 b0 + g_{i+1} ((i+1)a0 + (i+1)i/2 b1)
///        + g_i (i a1 + i(i-1)/2 b2 - R0) + g_{i-1} ((i-1)a2 + (i-1)(i-2)/2 b3 - R1)
///        + g_{i-2} ((i-2)a3 + (i-2)(i-3)/2 b4 - R2)
/// with out-of-range g's dropped.
template <class T>
InformationMatrix<T> five_band_matrix(const Polynomial<T>& a, const Polynomial<T>& b2, const Polynomial<T>& R,
                                      int n) {
    InformationMatrix<T> S(static_cast<std::size_t>(n + 1));
    auto half = [](long long m) { return T(m * (m - 1)) / T(2); };
    for (long long i = 0; i <= n; ++i) {
        const auto row = static_cast<std::size_t>(i);
        if (i + 2 <= n) S(row, row + 2) = half(i + 2) * b2.coeff(0);
        if (i + 1 <= n) S(row, row + 1) = T(i + 1) * a.coeff(0) + half(i + 1) * b2.coeff(1);
        S(row, row) = T(i) * a.coeff(1) + half(i) * b2.coeff(2) - R.coeff(0);
        if (i >= 1) S(row, row - 1) = T(i - 1) * a.coeff(2) + half(i - 1) * b2.coeff(3) - R.coeff(1);
        if (i >= 2) S(row, row - 2) = T(i - 2) * a.coeff(3) + half(i - 2) * b2.coeff(4) - R.coeff(2);
    }
    return S;
}

/// Information matrix of a rate model in exact arithmetic. Refuses specs
/// that fail the coefficient constraints, since the recursion then does not
/// close on degree n.
inline InformationMatrix<Rational> build_information_matrix(const RateModelSpec& spec) {
    auto report = check_rate_constraints(spec);
    if (!report.satisfied) {
        std::string msg = "rate model fails the no-arbitrage constraints:";
        for (const auto& [name, value] : report.residuals)
            if (value != 0) msg += " [" + name + " = " + to_decimal_string(value) + "]";
        throw ConstraintError(msg);
    }
    return five_band_matrix(spec.a, spec.b2, spec.R, spec.n);
}

/// Solved bond-price coefficients G(x) = e^{Sx} G(0) with G(0) = (1, 0, ..., 0).
///
/// Immutable apart from the e^{Sx} memo, which is shared between copies and
/// keyed by the bit pattern of x. Concurrent callers may compute the same
/// entry twice; the first stored value wins and all are identical.
class TermStructure {
public:
    explicit TermStructure(RateModelSpec spec)
        : spec_(std::move(spec)),
          exact_(build_information_matrix(spec_)),
          S_(exact_.to_eigen()),
          R_(to_real(spec_.R)),
          cache_(std::make_shared<Cache>()) {}

    const RateModelSpec& spec() const { return spec_; }
    const InformationMatrix<Rational>& exact_matrix() const { return exact_; }
    const Eigen::MatrixXd& S() const { return S_; }
    int degree() const { return spec_.n; }

    Eigen::VectorXd G0() const {
        Eigen::VectorXd g = Eigen::VectorXd::Zero(S_.rows());
        g(0) = 1.0;
        return g;
    }

    /// e^{Sx}, memoised.
    Eigen::MatrixXd propagator(double x) const {
        if (!(x >= 0.0)) throw ParamError("time to maturity must be non-negative");
        std::uint64_t key;
        std::memcpy(&key, &x, sizeof key);
        {
            std::shared_lock lock(cache_->mutex);
            if (auto it = cache_->map.find(key); it != cache_->map.end()) return it->second;
        }
        Eigen::MatrixXd E = matrix_exponential(S_, x);
        std::unique_lock lock(cache_->mutex);
        return cache_->map.emplace(key, std::move(E)).first->second;
    }

    /// (g_0(x), ..., g_n(x)): the first column of e^{Sx}.
    Eigen::VectorXd solve_G(double x) const {
        if (x == 0.0) return G0();
        return propagator(x).col(0);
    }

    /// S G(x), the x-derivative of the coefficient vector.
    Eigen::VectorXd solve_G_dot(double x) const { return S_ * solve_G(x); }

    void require_in_domain(double z) const {
        if (!spec_.domain.contains(z))
            throw DomainError("factor value " + std::to_string(z) + " lies outside the model domain");
    }

    double bond_price(double ttm, double z) const {
        require_in_domain(z);
        if (!(ttm >= 0.0)) throw ParamError("time to maturity must be non-negative");
        return eval_coefficients(solve_G(ttm), z);
    }

    double yield(double ttm, double z) const {
        if (!(ttm > 0.0)) throw ParamError("yield needs a positive time to maturity");
        double p = bond_price(ttm, z);
        if (!(p > 0.0))
            throw NonPositivePriceError("polynomial bond price " + std::to_string(p) + " at ttm = " +
                                        std::to_string(ttm) + ", z = " + std::to_string(z) + " is not positive");
        return -std::log(p) / ttm;
    }

    double short_rate(double z) const {
        require_in_domain(z);
        return R_.eval(z);
    }

    static double eval_coefficients(const Eigen::VectorXd& coeffs, double z) {
        double acc = 0.0;
        for (Eigen::Index i = coeffs.size() - 1; i >= 0; --i) acc = acc * z + coeffs(i);
        return acc;
    }

private:
    struct Cache {
        std::shared_mutex mutex;
        std::unordered_map<std::uint64_t, Eigen::MatrixXd> map;
    };

    RateModelSpec spec_;
    InformationMatrix<Rational> exact_;
    Eigen::MatrixXd S_;
    RealPoly R_;
    std::shared_ptr<Cache> cache_;
};

inline Eigen::VectorXd solve_G(const TermStructure& ts, double x) { return ts.solve_G(x); }
inline double bond_price(const TermStructure& ts, double ttm, double z) { return ts.bond_price(ttm, z); }
inline double yield_curve(const TermStructure& ts, double ttm, double z) { return ts.yield(ttm, z); }

inline double spot_rate(const RateModelSpec& spec, double z) {
    if (!spec.domain.contains(z))
        throw DomainError("factor value " + std::to_string(z) + " lies outside the model domain");
    return to_real(spec.R).eval(z);
}

} // namespace polyterm
