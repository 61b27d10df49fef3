#pragma once

// Forward-variance checks. With P(T, theta) = S^theta exp(-theta(1-theta)/2 G(T-t, theta, Z)),
// no arbitrage requires
//   G_x = 1/2 b^2 (G_zz - theta(1-theta)/2 G_z^2) + (theta bh + a) G_z + h^2,  G(0, theta, z) = 0,
// and the spot condition G_x(0, theta, z) = h^2(z).

#include "polyterm/errors.hpp"
#include "polyterm/parallel.hpp"
#include "polyterm/polynomial.hpp"
#include "polyterm/vol_engine.hpp"

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <memory>
#include <vector>

namespace polyterm {

struct ForwardVarianceSpec {
    RealPoly a, b2, bh, h2;
    std::function<double(double x, double theta, double z)> G;

    static double step(double v) { return 1e-5 * std::max(1.0, std::abs(v)); }

    double G_x(double x, double theta, double z) const {
        const double h = step(x);
        if (x < h) return (-3.0 * G(x, theta, z) + 4.0 * G(x + h, theta, z) - G(x + 2.0 * h, theta, z)) / (2.0 * h);
        return (G(x + h, theta, z) - G(x - h, theta, z)) / (2.0 * h);
    }
    double G_z(double x, double theta, double z) const {
        const double h = step(z);
        return (G(x, theta, z + h) - G(x, theta, z - h)) / (2.0 * h);
    }
    double G_zz(double x, double theta, double z) const {
        const double h = step(z);
        return (G(x, theta, z + h) - 2.0 * G(x, theta, z) + G(x, theta, z - h)) / (h * h);
    }
};

struct DriftSample {
    double x, theta, z;
};
struct SpotSample {
    double theta, z;
};

/// Largest absolute residual and the index of the sample attaining it.
struct ResidualReport {
    double max_residual = 0.0;
    std::size_t argmax = 0;
    std::size_t samples = 0;
};

namespace detail {

template <class F>
ResidualReport max_abs(std::size_t count, unsigned threads, F&& residual) {
    std::vector<double> r(count);
    run_blocks(count, std::max(1u, threads), [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) r[k] = std::abs(residual(k));
    });
    ResidualReport rep;
    rep.samples = count;
    for (std::size_t k = 0; k < count; ++k)
        if (!(r[k] <= rep.max_residual)) {
            rep.max_residual = r[k];
            rep.argmax = k;
        }
    return rep;
}

} // namespace detail

inline double drift_residual_at(const ForwardVarianceSpec& spec, const DriftSample& s) {
    const double gz = spec.G_z(s.x, s.theta, s.z);
    const double rhs = 0.5 * spec.b2.eval(s.z) * (spec.G_zz(s.x, s.theta, s.z) - s.theta * (1.0 - s.theta) / 2.0 * gz * gz) +
                       (s.theta * spec.bh.eval(s.z) + spec.a.eval(s.z)) * gz + spec.h2.eval(s.z);
    return spec.G_x(s.x, s.theta, s.z) - rhs;
}

inline ResidualReport drift_residual(const ForwardVarianceSpec& spec, const std::vector<DriftSample>& samples,
                                     unsigned threads = 1) {
    return detail::max_abs(samples.size(), threads, [&](std::size_t k) { return drift_residual_at(spec, samples[k]); });
}

inline ResidualReport spot_variance_check(const ForwardVarianceSpec& spec, const std::vector<SpotSample>& samples,
                                          unsigned threads = 1) {
    return detail::max_abs(samples.size(), threads, [&](std::size_t k) {
        const auto& s = samples[k];
        return spec.G_x(0.0, s.theta, s.z) - spec.h2.eval(s.z);
    });
}

/// Whether a degree-n forward-variance polynomial can have leading diffusion
/// term of degree deg_b2 + 2n - 2 within degree n.
inline bool max_degree_feasible(int n, int deg_b2) {
    if (n < 1) throw ParamError("degree n must be positive");
    if (deg_b2 < 0) throw ParamError("b2 must not vanish identically");
    return deg_b2 + 2 * n - 2 <= n;
}

/// Constant forward variance sigma^2: G = sigma^2 x.
inline ForwardVarianceSpec black_scholes_forward_variance(double sigma2, RealPoly a = {}, RealPoly b2 = {},
                                                          RealPoly bh = {}) {
    ForwardVarianceSpec s{std::move(a), std::move(b2), std::move(bh), RealPoly::constant(sigma2), nullptr};
    s.G = [sigma2](double x, double, double) { return sigma2 * x; };
    return s;
}

/// G(x, theta, z) = -2/(theta(1-theta)) log(sum_i k_i(x, theta) z^i) from a
/// solved vol model. theta must lie on the model grid.
inline ForwardVarianceSpec bridge_forward_variance(std::shared_ptr<const PowerPricer> pricer) {
    const auto& spec = pricer->spec();
    ForwardVarianceSpec s{to_real(spec.a), to_real(spec.b2), to_real(spec.bh), to_real(spec.h2), nullptr};
    s.G = [pricer](double x, double theta, double z) {
        const auto& sol = pricer->solution_at(theta);
        const double level = TermStructure::eval_coefficients(sol.K(x), z);
        if (!(level > 0.0)) throw NonPositivePriceError("power price coefficient sum is not positive");
        return -2.0 / (sol.theta * (1.0 - sol.theta)) * std::log(level);
    };
    return s;
}

/// theta(1-theta) int_0^inf min(s, K) K^(theta-2) dK, which equals s^theta.
/// Split at K = s and mapped by K = s e^(-v) below, K = s e^(v) above; both
/// pieces become exponential decays in v on [0, inf), integrated by exp-sinh.
inline double replicate_power_from_calls(double s, double theta, double tol = 1e-12) {
    if (!(s > 0.0)) throw ParamError("s must be positive");
    if (!(theta > 0.0 && theta < 1.0)) throw ThetaError("theta must lie in (0, 1)");
    if (!(tol > 0.0)) throw ParamError("tolerance must be positive");
    boost::math::quadrature::exp_sinh<double> quad;
    const double level = std::pow(s, theta);
    const double below = quad.integrate([=](double v) { return level * std::exp(-theta * v); }, tol);
    const double above = quad.integrate([=](double v) { return level * std::exp(-(1.0 - theta) * v); }, tol);
    return theta * (1.0 - theta) * (below + above);
}

/// (1/2pi) int s^(theta+ix) K^(1-theta-ix) / ((x - i theta)(x + i(1-theta))) dx over |x| <= x_max,
/// which tends to min(s, K). The integrand is conjugate-symmetric, so only
/// [0, x_max] is integrated, on panels no wider than one oscillation.
/// The 1/x truncation error is removed by Richardson extrapolation from
/// x_max/2 and x_max; the size of that correction is the tail estimate.
inline double replicate_min_from_power(double s, double K, double theta, double x_max = 1e4, double tol = 1e-4) {
    if (!(s > 0.0 && K > 0.0)) throw ParamError("s and K must be positive");
    if (!(theta > 0.0 && theta < 1.0)) throw ThetaError("theta must lie in (0, 1)");
    if (!(x_max > 0.0)) throw ParamError("x_max must be positive");
    const double omega = std::log(s / K);
    const double scale = std::pow(s, theta) * std::pow(K, 1.0 - theta);
    const double q = theta * (1.0 - theta), skew = 1.0 - 2.0 * theta;
    auto re_f = [=](double x) {
        const std::complex<double> num = std::polar(scale, omega * x);
        const std::complex<double> den(x * x + q, skew * x);
        return (num / den).real();
    };
    const double width = std::min(1.0, 1.0 / std::max(std::abs(omega), 1e-300));
    const double half = 0.5 * x_max;
    auto integrate_to = [&](double from, double to) {
        double acc = 0.0;
        const auto panels = static_cast<std::size_t>(std::ceil((to - from) / width));
        for (std::size_t k = 0; k < panels; ++k) {
            const double lo = from + static_cast<double>(k) * width;
            const double hi = std::min(to, lo + width);
            acc += boost::math::quadrature::gauss_kronrod<double, 15>::integrate(re_f, lo, hi, 10, 1e-13);
        }
        return acc;
    };
    const double pi = 3.14159265358979323846;
    const double I_half = integrate_to(0.0, half) / pi;
    const double I_full = I_half + integrate_to(half, x_max) / pi;
    const double tail = std::abs(I_full - I_half);
    if (tail > tol)
        throw TruncationError("estimated truncation error " + std::to_string(tail) + " exceeds tolerance at x_max = " +
                              std::to_string(x_max));
    return 2.0 * I_full - I_half;
}

} // namespace polyterm
