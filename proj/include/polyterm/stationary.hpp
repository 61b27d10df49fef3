#pragma once

// Stationary laws of the factor diffusion. The zero-flux solution of
//   -(g a)' + 1/2 (g b^2)'' = 0
// is the speed density g(y) = exp(int 2a/b^2) / b^2(y).

#include "polyterm/errors.hpp"
#include "polyterm/model.hpp"
#include "polyterm/simulation.hpp"

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <vector>

namespace polyterm {

namespace detail {

inline constexpr double kQuadTol = 1e-13;

template <class F>
double integrate(F&& f, double a, double b) {
    if (a == b) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, kQuadTol);
}

/// Fixed 30-point Gauss rule; accurate on nodes spaced within a factor of
/// two of their distance to any singularity.
template <class F>
double integrate_fixed(F&& f, double a, double b) {
    if (a == b) return 0.0;
    return boost::math::quadrature::gauss<double, 30>::integrate(f, a, b);
}

/// Nodes mode -/+ step (2^k - 1). A finite end is approached by halving the
/// remaining gap, so no node interval touches it at more than its own width.
inline std::vector<double> geometric_nodes(double lo, double hi, double mode, double step) {
    auto side = [&](double sign, double end) {
        std::vector<double> out;
        double inner = mode;
        for (int k = 1; k <= 62; ++k) {
            const double y = mode + sign * step * (std::ldexp(1.0, k) - 1.0);
            if (sign * (y - end) >= 0.0) {
                for (int j = 1; j <= 40; ++j) out.push_back(end + (inner - end) * std::ldexp(1.0, -j));
                out.push_back(end);
                break;
            }
            out.push_back(y);
            inner = y;
        }
        return out;
    };
    std::vector<double> left = side(-1.0, lo), right = side(1.0, hi);
    std::vector<double> nodes(left.rbegin(), left.rend());
    nodes.push_back(mode);
    nodes.insert(nodes.end(), right.begin(), right.end());
    return nodes;
}

} // namespace detail

/// Normalised density tabulated on a grid that doubles its spacing away from
/// the mode. The tabulated cumulative masses make cdf() a single fixed-rule
/// quadrature from the nearest node.
class Density {
public:
    Density(double lo, double hi, std::function<double(double)> unnorm, double mode, double scale)
        : lo_(lo), hi_(hi), f_(std::move(unnorm)) {
        if (!(lo < hi)) throw ParamError("density support must be a non-empty interval");
        if (!(mode > lo && mode < hi)) mode = std::isfinite(lo) && std::isfinite(hi) ? 0.5 * (lo + hi) : mode;
        if (!(scale > 0.0) || !std::isfinite(scale)) scale = 0.1 * std::max(1.0, std::abs(mode));
        build_grid(mode, 0.25 * scale);
        normalise();
    }

    double lower() const { return lo_; }
    double upper() const { return hi_; }
    double unnormalised(double y) const { return (y < lo_ || y > hi_) ? 0.0 : f_(y); }
    double norm_const() const { return norm_; }
    const std::vector<double>& grid() const { return nodes_; }
    const std::vector<double>& cdf_grid() const { return cdf_nodes_; }

    double pdf(double y) const { return unnormalised(y) / norm_; }

    double cdf(double y) const {
        if (y <= lo_) return 0.0;
        if (y >= hi_) return 1.0;
        auto it = std::upper_bound(nodes_.begin(), nodes_.end(), y);
        double mass;
        if (it == nodes_.begin()) {
            mass = mass_below_first_ - detail::integrate(f_, y, nodes_.front());
        } else {
            const std::size_t k = static_cast<std::size_t>(it - nodes_.begin()) - 1;
            mass = cum_[k] + detail::integrate_fixed(f_, nodes_[k], y);
        }
        return std::clamp(mass / norm_, 0.0, 1.0);
    }

    double quantile(double p) const {
        if (!(p > 0.0 && p < 1.0)) throw ParamError("quantile needs p in (0, 1)");
        double a, b;
        auto it = std::lower_bound(cdf_nodes_.begin(), cdf_nodes_.end(), p);
        if (it == cdf_nodes_.begin()) {
            b = nodes_.front();
            double width = std::max(1.0, std::abs(b));
            a = std::isfinite(lo_) ? lo_ : b - width;
            while (!std::isfinite(lo_) && cdf(a) > p) a -= (width *= 2.0);
        } else if (it == cdf_nodes_.end()) {
            a = nodes_.back();
            double width = std::max(1.0, std::abs(a));
            b = std::isfinite(hi_) ? hi_ : a + width;
            while (!std::isfinite(hi_) && cdf(b) < p) b += (width *= 2.0);
        } else {
            const auto k = static_cast<std::size_t>(it - cdf_nodes_.begin());
            a = nodes_[k - 1];
            b = nodes_[k];
        }
        // Newton on cdf(y) - p, falling back to bisection whenever a step
        // leaves the bracket.
        double y = 0.5 * (a + b);
        for (int i = 0; i < 200; ++i) {
            const double r = cdf(y) - p;
            if (r == 0.0) return y;
            (r < 0.0 ? a : b) = y;
            const double slope = pdf(y);
            const double next = slope > 0.0 ? y - r / slope : a;
            if (next > a && next < b) {
                const bool converged = std::abs(next - y) <= 1e-15 * std::max(1.0, std::abs(y));
                y = next;
                if (converged) break;
            } else {
                y = 0.5 * (a + b);
            }
            if (b - a <= 1e-15 * std::max(1.0, std::abs(a))) break;
        }
        return y;
    }

private:
    void build_grid(double mode, double step) {
        mode_ = mode;
        nodes_ = detail::geometric_nodes(lo_, hi_, mode, step);
    }

    void normalise() {
        auto fail = [](const std::string& why) { throw DivergenceError("stationary density does not normalise: " + why); };
        double total = 0.0;
        try {
            mass_below_first_ = std::isfinite(lo_) ? 0.0 : detail::integrate(f_, lo_, nodes_.front());
            cum_.assign(nodes_.size(), 0.0);
            cum_[0] = mass_below_first_;
            for (std::size_t k = 1; k < nodes_.size(); ++k)
                cum_[k] = cum_[k - 1] + detail::integrate(f_, nodes_[k - 1], nodes_[k]);
            total = cum_.back() + (std::isfinite(hi_) ? 0.0 : detail::integrate(f_, nodes_.back(), hi_));
        } catch (const std::exception& e) {
            fail(e.what());
        }
        if (!std::isfinite(total) || !(total > 0.0)) fail("total mass is not a positive finite number");
        // Open ends must carry negligible mass beyond the outermost nodes.
        auto tail_ok = [&](double y, double mode) {
            return f_(y) * std::abs(y - mode) <= 1e-10 * total;
        };
        if (!std::isfinite(lo_) && !tail_ok(nodes_.front(), mode_)) fail("mass escapes to -infinity");
        if (!std::isfinite(hi_) && !tail_ok(nodes_.back(), mode_)) fail("mass escapes to +infinity");
        norm_ = total;
        cdf_nodes_.resize(nodes_.size());
        for (std::size_t k = 0; k < nodes_.size(); ++k) cdf_nodes_[k] = cum_[k] / norm_;
    }

    double lo_, hi_, mode_ = 0.0;
    std::function<double(double)> f_;
    std::vector<double> nodes_, cum_, cdf_nodes_;
    double mass_below_first_ = 0.0;
    double norm_ = 1.0;
};

namespace detail {

/// Real roots of p inside (lo, hi), via the companion matrix.
inline std::vector<double> real_roots(const RealPoly& p, double lo, double hi) {
    std::vector<double> out;
    const int deg = p.degree();
    if (deg < 1) return out;
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 0; i < deg; ++i) C(0, i) = -p.coeff(static_cast<std::size_t>(deg - 1 - i)) / p.coeff(static_cast<std::size_t>(deg));
    for (int i = 1; i < deg; ++i) C(i, i - 1) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(C, false);
    for (int i = 0; i < deg; ++i) {
        const auto ev = es.eigenvalues()(i);
        if (std::abs(ev.imag()) <= 1e-12 * std::max(1.0, std::abs(ev.real())) && ev.real() > lo && ev.real() < hi)
            out.push_back(ev.real());
    }
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace detail

/// g(y) proportional to exp(int_mode^y 2a/b^2) / b^2(y) on `support`. The
/// reference point of the inner integral is the density mode (root of
/// 2a - (b^2)'), which keeps the exponent O(1) where the mass is.
inline Density stationary_density(const RateModelSpec& spec, const Interval& support) {
    const RealPoly a = to_real(spec.a), b2 = to_real(spec.b2);
    const double lo = support.lower(), hi = support.upper();
    const RealPoly q = a * 2.0 - b2.derivative(1);
    const RealPoly dq = q.derivative(1);

    double mode = std::numeric_limits<double>::quiet_NaN();
    for (double r : detail::real_roots(q, lo, hi))
        if (dq.eval(r) < 0.0 && b2.eval(r) > 0.0) {
            mode = r;
            break;
        }
    if (std::isnan(mode)) {
        if (q.is_zero() || support.bounded())
            mode = support.midpoint();
        else
            throw DivergenceError("drift never balances the diffusion; no stationary law on the support");
    }
    if (!(b2.eval(mode) > 0.0)) throw ParamError("b2 must be positive in the interior of the support");
    const double curvature = -dq.eval(mode) / b2.eval(mode);
    const double scale = curvature > 0.0 ? 1.0 / std::sqrt(curvature) : 0.1 * std::max(1.0, std::abs(mode));

    auto integrand = [a, b2](double y) { return 2.0 * a.eval(y) / b2.eval(y); };
    // Exponent tabulated at interior nodes; each evaluation integrates only
    // from the nearest one.
    auto nodes = std::make_shared<std::vector<double>>();
    auto exponents = std::make_shared<std::vector<double>>();
    for (double y : detail::geometric_nodes(lo, hi, mode, 0.25 * scale))
        if (y > lo && y < hi) nodes->push_back(y);
    const auto centre = static_cast<std::size_t>(std::find(nodes->begin(), nodes->end(), mode) - nodes->begin());
    exponents->assign(nodes->size(), 0.0);
    for (std::size_t k = centre + 1; k < nodes->size(); ++k)
        (*exponents)[k] = (*exponents)[k - 1] + detail::integrate_fixed(integrand, (*nodes)[k - 1], (*nodes)[k]);
    for (std::size_t k = centre; k-- > 0;)
        (*exponents)[k] = (*exponents)[k + 1] - detail::integrate_fixed(integrand, (*nodes)[k], (*nodes)[k + 1]);
    auto unnorm = [=](double y) {
        const double bv = b2.eval(y);
        if (!(bv > 0.0)) return 0.0;
        auto it = std::lower_bound(nodes->begin(), nodes->end(), y);
        std::size_t k = it == nodes->end() ? nodes->size() - 1 : static_cast<std::size_t>(it - nodes->begin());
        if (k > 0 && it != nodes->end() && y - (*nodes)[k - 1] < (*nodes)[k] - y) --k;
        const double exponent = (*exponents)[k] + detail::integrate_fixed(integrand, (*nodes)[k], y);
        const double v = std::exp(exponent) / bv;
        return std::isfinite(v) ? v : 0.0;
    };
    return Density(lo, hi, unnorm, mode, scale);
}

/// Density of X = 1/R for the stationary law of rate family 2:
/// f_X(x) = C x exp(-alpha beta (x - 1/beta)^2) on (0, inf), C by quadrature.
inline Density family2_x_density(double alpha, double beta) {
    if (!(alpha > 0.0 && beta > 0.0)) throw ParamError("family 2 needs alpha, beta > 0");
    const double mode = (1.0 + std::sqrt(1.0 + 2.0 * beta / alpha)) / (2.0 * beta);
    const double scale = 1.0 / std::sqrt(2.0 * alpha * beta + 1.0 / (mode * mode));
    auto unnorm = [=](double x) {
        const double u = x - 1.0 / beta;
        return x * std::exp(-alpha * beta * u * u);
    };
    return Density(0.0, std::numeric_limits<double>::infinity(), unnorm, mode, scale);
}

/// int_u^inf x exp(-alpha beta (x - 1/beta)^2) dx in closed form:
/// exp(-a(u-m)^2)/(2a) + m sqrt(pi/a) (1 - Phi(sqrt(2a)(u-m))), a = alpha beta, m = 1/beta.
inline double family2_x_tail(double alpha, double beta, double u) {
    const double a = alpha * beta, m = 1.0 / beta, v = u - m;
    const double pi = 3.14159265358979323846;
    return std::exp(-a * v * v) / (2.0 * a) + m * std::sqrt(pi / a) * 0.5 * std::erfc(std::sqrt(a) * v);
}

/// Normalising constant C of f_X in closed form.
inline double family2_normaliser(double alpha, double beta) { return 1.0 / family2_x_tail(alpha, beta, 0.0); }

/// P[R <= r] = P[X >= 1/r] for the family 2 stationary law.
inline double family2_cdf(double alpha, double beta, double r) {
    if (!(alpha > 0.0 && beta > 0.0)) throw ParamError("family 2 needs alpha, beta > 0");
    if (!(r > 0.0)) return 0.0;
    if (std::isinf(r)) return 1.0;
    return family2_x_tail(alpha, beta, 1.0 / r) * family2_normaliser(alpha, beta);
}

/// Density of R itself, f_R(r) = f_X(1/r) / r^2, with the closed-form C.
inline double family2_r_pdf(double alpha, double beta, double r) {
    if (!(r > 0.0)) return 0.0;
    const double x = 1.0 / r, u = x - 1.0 / beta;
    return family2_normaliser(alpha, beta) * x * std::exp(-alpha * beta * u * u) * x * x;
}

/// Kolmogorov-Smirnov distance between the empirical law of `samples` and d.
inline double ks_statistic(std::vector<double> samples, const Density& d) {
    if (samples.empty()) throw ParamError("KS distance needs at least one sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double F = d.cdf(samples[i]);
        worst = std::max({worst, std::abs(F - static_cast<double>(i) / n), std::abs(static_cast<double>(i + 1) / n - F)});
    }
    return worst;
}

/// KS distance using every recorded factor value at times >= burn_in.
inline double ks_distance(const PathSet& paths, const Density& d, double burn_in) {
    if (!(paths.config.horizon > burn_in)) throw ConfigError("horizon must exceed the burn-in");
    std::vector<double> samples;
    for (std::size_t r = 0; r < paths.n_records(); ++r) {
        if (paths.times[r] < burn_in - 1e-12) continue;
        for (std::size_t p = 0; p < paths.n_paths(); ++p) samples.push_back(paths.z[paths.at(p, r)]);
    }
    if (samples.empty()) throw ConfigError("no recorded samples after the burn-in");
    return ks_statistic(std::move(samples), d);
}

} // namespace polyterm
