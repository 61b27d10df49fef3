#pragma once

// Power-option pricing for model (M): for each theta = i/N the coefficients
// k_i(x, theta) solve K' = S(theta) K with K(0) = (1, 0, ..., 0), and
//   P_t(T, theta) = S_t^theta * sum_i k_i(T - t, theta) Z_t^i.

#include "polyterm/errors.hpp"
#include "polyterm/matrix_exp.hpp"
#include "polyterm/model.hpp"
#include "polyterm/parallel.hpp"
#include "polyterm/term_structure.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

namespace polyterm {

/// Maps theta to its grid index i (theta = i/N). Values off the grid are
/// rejected rather than interpolated.
inline int theta_index(const VolModelSpec& spec, double theta) {
    double scaled = theta * spec.N;
    double nearest = std::round(scaled);
    if (!(std::abs(scaled - nearest) <= 1e-9 * std::max(1.0, std::abs(scaled))) || nearest < 1 ||
        nearest > spec.N - 1)
        throw ThetaError("theta = " + std::to_string(theta) + " is not in D_N for N = " + std::to_string(spec.N));
    return static_cast<int>(nearest);
}

/// The two grid thetas bracketing an arbitrary theta in (0, 1); equal when
/// theta is itself on the grid or outside [1/N, (N-1)/N].
inline std::pair<int, int> nearest_grid_indices(const VolModelSpec& spec, double theta) {
    if (!(theta > 0.0 && theta < 1.0)) throw ThetaError("theta must lie in (0, 1)");
    double scaled = theta * spec.N;
    int lo = std::clamp(static_cast<int>(std::floor(scaled)), 1, spec.N - 1);
    int hi = std::clamp(static_cast<int>(std::ceil(scaled)), 1, spec.N - 1);
    return {lo, hi};
}

/// S(theta) for grid index i, in the scalar type of the caller. Banding is
/// the rate recursion with a -> d(., theta) and -R -> theta(theta-1)/2 |h|^2.
template <class T>
InformationMatrix<T> theta_band_matrix(const VolModelSpec& spec, int i) {
    const Rational theta = spec.theta(i);
    const RationalPoly d = vol_drift(spec, theta);
    const RationalPoly killing = spec.h2 * Rational(-(theta * (theta - 1)) / 2);
    if constexpr (std::is_same_v<T, Rational>) {
        return five_band_matrix(d, spec.b2, killing, spec.n_of(i));
    } else {
        return five_band_matrix(to_real(d), to_real(spec.b2), to_real(killing), spec.n_of(i));
    }
}

inline InformationMatrix<Rational> build_theta_matrix_exact(const VolModelSpec& spec, double theta) {
    const int i = theta_index(spec, theta);
    check_vol_degrees(spec);
    auto r = vol_residuals(spec, i);
    if (r[0] != 0 || r[1] != 0 || r[2] != 0)
        throw ConstraintError("vol model fails the no-arbitrage constraints at theta = " + std::to_string(i) + "/" +
                              std::to_string(spec.N));
    return theta_band_matrix<Rational>(spec, i);
}

inline Eigen::MatrixXd build_theta_matrix(const VolModelSpec& spec, double theta) {
    return build_theta_matrix_exact(spec, theta).to_eigen();
}

/// Solved coefficient system for one theta on the grid.
struct ThetaSolution {
    int index = 0;
    double theta = 0.0;
    int n_theta = 0;
    Eigen::MatrixXd S;

    ThetaSolution() = default;
    ThetaSolution(const VolModelSpec& spec, int i)
        : index(i), theta(static_cast<double>(i) / spec.N), n_theta(spec.n_of(i)),
          S(build_theta_matrix(spec, static_cast<double>(i) / spec.N)) {}

    Eigen::VectorXd K0() const {
        Eigen::VectorXd k = Eigen::VectorXd::Zero(n_theta + 1);
        k(0) = 1.0;
        return k;
    }

    Eigen::VectorXd K(double x) const {
        if (x == 0.0) return K0();
        return matrix_exponential(S, x).col(0);
    }
};

inline Eigen::VectorXd solve_K(const VolModelSpec& spec, double theta, double x) {
    return ThetaSolution(spec, theta_index(spec, theta)).K(x);
}

namespace detail {

inline void check_price_inputs(const VolModelSpec& spec, double ttm, double s, double z) {
    if (!(s > 0.0)) throw ParamError("stock price must be positive");
    if (!(ttm >= 0.0)) throw ParamError("time to maturity must be non-negative");
    if (!spec.domain.contains(z))
        throw DomainError("factor value " + std::to_string(z) + " lies outside the model domain");
}

inline double forward_variance_from(const ThetaSolution& sol, double x, double z) {
    Eigen::VectorXd K = sol.K(x);
    double level = TermStructure::eval_coefficients(K, z);
    if (!(level > 0.0))
        throw NonPositivePriceError("sum k_i z^i = " + std::to_string(level) + " is not positive at x = " +
                                    std::to_string(x));
    double slope = TermStructure::eval_coefficients(sol.S * K, z);
    return -2.0 / (sol.theta * (1.0 - sol.theta)) * slope / level;
}

} // namespace detail

/// s^theta * sum_i k_i(ttm, theta) z^i
inline double power_price(const VolModelSpec& spec, double theta, double ttm, double s, double z) {
    detail::check_price_inputs(spec, ttm, s, z);
    ThetaSolution sol(spec, theta_index(spec, theta));
    return std::pow(s, sol.theta) * TermStructure::eval_coefficients(sol.K(ttm), z);
}

/// f(x, theta) = -2/(theta(1-theta)) d/dx log(sum_i k_i(x, theta) z^i).
/// At x = 0 this is |h(z)|^2, the spot variance.
inline double implied_forward_variance(const VolModelSpec& spec, double theta, double x, double z) {
    if (!(x >= 0.0)) throw ParamError("x must be non-negative");
    return detail::forward_variance_from(ThetaSolution(spec, theta_index(spec, theta)), x, z);
}

/// Prices across D_N with per-theta solutions built once and shared.
/// Thread-safe; results do not depend on the order or parallelism of calls.
class PowerPricer {
public:
    explicit PowerPricer(VolModelSpec spec) : spec_(std::move(spec)), slots_(static_cast<std::size_t>(spec_.N)) {
        validate_constraints();
    }

    const VolModelSpec& spec() const { return spec_; }

    const ThetaSolution& solution(int i) const {
        if (i < 1 || i >= spec_.N) throw ThetaError("grid index out of range");
        auto& slot = slots_[static_cast<std::size_t>(i)];
        std::call_once(slot.once, [&] { slot.value = ThetaSolution(spec_, i); });
        return slot.value;
    }
    const ThetaSolution& solution_at(double theta) const { return solution(theta_index(spec_, theta)); }

    Eigen::VectorXd solve_K(double theta, double x) const { return solution_at(theta).K(x); }

    double price(double theta, double ttm, double s, double z) const {
        detail::check_price_inputs(spec_, ttm, s, z);
        const auto& sol = solution_at(theta);
        return std::pow(s, sol.theta) * TermStructure::eval_coefficients(sol.K(ttm), z);
    }

    double forward_variance(double theta, double x, double z) const {
        if (!(x >= 0.0)) throw ParamError("x must be non-negative");
        return detail::forward_variance_from(solution_at(theta), x, z);
    }

    /// Prices at the two grid points bracketing theta. Off-grid values are
    /// not interpolated.
    std::pair<double, double> bracketing_prices(double theta, double ttm, double s, double z) const {
        auto [lo, hi] = nearest_grid_indices(spec_, theta);
        return {price(static_cast<double>(lo) / spec_.N, ttm, s, z),
                price(static_cast<double>(hi) / spec_.N, ttm, s, z)};
    }

    struct SurfacePoint {
        double theta, ttm, price, forward_variance_at_0;
    };

    /// Row-major over (grid index, ttm). Grid indices are split across
    /// `threads` workers; each point is computed independently so the output
    /// is identical for any thread count.
    std::vector<SurfacePoint> surface(const std::vector<int>& indices, const std::vector<double>& ttms, double s,
                                      double z, unsigned threads = 1) const {
        std::vector<SurfacePoint> out(indices.size() * ttms.size());
        auto work = [&](std::size_t begin, std::size_t end) {
            for (std::size_t k = begin; k < end; ++k) {
                const double theta = static_cast<double>(indices[k]) / spec_.N;
                const double fv0 = forward_variance(theta, 0.0, z);
                for (std::size_t t = 0; t < ttms.size(); ++t)
                    out[k * ttms.size() + t] = {theta, ttms[t], price(theta, ttms[t], s, z), fv0};
            }
        };
        run_blocks(indices.size(), std::max(1u, threads), work);
        return out;
    }

private:
    struct Slot {
        std::once_flag once;
        ThetaSolution value;
    };

    void validate_constraints() const {
        auto rep = check_vol_constraints(spec_);
        if (!rep.satisfied) {
            std::string msg = "vol model fails the no-arbitrage constraints:";
            for (const auto& [name, value] : rep.residuals)
                if (value != 0) msg += " [" + name + " = " + to_decimal_string(value) + "]";
            throw ConstraintError(msg);
        }
    }

    VolModelSpec spec_;
    mutable std::vector<Slot> slots_;
};

} // namespace polyterm
