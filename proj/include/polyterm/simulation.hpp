#pragma once

// Monte Carlo for the factor diffusion dZ = a(Z)dt + b(Z)dW and, for vol
// models, the stock dS = S h(Z).dW. Euler-Maruyama with full truncation:
// the state is clamped into the domain after every step and square roots
// see max(., 0).
//
// Paths are recorded every `record_stride` steps. Besides Z (and S) each
// record carries the left-endpoint sums dt*sum z_k and dt*sum z_k^2 from time
// zero, which integrate any short-rate map R in F_2 exactly as the
// fine-grid quadrature would.

#include "polyterm/errors.hpp"
#include "polyterm/model.hpp"
#include "polyterm/parallel.hpp"
#include "polyterm/rng.hpp"
#include "polyterm/term_structure.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace polyterm {

enum class Scheme { euler_full_truncation };

struct SimConfig {
    std::size_t n_paths = 1000;
    double dt = 1e-3;
    double horizon = 1.0;
    std::uint64_t seed = 1;
    Scheme scheme = Scheme::euler_full_truncation;
    std::size_t record_stride = 1;  // fine steps between stored records
    unsigned threads = 0;           // 0: hardware concurrency

    std::size_t n_steps() const { return static_cast<std::size_t>(std::ceil(horizon / dt - 1e-9)); }
    double record_dt() const { return static_cast<double>(record_stride) * dt; }
    std::size_t n_records() const { return n_steps() / record_stride + 1; }

    void validate() const {
        if (n_paths < 2) throw ConfigError("n_paths must be at least 2");
        if (!(dt > 0.0) || !std::isfinite(dt)) throw ConfigError("dt must be positive");
        if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon must be positive");
        if (dt > horizon) throw ConfigError("dt must not exceed the horizon");
        if (record_stride == 0) throw ConfigError("record_stride must be positive");
        if (n_steps() % record_stride != 0) throw ConfigError("record_stride must divide the number of steps");
        if (static_cast<double>(n_paths) * static_cast<double>(n_records()) > 4e8)
            throw ConfigError("n_paths x records exceeds the storage limit; raise record_stride");
    }
};

/// Drift and squared diffusion of the factor, in floating point.
struct FactorDynamics {
    RealPoly a;
    RealPoly b2;
    Interval domain;

    static FactorDynamics of(const RateModelSpec& s) { return {to_real(s.a), to_real(s.b2), s.domain}; }
    static FactorDynamics of(const VolModelSpec& s) { return {to_real(s.a), to_real(s.b2), s.domain}; }
};

struct PathSet {
    SimConfig config;
    std::uint64_t spec_digest = 0;
    double z0 = 0.0;
    double s0 = 0.0;
    std::vector<double> times;  // record times
    std::vector<double> z;      // [path * n_records + record]
    std::vector<double> int_z;  // dt * sum of z over fine steps before the record
    std::vector<double> int_z2;
    std::vector<double> s;      // empty unless simulated jointly
    std::size_t pre_clamp_violations = 0;

    std::size_t n_paths() const { return config.n_paths; }
    std::size_t n_records() const { return times.size(); }
    bool has_stock() const { return !s.empty(); }
    std::size_t at(std::size_t path, std::size_t rec) const { return path * n_records() + rec; }

    double violation_rate() const {
        return static_cast<double>(pre_clamp_violations) /
               (static_cast<double>(config.n_paths) * static_cast<double>(config.n_steps()));
    }

    /// Index of the record at time t; t must lie on the record grid.
    std::size_t record_index(double t) const {
        const double step = config.record_dt();
        const double k = std::round(t / step);
        if (!(t >= 0.0) || std::abs(k * step - t) > 1e-9 * std::max(1.0, t) || k >= static_cast<double>(n_records()))
            throw ConfigError("time " + std::to_string(t) + " is not on the recorded grid (step " +
                              std::to_string(step) + ", horizon " + std::to_string(config.horizon) + ")");
        return static_cast<std::size_t>(k);
    }

    /// Left-endpoint integral of R(Z) from 0 to the record time.
    double integrated_rate(const RealPoly& R, std::size_t path, std::size_t rec) const {
        const std::size_t k = at(path, rec);
        return R.coeff(0) * times[rec] + R.coeff(1) * int_z[k] + R.coeff(2) * int_z2[k];
    }
};

namespace detail {

inline PathSet allocate_paths(const SimConfig& cfg, std::uint64_t digest, double z0, double s0, bool stock) {
    PathSet ps;
    ps.config = cfg;
    ps.spec_digest = digest;
    ps.z0 = z0;
    ps.s0 = s0;
    const std::size_t nr = cfg.n_records();
    ps.times.resize(nr);
    for (std::size_t r = 0; r < nr; ++r) ps.times[r] = static_cast<double>(r * cfg.record_stride) * cfg.dt;
    ps.z.assign(cfg.n_paths * nr, 0.0);
    ps.int_z.assign(cfg.n_paths * nr, 0.0);
    ps.int_z2.assign(cfg.n_paths * nr, 0.0);
    if (stock) ps.s.assign(cfg.n_paths * nr, 0.0);
    return ps;
}

struct StockDynamics {
    RealPoly h2;
    RealPoly bh;
};

inline PathSet simulate(const FactorDynamics& dyn, const std::optional<StockDynamics>& stock, const SimConfig& cfg,
                        std::uint64_t digest, double z0, double s0) {
    cfg.validate();
    if (!dyn.domain.contains(z0)) throw DomainError("z0 = " + std::to_string(z0) + " lies outside the model domain");
    if (stock && !(s0 > 0.0)) throw ParamError("s0 must be positive");

    PathSet ps = allocate_paths(cfg, digest, z0, s0, stock.has_value());
    const std::size_t n_steps = cfg.n_steps(), nr = ps.n_records();
    const double dt = cfg.dt, sqdt = std::sqrt(dt);
    const double lo = dyn.domain.lower(), hi = dyn.domain.upper();
    std::vector<std::size_t> violations(cfg.n_paths, 0);

    run_blocks(cfg.n_paths, cfg.threads, [&](std::size_t begin, std::size_t end) {
        for (std::size_t p = begin; p < end; ++p) {
            PathNormals normals(cfg.seed, p);
            double zv = z0, log_s = 0.0, iz = 0.0, iz2 = 0.0;
            std::size_t rec = 0, bad = 0;
            auto store = [&] {
                const std::size_t k = ps.at(p, rec);
                ps.z[k] = zv;
                ps.int_z[k] = iz;
                ps.int_z2[k] = iz2;
                if (stock) ps.s[k] = s0 * std::exp(log_s);
                ++rec;
            };
            store();
            for (std::size_t step = 1; step <= n_steps; ++step) {
                const double dw1 = normals.next();
                const double drift = dyn.a.eval(zv);
                const double b2v = std::max(dyn.b2.eval(zv), 0.0);
                if (stock) {
                    const double dw2 = normals.next();
                    const double h2v = std::max(stock->h2.eval(zv), 0.0);
                    const double bhv = stock->bh.eval(zv);
                    const double denom = std::sqrt(h2v * b2v);
                    double rho = 0.0;
                    if (denom > 0.0) {
                        rho = bhv / denom;
                        if (std::abs(rho) > 1.0 + 1e-9)
                            throw CorrelationError("|rho| = " + std::to_string(std::abs(rho)) +
                                                   " exceeds 1 at z = " + std::to_string(zv));
                        rho = std::clamp(rho, -1.0, 1.0);
                    } else if (bhv != 0.0) {
                        throw CorrelationError("b.h is nonzero where |h|^2 |b|^2 vanishes, z = " +
                                               std::to_string(zv));
                    }
                    log_s += -0.5 * h2v * dt + std::sqrt(h2v) * sqdt * (rho * dw1 + std::sqrt(1.0 - rho * rho) * dw2);
                }
                iz += zv * dt;
                iz2 += zv * zv * dt;
                const double next = zv + drift * dt + std::sqrt(b2v) * sqdt * dw1;
                if (next < lo || next > hi) ++bad;
                zv = std::min(std::max(next, lo), hi);
                if (step % cfg.record_stride == 0) store();
            }
            violations[p] = bad;
            (void)nr;
        }
    });
    for (auto v : violations) ps.pre_clamp_violations += v;
    return ps;
}

} // namespace detail

inline PathSet simulate_factor(const RateModelSpec& spec, const SimConfig& cfg, double z0) {
    return detail::simulate(FactorDynamics::of(spec), std::nullopt, cfg, digest(spec), z0, 0.0);
}

inline PathSet simulate_factor(const VolModelSpec& spec, const SimConfig& cfg, double z0) {
    return detail::simulate(FactorDynamics::of(spec), std::nullopt, cfg, digest(spec), z0, 0.0);
}

/// Z driven by W1 with coefficient sqrt(|b|^2); log S driven by
/// rho W1 + sqrt(1 - rho^2) W2 with rho = b.h / sqrt(|h|^2 |b|^2).
inline PathSet simulate_joint(const VolModelSpec& spec, const SimConfig& cfg, double z0, double s0) {
    return detail::simulate(FactorDynamics::of(spec), detail::StockDynamics{to_real(spec.h2), to_real(spec.bh)}, cfg,
                            digest(spec), z0, s0);
}

// ---------------------------------------------------------------------------
// Estimators

/// Mean and standard error of exp(-int_0^T R(Z) ds).
inline Estimate mc_bond_price(const PathSet& paths, const RateModelSpec& spec, double T) {
    if (T > paths.config.horizon + 1e-12) throw ConfigError("T exceeds the simulated horizon");
    const std::size_t rec = paths.record_index(T);
    const RealPoly R = to_real(spec.R);
    std::vector<double> v(paths.n_paths());
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = std::exp(-paths.integrated_rate(R, p, rec));
    return mean_and_error(v);
}

struct MartingaleReport {
    double discounted_mean = 0.0;
    double std_error = 0.0;
    double initial_price = 0.0;
    double z_score = 0.0;
};

/// Compares E[exp(-int_0^t R) P(T - t, Z_t)] with P(T, z0). `discount_rate`
/// overrides the R used for discounting (negative controls).
inline MartingaleReport mc_martingale_check(const PathSet& paths, const TermStructure& ts, double t, double T,
                                            const std::optional<RealPoly>& discount_rate = std::nullopt) {
    if (!(t >= 0.0 && t < T)) throw ConfigError("martingale check needs 0 <= t < T");
    if (T > paths.config.horizon + 1e-12) throw ConfigError("T exceeds the simulated horizon");
    const std::size_t rec = paths.record_index(t);
    const RealPoly R = discount_rate ? *discount_rate : to_real(ts.spec().R);
    const Eigen::VectorXd G = ts.solve_G(T - t);
    std::vector<double> v(paths.n_paths());
    for (std::size_t p = 0; p < v.size(); ++p) {
        const double zt = paths.z[paths.at(p, rec)];
        v[p] = std::exp(-paths.integrated_rate(R, p, rec)) * TermStructure::eval_coefficients(G, zt);
    }
    const Estimate e = mean_and_error(v);
    MartingaleReport rep;
    rep.discounted_mean = e.estimate;
    rep.std_error = e.std_error;
    rep.initial_price = ts.bond_price(T, paths.z0);
    const double diff = e.estimate - rep.initial_price;
    if (e.std_error > 0.0)
        rep.z_score = diff / e.std_error;
    else
        rep.z_score = std::abs(diff) <= 1e-13 * std::max(1.0, std::abs(rep.initial_price))
                          ? 0.0
                          : std::copysign(std::numeric_limits<double>::infinity(), diff);
    return rep;
}

namespace detail {
inline std::size_t stock_record(const PathSet& paths, double T) {
    if (!paths.has_stock()) throw MissingStockError("path set has no stock component; use simulate_joint");
    if (T > paths.config.horizon + 1e-12) throw ConfigError("T exceeds the simulated horizon");
    return paths.record_index(T);
}
} // namespace detail

/// Mean and standard error of S_T^theta.
inline Estimate mc_power_price(const PathSet& paths, double theta, double T) {
    const std::size_t rec = detail::stock_record(paths, T);
    std::vector<double> v(paths.n_paths());
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = std::pow(paths.s[paths.at(p, rec)], theta);
    return mean_and_error(v);
}

/// Mean and standard error of max(S_T - K, 0).
inline Estimate mc_call_price(const PathSet& paths, double K, double T) {
    const std::size_t rec = detail::stock_record(paths, T);
    std::vector<double> v(paths.n_paths());
    for (std::size_t p = 0; p < v.size(); ++p) v[p] = std::max(paths.s[paths.at(p, rec)] - K, 0.0);
    return mean_and_error(v);
}

// ---------------------------------------------------------------------------
// Zero-rate Black-Scholes and implied volatility

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double black_scholes_call(double s0, double K, double T, double sigma) {
    if (K <= 0.0) return s0 - K;
    const double sd = sigma * std::sqrt(T);
    if (sd <= 0.0) return std::max(s0 - K, 0.0);
    const double d1 = (std::log(s0 / K) + 0.5 * sd * sd) / sd;
    return s0 * normal_cdf(d1) - K * normal_cdf(d1 - sd);
}

/// Volatility reproducing `call` under zero rates, by bisection starting
/// from the bracket [1e-6, 5]. The upper end is doubled while the price is
/// still above BS(upper).
inline double implied_vol(double call, double s0, double K, double T) {
    if (!(s0 > 0.0 && K > 0.0 && T > 0.0)) throw ParamError("implied_vol needs positive s0, K and T");
    const double intrinsic = std::max(s0 - K, 0.0);
    if (!(call > intrinsic && call < s0))
        throw OutOfBoundsError("call price " + std::to_string(call) + " violates the bounds (" +
                               std::to_string(intrinsic) + ", " + std::to_string(s0) + ")");
    double lo = 1e-6, hi = 5.0;
    while (black_scholes_call(s0, K, T, hi) < call) {
        hi *= 2.0;
        if (hi > 1e4) throw OutOfBoundsError("implied volatility exceeds 1e4");
    }
    if (black_scholes_call(s0, K, T, lo) > call) return lo;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        (black_scholes_call(s0, K, T, mid) < call ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace polyterm
