#pragma once

// Batch driver behind tools/polyterm. Every command writes CSV/JSON files
// into the output directory plus a manifest.json; nothing depends on the
// clock, so identical inputs give identical files.

#include "polyterm/csv.hpp"
#include "polyterm/errors.hpp"
#include "polyterm/hjm.hpp"
#include "polyterm/model.hpp"
#include "polyterm/model_io.hpp"
#include "polyterm/rng.hpp"
#include "polyterm/simulation.hpp"
#include "polyterm/stationary.hpp"
#include "polyterm/term_structure.hpp"
#include "polyterm/vol_engine.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace polyterm {

inline constexpr const char* kToolVersion = "1.0.0";

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"validate",   "solve",      "price",       "yield",     "simulate",
                                                   "stationary", "power-price", "implied-vol", "verify-hjm"};
    return names;
}

struct CommandConfig {
    std::string command;
    std::string model_path;
    std::string out_dir = "out";
    std::uint64_t seed = 42;
    std::size_t paths = 10000;
    double dt = 1e-3;
    std::optional<double> z0;
    double s0 = 1.0;
    std::vector<double> ttm_grid = {0.25, 0.5, 1, 2, 3, 5, 7, 10};
    std::vector<double> theta_list;
    double T = 1.0;
    std::vector<double> strikes = {0.8, 0.85, 0.9, 0.95, 1.0, 1.05, 1.1, 1.15, 1.2};
    unsigned threads = 1;
    std::size_t samples = 50;

    void validate() const {
        bool known = false;
        for (const auto& c : command_names()) known = known || c == command;
        if (!known) throw ConfigError("unknown command '" + command + "'");
        if (model_path.empty()) throw ConfigError("--model is required");
        if (!std::filesystem::is_regular_file(model_path))
            throw ConfigError("model file '" + model_path + "' does not exist");
        if (out_dir.empty()) throw ConfigError("--out must not be empty");
        if (paths < 2) throw ConfigError("--paths must be at least 2");
        if (!(dt > 0.0 && dt <= 1.0)) throw ConfigError("--dt must lie in (0, 1]");
        if (!(s0 > 0.0)) throw ConfigError("--s0 must be positive");
        if (!(T > 0.0)) throw ConfigError("--T must be positive");
        for (double t : ttm_grid)
            if (!(t >= 0.0)) throw ConfigError("--ttm-grid entries must be non-negative");
        for (double th : theta_list)
            if (!(th > 0.0 && th < 1.0)) throw ConfigError("--theta-list entries must lie in (0, 1)");
        for (double k : strikes)
            if (!(k > 0.0)) throw ConfigError("--strikes entries must be positive");
        if (samples == 0) throw ConfigError("--samples must be positive");
    }
};

namespace cli_detail {

inline std::string hex_digest(std::uint64_t d) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(d));
    return buf;
}

/// Errors raised while loading and checking the model exit with code 2.
struct ValidationFailure {
    std::string kind, message;
    Json detail;
};

class Session {
public:
    explicit Session(const CommandConfig& cfg) : cfg_(cfg) {
        std::filesystem::create_directories(cfg.out_dir);
        manifest_["tool"] = "polyterm";
        manifest_["version"] = kToolVersion;
        manifest_["command"] = cfg.command;
        manifest_["model"] = std::filesystem::path(cfg.model_path).filename().string();
        manifest_["seed"] = cfg.seed;
        manifest_["files"] = Json::array();
    }

    void set_model(const ModelSpec& spec) {
        digest_ = hex_digest(digest(spec));
        manifest_["model_digest"] = digest_;
    }

    std::string path(const std::string& name) {
        manifest_["files"].push_back(name);
        return (std::filesystem::path(cfg_.out_dir) / name).string();
    }

    std::vector<std::string> provenance() const {
        return {"polyterm " + std::string(kToolVersion), "command: " + cfg_.command, "seed: " + std::to_string(cfg_.seed),
                "model_digest: " + digest_};
    }

    CsvWriter csv(const std::string& name, const std::vector<std::string>& header) {
        return CsvWriter(path(name), provenance(), header);
    }

    void json(const std::string& name, const Json& j) {
        std::ofstream out(path(name), std::ios::binary);
        if (!out) throw ConfigError("cannot write '" + name + "'");
        out << j.dump(2) << "\n";
    }

    Json& manifest() { return manifest_; }

    void finish() {
        std::ofstream out((std::filesystem::path(cfg_.out_dir) / "manifest.json").string(), std::ios::binary);
        out << manifest_.dump(2) << "\n";
    }

private:
    const CommandConfig& cfg_;
    Json manifest_;
    std::string digest_;
};

inline Json residuals_json(const ConstraintReport& rep, bool nonzero_only) {
    Json arr = Json::array();
    for (const auto& [name, value] : rep.residuals)
        if (!nonzero_only || value != 0) arr.push_back({{"name", name}, {"value", to_decimal_string(value)}});
    return arr;
}

inline Json matrix_json(const InformationMatrix<Rational>& m) {
    Json rows = Json::array();
    for (std::size_t i = 0; i < m.dim; ++i) {
        Json row = Json::array();
        for (std::size_t j = 0; j < m.dim; ++j) row.push_back(to_decimal_string(m(i, j)));
        rows.push_back(row);
    }
    return rows;
}

inline double starting_point(const CommandConfig& cfg, const Interval& domain) {
    const double z = cfg.z0 ? *cfg.z0 : domain.midpoint();
    if (!domain.contains(z)) throw DomainError("--z0 = " + format_double(z) + " lies outside the model domain");
    return z;
}

inline std::vector<int> theta_indices(const CommandConfig& cfg, const VolModelSpec& spec) {
    std::vector<int> out;
    if (cfg.theta_list.empty()) {
        for (int i = 1; i < spec.N; ++i) out.push_back(i);
    } else {
        for (double th : cfg.theta_list) out.push_back(theta_index(spec, th));
    }
    return out;
}

/// Smallest record stride that divides the step count and keeps the
/// stored grid within the path-set storage limit.
inline std::size_t record_stride_for(std::size_t paths, std::size_t steps) {
    for (std::size_t s = 1; s <= steps; ++s)
        if (steps % s == 0 && static_cast<double>(paths) * static_cast<double>(steps / s + 1) <= 4e7) return s;
    return steps;
}

inline constexpr std::size_t kAutoStride = 0;
inline constexpr std::size_t kEndpointsOnly = static_cast<std::size_t>(-1);

inline SimConfig sim_config(const CommandConfig& cfg, double horizon, std::size_t stride) {
    SimConfig sc;
    sc.n_paths = cfg.paths;
    sc.dt = cfg.dt;
    sc.horizon = horizon;
    sc.seed = cfg.seed;
    sc.threads = cfg.threads;
    if (stride == kAutoStride) stride = record_stride_for(cfg.paths, sc.n_steps());
    if (stride == kEndpointsOnly) stride = sc.n_steps();
    sc.record_stride = stride;
    sc.validate();
    return sc;
}

/// alpha, beta when the spec has the rate family 2 shape
/// a = alpha(beta - z), b2 = z^3, R = z.
inline std::optional<std::pair<double, double>> family2_parameters(const RateModelSpec& s) {
    if (s.b2 != RationalPoly::monomial(3) || s.R != RationalPoly::monomial(1) || s.a.degree() != 1) return std::nullopt;
    const Rational alpha = -s.a.coeff(1);
    if (alpha <= 0 || s.a.coeff(0) <= 0) return std::nullopt;
    return std::make_pair(to_double(alpha), to_double(s.a.coeff(0) / alpha));
}

/// Uniform in (lo, hi) from the k-th Philox block of `seed`.
inline double uniform(std::uint64_t seed, std::uint32_t k, std::uint32_t lane, double lo, double hi) {
    auto b = Philox4x32::generate({k, lane, 0x68796d00u, 0},
                                  {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
    return lo + (hi - lo) * PathNormals::to_unit(b[0], b[1]);
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_validate(Session& s, const ModelSpec& spec) {
    validate(spec);
    const ConstraintReport rep = check_constraints(spec);
    Json report;
    report["kind"] = std::holds_alternative<RateModelSpec>(spec) ? "rate" : "vol";
    report["satisfied"] = rep.satisfied;
    report["residuals"] = residuals_json(rep, std::holds_alternative<VolModelSpec>(spec));
    if (const auto* r = std::get_if<RateModelSpec>(&spec)) {
        report["warnings"] = r->warnings;
        if (rep.satisfied) report["information_matrix"] = matrix_json(build_information_matrix(*r));
    } else {
        const auto& v = std::get<VolModelSpec>(spec);
        report["warnings"] = v.warnings;
        report["theta_count"] = v.N - 1;
    }
    s.json("validation.json", report);
    std::cout << report.dump(2) << "\n";
    if (!rep.satisfied)
        throw ValidationFailure{"ConstraintError", "model fails the no-arbitrage coefficient constraints",
                                residuals_json(rep, true)};
}

inline void cmd_solve(Session& s, const CommandConfig& cfg, const ModelSpec& spec) {
    if (const auto* r = std::get_if<RateModelSpec>(&spec)) {
        TermStructure ts(*r);
        std::vector<std::string> header = {"ttm"};
        for (int i = 0; i <= r->n; ++i) header.push_back("g" + std::to_string(i));
        auto out = s.csv("coefficients.csv", header);
        for (double t : cfg.ttm_grid) {
            std::vector<double> row = {t};
            const Eigen::VectorXd G = ts.solve_G(t);
            row.insert(row.end(), G.data(), G.data() + G.size());
            out.row(row);
        }
        s.json("information_matrix.json", {{"matrix", matrix_json(ts.exact_matrix())}});
        return;
    }
    const auto& v = std::get<VolModelSpec>(spec);
    PowerPricer pricer(v);
    int width = 0;
    const auto idx = theta_indices(cfg, v);
    for (int i : idx) width = std::max(width, v.n_of(i));
    std::vector<std::string> header = {"theta", "ttm", "n_theta"};
    for (int i = 0; i <= width; ++i) header.push_back("k" + std::to_string(i));
    auto out = s.csv("coefficients.csv", header);
    for (int i : idx) {
        const auto& sol = pricer.solution(i);
        for (double t : cfg.ttm_grid) {
            std::vector<double> row = {sol.theta, t, static_cast<double>(sol.n_theta)};
            const Eigen::VectorXd K = sol.K(t);
            for (int j = 0; j <= width; ++j) row.push_back(j < K.size() ? K(j) : 0.0);
            out.row(row);
        }
    }
}

inline void cmd_price(Session& s, const CommandConfig& cfg, const ModelSpec& spec, bool with_yield) {
    if (const auto* r = std::get_if<RateModelSpec>(&spec)) {
        TermStructure ts(*r);
        const double z0 = starting_point(cfg, r->domain);
        if (with_yield) {
            auto out = s.csv("yield_curve.csv", {"ttm", "price", "yield", "short_rate"});
            for (double t : cfg.ttm_grid) out.row({t, ts.bond_price(t, z0), ts.yield(t, z0), ts.short_rate(z0)});
        } else {
            auto out = s.csv("bond_prices.csv", {"ttm", "price"});
            for (double t : cfg.ttm_grid) out.row({t, ts.bond_price(t, z0)});
        }
        s.manifest()["z0"] = z0;
        return;
    }
    if (with_yield) throw ConfigError("yield needs a rate model");
    const auto& v = std::get<VolModelSpec>(spec);
    PowerPricer pricer(v);
    const double z0 = starting_point(cfg, v.domain);
    auto out = s.csv("power_prices.csv", {"theta", "ttm", "price", "implied_total_variance"});
    for (int i : theta_indices(cfg, v)) {
        const double theta = static_cast<double>(i) / v.N;
        for (double t : cfg.ttm_grid) {
            const double p = pricer.price(theta, t, cfg.s0, z0);
            const double var = -2.0 / (theta * (1.0 - theta)) * std::log(p / std::pow(cfg.s0, theta));
            out.row({theta, t, p, var});
        }
    }
    s.manifest()["z0"] = z0;
    s.manifest()["s0"] = cfg.s0;
}

inline void cmd_power_price(Session& s, const CommandConfig& cfg, const ModelSpec& spec) {
    const auto* v = std::get_if<VolModelSpec>(&spec);
    if (!v) throw ConfigError("power-price needs a vol model");
    PowerPricer pricer(*v);
    const double z0 = starting_point(cfg, v->domain);
    auto surface = pricer.surface(theta_indices(cfg, *v), cfg.ttm_grid, cfg.s0, z0, cfg.threads);
    auto out = s.csv("power_surface.csv", {"theta", "ttm", "price", "forward_variance_at_0"});
    for (const auto& p : surface) out.row({p.theta, p.ttm, p.price, p.forward_variance_at_0});
    s.manifest()["z0"] = z0;
    s.manifest()["s0"] = cfg.s0;
}

inline void cmd_simulate(Session& s, const CommandConfig& cfg, const ModelSpec& spec) {
    if (const auto* r = std::get_if<RateModelSpec>(&spec)) {
        const double z0 = starting_point(cfg, r->domain);
        const PathSet ps = simulate_factor(*r, sim_config(cfg, cfg.T, kAutoStride), z0);
        auto stats = s.csv("path_stats.csv", {"time", "mean_z", "sd_z"});
        for (std::size_t k = 0; k < ps.n_records(); ++k) {
            std::vector<double> col(ps.n_paths());
            for (std::size_t p = 0; p < col.size(); ++p) col[p] = ps.z[ps.at(p, k)];
            const Estimate e = mean_and_error(col);
            stats.row({ps.times[k], e.estimate, e.std_error * std::sqrt(static_cast<double>(col.size()))});
        }
        TermStructure ts(*r);
        auto prices = s.csv("mc_bond_prices.csv", {"ttm", "analytic", "monte_carlo", "std_error", "z_score"});
        for (double t : cfg.ttm_grid) {
            if (t > cfg.T + 1e-12) continue;
            const Estimate e = mc_bond_price(ps, *r, t);
            const double exact = ts.bond_price(t, z0);
            prices.row({t, exact, e.estimate, e.std_error, e.std_error > 0 ? (e.estimate - exact) / e.std_error : 0.0});
        }
        s.manifest()["z0"] = z0;
        s.manifest()["clamp_violation_rate"] = ps.violation_rate();
        return;
    }
    const auto& v = std::get<VolModelSpec>(spec);
    PowerPricer pricer(v);
    const double z0 = starting_point(cfg, v.domain);
    const PathSet ps = simulate_joint(v, sim_config(cfg, cfg.T, kAutoStride), z0, cfg.s0);
    auto stats = s.csv("path_stats.csv", {"time", "mean_z", "mean_sqrt_z", "mean_s"});
    for (std::size_t k = 0; k < ps.n_records(); ++k) {
        std::vector<double> z(ps.n_paths()), vol(ps.n_paths()), st(ps.n_paths());
        for (std::size_t p = 0; p < z.size(); ++p) {
            z[p] = ps.z[ps.at(p, k)];
            vol[p] = std::sqrt(std::max(z[p], 0.0));
            st[p] = ps.s[ps.at(p, k)];
        }
        stats.row({ps.times[k], mean_and_error(z).estimate, mean_and_error(vol).estimate, mean_and_error(st).estimate});
    }
    auto prices = s.csv("mc_power_prices.csv", {"theta", "analytic", "monte_carlo", "std_error", "z_score"});
    for (int i : theta_indices(cfg, v)) {
        const double theta = static_cast<double>(i) / v.N;
        const Estimate e = mc_power_price(ps, theta, cfg.T);
        const double exact = pricer.price(theta, cfg.T, cfg.s0, z0);
        prices.row({theta, exact, e.estimate, e.std_error, e.std_error > 0 ? (e.estimate - exact) / e.std_error : 0.0});
    }
    s.manifest()["z0"] = z0;
    s.manifest()["s0"] = cfg.s0;
    s.manifest()["clamp_violation_rate"] = ps.violation_rate();
}

inline void cmd_stationary(Session& s, const CommandConfig&, const ModelSpec& spec) {
    const auto* r = std::get_if<RateModelSpec>(&spec);
    if (!r) throw ConfigError("stationary needs a rate model");
    const Density d = stationary_density(*r, r->domain);
    const auto fam2 = family2_parameters(*r);
    std::vector<std::string> header = {"y", "pdf", "cdf"};
    if (fam2) header.push_back("cdf_closed_form");
    auto out = s.csv("stationary_density.csv", header);
    const double lo = d.quantile(1e-4), hi = d.quantile(1.0 - 1e-4);
    const int points = 200;
    for (int k = 0; k <= points; ++k) {
        const double y = lo + (hi - lo) * k / points;
        std::vector<double> row = {y, d.pdf(y), d.cdf(y)};
        if (fam2) row.push_back(family2_cdf(fam2->first, fam2->second, y));
        out.row(row);
    }
    s.manifest()["normalising_mass"] = d.norm_const();
}

inline void cmd_implied_vol(Session& s, const CommandConfig& cfg, const ModelSpec& spec) {
    const auto* v = std::get_if<VolModelSpec>(&spec);
    if (!v) throw ConfigError("implied-vol needs a vol model");
    const double z0 = starting_point(cfg, v->domain);
    const SimConfig sc = sim_config(cfg, cfg.T, kEndpointsOnly);
    const PathSet ps = simulate_joint(*v, sc, z0, cfg.s0);
    auto out = s.csv("implied_vol.csv", {"strike", "call", "std_error", "implied_vol"});
    for (double K : cfg.strikes) {
        const Estimate e = mc_call_price(ps, K, cfg.T);
        double iv = std::numeric_limits<double>::quiet_NaN();
        try {
            iv = implied_vol(e.estimate, cfg.s0, K, cfg.T);
        } catch (const OutOfBoundsError&) {
        }
        out.row({K, e.estimate, e.std_error, iv});
    }
    s.manifest()["z0"] = z0;
    s.manifest()["s0"] = cfg.s0;
}

inline void cmd_verify_hjm(Session& s, const CommandConfig& cfg, const ModelSpec& spec) {
    const auto* v = std::get_if<VolModelSpec>(&spec);
    if (!v) throw ConfigError("verify-hjm needs a vol model");
    auto pricer = std::make_shared<const PowerPricer>(*v);
    const ForwardVarianceSpec fv = bridge_forward_variance(pricer);
    const auto idx = theta_indices(cfg, *v);
    const double zlo = v->domain.lower(), zhi = v->domain.upper();
    const double pad = 0.05 * (std::isfinite(zhi - zlo) ? zhi - zlo : 1.0);
    const double z_from = std::isfinite(zlo) ? zlo + pad : -1.0, z_to = std::isfinite(zhi) ? zhi - pad : z_from + 2.0;
    std::vector<DriftSample> drift;
    std::vector<SpotSample> spot;
    for (std::uint32_t k = 0; k < cfg.samples; ++k) {
        const auto pick = static_cast<std::size_t>(uniform(cfg.seed, k, 0, 0.0, static_cast<double>(idx.size())));
        const double theta = static_cast<double>(idx[std::min(pick, idx.size() - 1)]) / v->N;
        const double z = uniform(cfg.seed, k, 1, z_from, z_to);
        drift.push_back({uniform(cfg.seed, k, 2, 0.05, 2.0), theta, z});
        spot.push_back({theta, z});
    }
    const ResidualReport dr = drift_residual(fv, drift, cfg.threads);
    const ResidualReport sr = spot_variance_check(fv, spot, cfg.threads);
    const auto& worst = drift[dr.argmax];
    const auto& worst_spot = spot[sr.argmax];
    Json report;
    report["drift_residual"] = {{"max", dr.max_residual},
                                {"argmax", {{"x", worst.x}, {"theta", worst.theta}, {"z", worst.z}}},
                                {"samples", dr.samples}};
    report["spot_variance"] = {{"max", sr.max_residual},
                               {"argmax", {{"theta", worst_spot.theta}, {"z", worst_spot.z}}},
                               {"samples", sr.samples}};
    s.json("hjm_report.json", report);
    std::cout << report.dump(2) << "\n";
}

} // namespace cli_detail

/// Runs one command. Returns 0 on success, 2 when the model fails to load
/// or validate, 1 on any other error. Diagnostics go to `err` as one JSON
/// object per failure.
inline int run(const CommandConfig& cfg, std::ostream& err = std::cerr) {
    using namespace cli_detail;
    auto report = [&](const std::string& kind, const std::string& message, const Json& detail = nullptr) {
        Json j = {{"error", kind}, {"message", message}};
        if (!detail.is_null()) j["residuals"] = detail;
        err << j.dump() << "\n";
    };
    try {
        cfg.validate();
    } catch (const Error& e) {
        report(e.kind(), e.what());
        return 1;
    }
    std::optional<ModelSpec> spec;
    try {
        spec = load_model(cfg.model_path);
        if (cfg.command != "validate") {
            validate(*spec);
            const ConstraintReport rep = check_constraints(*spec);
            if (!rep.satisfied)
                throw ValidationFailure{"ConstraintError", "model fails the no-arbitrage coefficient constraints",
                                        residuals_json(rep, true)};
        }
    } catch (const ValidationFailure& f) {
        report(f.kind, f.message, f.detail);
        return 2;
    } catch (const ConfigError& e) {
        report(e.kind(), e.what());
        return 1;
    } catch (const Error& e) {
        report(e.kind(), e.what());
        return 2;
    }
    try {
        Session session(cfg);
        session.set_model(*spec);
        int code = 0;
        try {
            if (cfg.command == "validate") cmd_validate(session, *spec);
            else if (cfg.command == "solve") cmd_solve(session, cfg, *spec);
            else if (cfg.command == "price") cmd_price(session, cfg, *spec, false);
            else if (cfg.command == "yield") cmd_price(session, cfg, *spec, true);
            else if (cfg.command == "simulate") cmd_simulate(session, cfg, *spec);
            else if (cfg.command == "stationary") cmd_stationary(session, cfg, *spec);
            else if (cfg.command == "power-price") cmd_power_price(session, cfg, *spec);
            else if (cfg.command == "implied-vol") cmd_implied_vol(session, cfg, *spec);
            else if (cfg.command == "verify-hjm") cmd_verify_hjm(session, cfg, *spec);
        } catch (const ValidationFailure& f) {
            report(f.kind, f.message, f.detail);
            code = 2;
        } catch (const Error& e) {
            if (cfg.command != "validate") throw;
            report(e.kind(), e.what());
            code = 2;
        }
        session.manifest()["exit_code"] = code;
        session.finish();
        return code;
    } catch (const Error& e) {
        report(e.kind(), e.what());
    } catch (const std::exception& e) {
        report("RuntimeError", e.what());
    }
    return 1;
}

} // namespace polyterm
