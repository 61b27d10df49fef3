// Command-line front end: argument parsing only; the work is in cli.hpp.

#include "polyterm/cli.hpp"

#include <CLI11.hpp>

int main(int argc, char** argv) {
    polyterm::CommandConfig cfg;
    CLI::App app{"Polynomial term-structure and power-option models"};
    app.require_subcommand(1);

    const std::vector<std::pair<std::string, std::string>> commands = {
        {"validate", "check degrees, invariants and no-arbitrage constraints"},
        {"solve", "coefficient functions G(x) or K(x, theta) on the maturity grid"},
        {"price", "bond prices (rate model) or power-option prices (vol model)"},
        {"yield", "yield curve of a rate model"},
        {"simulate", "Monte Carlo paths with analytic-vs-simulated prices"},
        {"stationary", "stationary density and cdf of a rate model factor"},
        {"power-price", "power-option price and forward-variance surface"},
        {"implied-vol", "Black-Scholes implied volatilities of simulated calls"},
        {"verify-hjm", "forward-variance drift and spot-variance residuals"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* sub = app.add_subcommand(name, help);
        sub->add_option("--model", cfg.model_path, "model JSON file")->required();
        sub->add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
        sub->add_option("--seed", cfg.seed, "simulation / sampling seed")->capture_default_str();
        sub->add_option("--paths", cfg.paths, "Monte Carlo paths")->capture_default_str();
        sub->add_option("--dt", cfg.dt, "Euler time step")->capture_default_str();
        sub->add_option("--z0", cfg.z0, "initial factor value (default: domain midpoint)");
        sub->add_option("--s0", cfg.s0, "initial stock price")->capture_default_str();
        sub->add_option("--ttm-grid", cfg.ttm_grid, "comma-separated times to maturity")->delimiter(',');
        sub->add_option("--theta-list", cfg.theta_list, "comma-separated powers i/N (default: all)")->delimiter(',');
        sub->add_option("--T", cfg.T, "horizon / option maturity")->capture_default_str();
        sub->add_option("--strikes", cfg.strikes, "comma-separated call strikes")->delimiter(',');
        sub->add_option("--threads", cfg.threads, "worker threads")->capture_default_str();
        sub->add_option("--samples", cfg.samples, "residual sample count for verify-hjm")->capture_default_str();
        sub->callback([&cfg, name = name] { cfg.command = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }
    return polyterm::run(cfg);
}
