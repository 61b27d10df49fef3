#include "catch_amalgamated.hpp"

#include "polyterm/stationary.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <random>

using namespace polyterm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kAlpha = 0.1, kBeta = 0.05;
const double kInf = std::numeric_limits<double>::infinity();

RateModelSpec family2(const char* alpha = "0.1", const char* beta = "0.05") {
    return build_rate_family("rate-family-2", {{"alpha", parse_decimal(alpha)}, {"beta", parse_decimal(beta)}});
}

/// Independent oracle: direct Gauss-Kronrod on the unnormalised X density.
double x_mass(double alpha, double beta, double from, double to) {
    auto f = [=](double x) { return x * std::exp(-alpha * beta * (x - 1.0 / beta) * (x - 1.0 / beta)); };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, from, to, 15, 1e-14);
}

double forward_residual(const Density& g, const RealPoly& a, const RealPoly& b2, double y, double h) {
    auto flux = [&](double v) { return g.pdf(v) * a.eval(v); };
    auto diff = [&](double v) { return g.pdf(v) * b2.eval(v); };
    const double d_flux = (flux(y + h) - flux(y - h)) / (2.0 * h);
    const double d2_diff = (diff(y + h) - 2.0 * diff(y) + diff(y - h)) / (h * h);
    return -d_flux + 0.5 * d2_diff;
}

} // namespace

TEST_CASE("Ornstein-Uhlenbeck gives the standard normal", "[stationary]") {
    RateModelSpec ou;
    ou.a = RationalPoly{0, -1};
    ou.b2 = RationalPoly{2};
    const Density g = stationary_density(ou, Interval{});
    const double pi = 3.14159265358979323846;
    for (double y : {-4.0, -1.5, 0.0, 0.3, 2.0, 5.0}) {
        CHECK_THAT(g.pdf(y), WithinRel(std::exp(-y * y / 2) / std::sqrt(2 * pi), 1e-8));
        CHECK_THAT(g.cdf(y), WithinAbs(0.5 * std::erfc(-y / std::sqrt(2.0)), 1e-8));
    }
}

TEST_CASE("Brownian motion has no stationary law", "[stationary]") {
    RateModelSpec bm;
    bm.b2 = RationalPoly{1};
    CHECK_THROWS_AS(stationary_density(bm, Interval{}), DivergenceError);
    RateModelSpec push;
    push.a = RationalPoly{1};
    push.b2 = RationalPoly{1};
    CHECK_THROWS_AS(stationary_density(push, Interval{Rational(0), std::nullopt}), DivergenceError);
}

TEST_CASE("family 2 closed forms agree with quadrature", "[stationary]") {
    const double C_oracle = 1.0 / x_mass(kAlpha, kBeta, 0.0, kInf);
    CHECK_THAT(family2_normaliser(kAlpha, kBeta), WithinRel(C_oracle, 1e-10));

    const Density x = family2_x_density(kAlpha, kBeta);
    CHECK_THAT(x.norm_const(), WithinRel(1.0 / C_oracle, 1e-8));
    CHECK(x.pdf(0.0) == 0.0);
    CHECK(x.pdf(1e-9) < 1e-9);

    // P[R <= beta] = P[X >= 1/beta]
    const double at_beta = C_oracle * x_mass(kAlpha, kBeta, 1.0 / kBeta, kInf);
    CHECK_THAT(family2_cdf(kAlpha, kBeta, kBeta), WithinAbs(at_beta, 1e-8));
    CHECK(family2_cdf(kAlpha, kBeta, 0.0) == 0.0);
    CHECK_THAT(family2_cdf(kAlpha, kBeta, 1e6), WithinAbs(1.0, 1e-12));
    CHECK(family2_cdf(kAlpha, kBeta, 1e-3) < 1e-12);

    for (double r : {0.01, 0.03, 0.05, 0.1, 0.3, 1.0})
        CHECK_THAT(family2_cdf(kAlpha, kBeta, r),
                   WithinAbs(C_oracle * x_mass(kAlpha, kBeta, 1.0 / r, kInf), 1e-8));
}

TEST_CASE("family 2 X mode solves the log-derivative equation", "[stationary][property]") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.01, 2.0);
    for (int k = 0; k < 50; ++k) {
        const double alpha = u(rng), beta = u(rng);
        const double mode = (1.0 + std::sqrt(1.0 + 2.0 * beta / alpha)) / (2.0 * beta);
        CHECK(std::abs(1.0 / mode - 2.0 * alpha * beta * (mode - 1.0 / beta)) <= 1e-12 * (1.0 / mode));
        const Density x = family2_x_density(alpha, beta);
        CHECK(x.pdf(mode) >= x.pdf(mode * (1 + 1e-3)));
        CHECK(x.pdf(mode) >= x.pdf(mode * (1 - 1e-3)));
        CHECK_THAT(x.norm_const(), WithinRel(x_mass(alpha, beta, 0.0, kInf), 1e-8));
    }
}

TEST_CASE("family 2 quadrature density matches the closed forms", "[stationary]") {
    const Density r = stationary_density(family2(), family2().domain);
    const Density x = family2_x_density(kAlpha, kBeta);
    for (int k = 0; k <= 40; ++k) {
        const double v = 0.01 * std::pow(100.0, k / 40.0);
        const double pushed = x.pdf(1.0 / v) / (v * v);
        CHECK_THAT(r.pdf(v), WithinRel(pushed, 1e-8));
        CHECK_THAT(r.pdf(v), WithinRel(family2_r_pdf(kAlpha, kBeta, v), 1e-8));
        CHECK_THAT(r.cdf(v), WithinAbs(family2_cdf(kAlpha, kBeta, v), 1e-8));
        const double h = 1e-5 * v;
        const double slope = (family2_cdf(kAlpha, kBeta, v + h) - family2_cdf(kAlpha, kBeta, v - h)) / (2 * h);
        if (family2_r_pdf(kAlpha, kBeta, v) > 1e-200)
            CHECK_THAT(slope, WithinRel(family2_r_pdf(kAlpha, kBeta, v), 1e-5));
    }
}

TEST_CASE("densities satisfy the forward equation", "[stationary][property]") {
    struct Case {
        RateModelSpec spec;
        Interval support;
    };
    RateModelSpec ou;
    ou.a = RationalPoly{1, -2};
    ou.b2 = RationalPoly{parse_decimal("0.5")};
    const auto f3 = build_rate_family("rate-family-3", {{"alpha", parse_decimal("0.5")},
                                                        {"beta", parse_decimal("0.03")},
                                                        {"k", parse_decimal("0.06")},
                                                        {"l", parse_decimal("0.08")}});
    std::vector<Case> cases = {{family2(), family2().domain}, {family2("0.4", "0.2"), family2().domain},
                               {ou, Interval{}}, {f3, f3.domain}};
    for (const auto& c : cases) {
        const Density g = stationary_density(c.spec, c.support);
        const RealPoly a = to_real(c.spec.a), b2 = to_real(c.spec.b2);
        double peak = 0.0;
        std::vector<double> ys;
        for (int k = 1; k <= 100; ++k) ys.push_back(g.quantile(0.005 + 0.99 * (k - 1) / 99.0));
        for (double y : ys) peak = std::max(peak, g.pdf(y));
        const double spread = g.quantile(0.9) - g.quantile(0.1);
        for (double y : ys) CHECK(std::abs(forward_residual(g, a, b2, y, 1e-3 * spread)) <= 1e-4 * peak);
    }
}

TEST_CASE("density bookkeeping", "[stationary][property]") {
    const Density g = stationary_density(family2(), family2().domain);
    const auto& grid = g.cdf_grid();
    REQUIRE(!grid.empty());
    for (std::size_t k = 1; k < grid.size(); ++k) CHECK(grid[k] >= grid[k - 1]);
    CHECK(grid.front() >= 0.0);
    CHECK_THAT(grid.back(), WithinAbs(1.0, 1e-10));
    for (double p : {1e-6, 0.01, 0.25, 0.5, 0.9, 0.999999}) CHECK_THAT(g.cdf(g.quantile(p)), WithinAbs(p, 1e-10));

    // Re-quadrature of the normalised density, split at quantiles so the
    // heavy right tail does not swamp the peak.
    const std::vector<double> cuts = {0.0, g.quantile(1e-6), g.quantile(0.5), g.quantile(1 - 1e-6), g.quantile(1 - 1e-14)};
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
        total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate([&](double y) { return g.pdf(y); },
                                                                               cuts[k], cuts[k + 1], 15, 1e-14);
    CHECK_THAT(total, WithinAbs(1.0, 1e-8));
}

TEST_CASE("KS distance", "[stationary]") {
    const Density g = stationary_density(family2(), family2().domain);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> draws(10000);
    for (double& d : draws) d = g.quantile(u(rng));
    CHECK(ks_statistic(draws, g) < 1.63 / std::sqrt(10000.0));

    const std::vector<double> stuck(100, g.quantile(0.5));
    CHECK(ks_statistic(stuck, g) >= 0.5 - 1e-9);
    const std::vector<double> far(100, g.quantile(0.999));
    CHECK(ks_statistic(far, g) > 0.99);
    CHECK_THROWS_AS(ks_statistic({}, g), ParamError);

    SimConfig c;
    c.n_paths = 200;
    c.dt = 1e-2;
    c.horizon = 20;
    c.record_stride = 100;
    c.threads = 1;
    const auto ps = simulate_factor(family2(), c, 0.05);
    CHECK_THROWS_AS(ks_distance(ps, g, 20.0), ConfigError);
    CHECK(ks_distance(ps, g, 10.0) < 1.0);
}
