#include "catch_amalgamated.hpp"

#include "polyterm/vol_engine.hpp"

#include <random>

using namespace polyterm;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

Rational q(const char* s) { return parse_decimal(s); }

Rational pos(std::mt19937_64& rng) {
    std::uniform_int_distribution<long long> n(1, 100), d(1, 100);
    return Rational(n(rng), d(rng));
}

VolModelSpec section43() {
    return build_vol_family("vol-example-7", {{"N", 100},
                                              {"c", q("1e-4")},
                                              {"h0", 0},
                                              {"alpha1", q("0.02")},
                                              {"alpha2", q("0.06")},
                                              {"beta", 0},
                                              {"gamma", q("0.05")}});
}

/// |h|^2 = sigma2 constant, everything else zero, n(theta) = 0.
VolModelSpec constant_variance(int N, const Rational& sigma2) {
    VolModelSpec s;
    s.N = N;
    s.nmap.assign(static_cast<std::size_t>(N - 1), 0);
    s.h2 = RationalPoly{sigma2};
    s.domain = Interval{Rational(0), Rational(1)};
    return s;
}

/// Example 6 shape at N = 2 with a = z^2 + d1 z (no constant term).
VolModelSpec example6_n2(const Rational& d1) {
    VolModelSpec s;
    s.N = 2;
    s.nmap = {1};
    s.h2 = RationalPoly{0, 8};
    s.b2 = RationalPoly{0, 1, -1};
    s.a = RationalPoly{0, d1, 1};
    s.domain = Interval{Rational(0), Rational(1)};
    return s;
}

VolModelSpec random_example(std::mt19937_64& rng, bool six) {
    std::uniform_int_distribution<int> N(2, 12);
    const Rational a1 = pos(rng), gamma = a1 + pos(rng), a2 = gamma + pos(rng);
    FamilyParams p{{"N", N(rng)}, {"alpha1", a1}, {"alpha2", a2}, {"gamma", gamma}, {"h0", rng() % 2 ? pos(rng) : Rational(0)}};
    if (six)
        p["beta"] = pos(rng);
    else
        p["c"] = pos(rng);
    return build_vol_family(six ? "vol-example-6" : "vol-example-7", p);
}

} // namespace

TEST_CASE("theta matrix fixtures", "[vol]") {
    const Rational d0 = q("0.3"), d1 = q("-0.7");
    VolModelSpec s = example6_n2(d1);
    s.a = s.a + RationalPoly{d0};
    const auto S = build_theta_matrix_exact(s, 0.5);
    REQUIRE(S.dim == 2);
    CHECK(S(0, 0) == 0);
    CHECK(S(0, 1) == d0);
    CHECK(S(1, 0) == -1);
    CHECK(S(1, 1) == d1);

    const auto C = build_theta_matrix_exact(constant_variance(4, q("0.04")), 0.25);
    REQUIRE(C.dim == 1);
    CHECK(C(0, 0) == Rational(1, 4) * Rational(-3, 4) * q("0.04") / 2);
}

TEST_CASE("theta matrix input checks", "[vol]") {
    const auto s = section43();
    CHECK_THROWS_AS(build_theta_matrix(s, 0.015), ThetaError);
    CHECK_THROWS_AS(build_theta_matrix(s, 0.0), ThetaError);
    CHECK_THROWS_AS(build_theta_matrix(s, 1.0), ThetaError);
    auto bad = s;
    bad.nmap[4] += 1;
    CHECK_THROWS_AS(build_theta_matrix(bad, 0.05), ConstraintError);
    CHECK_NOTHROW(build_theta_matrix(bad, 0.04));
    CHECK_THROWS_AS(PowerPricer(bad), ConstraintError);
}

TEST_CASE("theta matrix equals the expanded generator images", "[vol][property]") {
    // Column j of S(theta) must hold the z-coefficients of B_j(z, theta);
    // powers above n(theta) must cancel.
    std::mt19937_64 rng(41);
    for (int draw = 0; draw < 20; ++draw) {
        const VolModelSpec spec = random_example(rng, draw % 2 == 0);
        for (int i = 1; i < spec.N; ++i) {
            const auto S = theta_band_matrix<Rational>(spec, i);
            const int n = spec.n_of(i);
            for (int j = 0; j <= n; ++j) {
                const RationalPoly Bj = compute_Bi(spec, spec.theta(i), j);
                CHECK(in_Fk(Bj, n));
                for (int m = 0; m <= n; ++m)
                    CHECK(S(static_cast<std::size_t>(m), static_cast<std::size_t>(j)) == Bj.coeff(static_cast<std::size_t>(m)));
            }
        }
    }
}

TEST_CASE("K at zero and small x", "[vol]") {
    const auto s = example6_n2(q("-0.5"));
    const Eigen::VectorXd K0 = solve_K(s, 0.5, 0.0);
    CHECK(K0(0) == 1.0);
    CHECK(K0(1) == 0.0);
    const double x = 1e-7;
    const Eigen::VectorXd K = solve_K(s, 0.5, x);
    CHECK_THAT(K(1), WithinRel(-x, 1e-6));
    CHECK_THAT(K(0), WithinAbs(1.0, 1e-12));

    const double sigma2 = 0.04;
    const auto c = constant_variance(10, q("0.04"));
    for (double theta : {0.1, 0.5, 0.9})
        for (double t : {0.5, 2.0})
            CHECK_THAT(solve_K(c, theta, t)(0), WithinRel(std::exp(theta * (theta - 1) * sigma2 * t / 2), 1e-13));
}

TEST_CASE("power price fixtures", "[vol]") {
    const auto c = constant_variance(2, q("0.04"));
    CHECK_THAT(power_price(c, 0.5, 1.0, 1.0, 0.3), WithinRel(std::exp(-0.005), 1e-13));
    CHECK_THAT(power_price(c, 0.5, 1.0, 1.0, 0.3), WithinAbs(0.995012, 1e-6));

    const auto s = section43();
    for (double theta : {0.01, 0.37, 0.99})
        CHECK_THAT(power_price(s, theta, 0.0, 2.0, 0.02), WithinRel(std::pow(2.0, theta), 1e-15));
    CHECK_THROWS_AS(power_price(s, 0.01, 1.0, 1.0, 0.06), DomainError);
    CHECK_THROWS_AS(power_price(s, 0.01, 1.0, 0.0, 0.04), ParamError);
    CHECK_THROWS_AS(power_price(s, 0.015, 1.0, 1.0, 0.04), ThetaError);
}

TEST_CASE("forward variance at x = 0 is the spot variance", "[vol]") {
    const auto s = section43();
    const RealPoly h2 = to_real(s.h2);
    CHECK_THAT(implied_forward_variance(s, 0.01, 0.0, 0.04), WithinRel(0.04, 1e-12));
    PowerPricer pricer(s);
    for (int i = 1; i < s.N; ++i)
        for (double z : {0.0, 0.01, 0.025, 0.04, 0.05})
            CHECK(std::abs(pricer.forward_variance(static_cast<double>(i) / s.N, 0.0, z) - h2.eval(z)) <=
                  1e-12 * std::max(1e-3, h2.eval(z)));
    const auto c = constant_variance(5, q("0.09"));
    for (double theta : {0.2, 0.6})
        for (double x : {0.0, 0.3, 4.0}) CHECK_THAT(implied_forward_variance(c, theta, x, 0.5), WithinRel(0.09, 1e-10));
}

TEST_CASE("Black-Scholes degeneracy across the grid", "[vol][property]") {
    const Rational sigma2 = q("0.0625");
    const auto c = constant_variance(20, sigma2);
    PowerPricer pricer(c);
    for (int i = 1; i < c.N; ++i) {
        const double theta = static_cast<double>(i) / c.N;
        for (double t : {0.1, 1.0, 3.0})
            for (double s : {0.5, 1.0, 3.0}) {
                const double bs = std::pow(s, theta) * std::exp(-theta * (1 - theta) * 0.0625 * t / 2);
                CHECK_THAT(pricer.price(theta, t, s, 0.3), WithinRel(bs, 1e-12));
            }
    }
}

TEST_CASE("coefficient ODE and generator identity", "[vol][property]") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> ux(0.0, 3.0), u(0.0, 1.0);
    const std::vector<VolModelSpec> specs = {section43(), random_example(rng, true), random_example(rng, false)};
    for (const auto& spec : specs) {
        PowerPricer pricer(spec);
        std::uniform_int_distribution<int> pick(1, spec.N - 1);
        for (int trial = 0; trial < 100; ++trial) {
            const int i = pick(rng);
            const auto& sol = pricer.solution(i);
            const double x = ux(rng) * (spec.label == "vol-example-7" && spec.N == 100 ? 1.0 : 0.1);
            const double z = u(rng) * spec.domain.upper();
            const Eigen::VectorXd K = sol.K(x), Kdot = sol.S * K;
            double rhs = 0.0;
            for (int j = 0; j <= sol.n_theta; ++j) rhs += K(j) * to_real(compute_Bi(spec, spec.theta(i), j)).eval(z);
            const double lhs = TermStructure::eval_coefficients(Kdot, z);
            const double level = TermStructure::eval_coefficients(K, z);
            CHECK(std::abs(lhs - rhs) <= 1e-8 * std::max({1.0, std::abs(level), std::abs(lhs)}));

            const double h = 1e-5 * std::max(1.0, x);
            auto at = [&](double v) { return sol.K(v); };
            const Eigen::VectorXd fd =
                x < 2.0 * h ? Eigen::VectorXd((-25.0 * at(x) + 48.0 * at(x + h) - 36.0 * at(x + 2 * h) + 16.0 * at(x + 3 * h) -
                                               3.0 * at(x + 4 * h)) / (12.0 * h))
                            : Eigen::VectorXd((at(x - 2 * h) - 8.0 * at(x - h) + 8.0 * at(x + h) - at(x + 2 * h)) / (12.0 * h));
            CHECK((fd - Kdot).norm() <= 1e-6 * std::max(1.0, Kdot.norm()));
        }
    }
}

TEST_CASE("surface is independent of the thread count", "[vol]") {
    const auto s = section43();
    std::vector<int> idx;
    for (int i = 1; i < s.N; i += 7) idx.push_back(i);
    const std::vector<double> ttms = {0.25, 1.0, 5.0};
    const auto one = PowerPricer(s).surface(idx, ttms, 1.0, 0.04, 1);
    const auto four = PowerPricer(s).surface(idx, ttms, 1.0, 0.04, 4);
    REQUIRE(one.size() == idx.size() * ttms.size());
    for (std::size_t k = 0; k < one.size(); ++k) {
        CHECK(one[k].price == four[k].price);
        CHECK(one[k].forward_variance_at_0 == four[k].forward_variance_at_0);
    }
    CHECK(one[0].theta == 0.01);
    CHECK(one[1].ttm == 1.0);
}

TEST_CASE("off-grid thetas are bracketed, not interpolated", "[vol]") {
    const auto s = section43();
    PowerPricer pricer(s);
    auto [lo, hi] = pricer.bracketing_prices(0.015, 1.0, 1.0, 0.04);
    CHECK(lo == pricer.price(0.01, 1.0, 1.0, 0.04));
    CHECK(hi == pricer.price(0.02, 1.0, 1.0, 0.04));
    CHECK(nearest_grid_indices(s, 0.5) == std::make_pair(50, 50));
    CHECK(nearest_grid_indices(s, 0.001) == std::make_pair(1, 1));
    CHECK_THROWS_AS(nearest_grid_indices(s, 1.0), ThetaError);
    CHECK(theta_index(s, 0.37) == 37);
}
