#pragma once

// Model specifications for polynomial bond-price and power-option models,
// the parametric families, and the exact no-arbitrage coefficient checks.

#include "polyterm/errors.hpp"
#include "polyterm/polynomial.hpp"
#include "polyterm/rational.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace polyterm {

/// State space of the factor. A missing bound means the interval is open to
/// infinity on that side.
struct Interval {
    std::optional<Rational> lo;
    std::optional<Rational> hi;

    double lower() const { return lo ? to_double(*lo) : -std::numeric_limits<double>::infinity(); }
    double upper() const { return hi ? to_double(*hi) : std::numeric_limits<double>::infinity(); }
    bool bounded() const { return lo.has_value() && hi.has_value(); }
    bool contains(double z) const { return z >= lower() && z <= upper(); }
    double clamp(double z) const { return std::min(std::max(z, lower()), upper()); }
    double midpoint() const {
        if (bounded()) return 0.5 * (lower() + upper());
        if (lo) return lower() + 1.0;
        if (hi) return upper() - 1.0;
        return 0.0;
    }

    /// n points covering the interval, endpoints included where finite.
    /// Unbounded sides are reached through t/(1-t) and tan maps.
    std::vector<double> sample(std::size_t n) const {
        std::vector<double> pts;
        pts.reserve(n);
        const double pi = 3.14159265358979323846;
        for (std::size_t k = 0; k < n; ++k) {
            double t = n > 1 ? static_cast<double>(k) / static_cast<double>(n - 1) : 0.5;
            double z;
            if (bounded()) {
                z = lower() + t * (upper() - lower());
            } else if (lo) {
                t = std::min(t, 1.0 - 1e-9);
                z = lower() + t / (1.0 - t);
            } else if (hi) {
                t = std::min(t, 1.0 - 1e-9);
                z = upper() - t / (1.0 - t);
            } else {
                t = std::clamp(t, 1e-9, 1.0 - 1e-9);
                z = std::tan(pi * (t - 0.5));
            }
            pts.push_back(z);
        }
        return pts;
    }

    friend bool operator==(const Interval& a, const Interval& b) { return a.lo == b.lo && a.hi == b.hi; }
};

/// Bond model P_t(T) = sum_i g_i(T-t) Z_t^i with dZ = a dt + b dW, r = R(Z).
struct RateModelSpec {
    int n = 2;
    RationalPoly a;
    RationalPoly b2;
    RationalPoly R;
    Interval domain;
    std::string label;
    std::vector<std::string> warnings;
};

/// Model (M): one factor shared by the power options with theta = i/N,
/// i = 1..N-1. nmap[i-1] is the polynomial degree n(i/N).
struct VolModelSpec {
    int N = 2;
    std::vector<int> nmap;
    RationalPoly h2;  // |h(z)|^2
    RationalPoly b2;  // |b(z)|^2
    RationalPoly bh;  // b(z).h(z)
    RationalPoly a;
    Interval domain;
    std::string label;
    std::vector<std::string> warnings;

    int n_of(int i) const { return nmap.at(static_cast<std::size_t>(i - 1)); }
    Rational theta(int i) const { return Rational(i, N); }
};

using ModelSpec = std::variant<RateModelSpec, VolModelSpec>;

struct ConstraintReport {
    std::vector<std::pair<std::string, Rational>> residuals;
    bool satisfied = true;
    /// Vol models only: grid index i -> the three residuals at theta = i/N.
    std::map<int, std::array<Rational, 3>> per_theta;
};

namespace detail {

inline void require_degree(const RationalPoly& p, int max_degree, const char* name, const char* where) {
    if (!in_Fk(p, max_degree))
        throw DegreeError(std::string(name) + " has degree " + std::to_string(p.degree()) + ", " + where +
                          " requires degree <= " + std::to_string(max_degree));
}

inline Rational half_falling(long long m) { return Rational(m * (m - 1), 2); }

} // namespace detail

inline void check_rate_degrees(const RateModelSpec& spec) {
    if (spec.n < 1) throw ParamError("rate model degree n must be positive");
    detail::require_degree(spec.a, 3, "a", "a rate model");
    detail::require_degree(spec.b2, 4, "b2", "a rate model");
    detail::require_degree(spec.R, 2, "R", "a rate model");
}

inline void check_vol_degrees(const VolModelSpec& spec) {
    if (spec.N < 2) throw ParamError("vol model grid size N must be at least 2");
    if (spec.nmap.size() != static_cast<std::size_t>(spec.N - 1))
        throw ParamError("nmap must list n(i/N) for i = 1..N-1");
    for (int v : spec.nmap)
        if (v < 0) throw ParamError("nmap entries must be non-negative");
    detail::require_degree(spec.h2, 2, "h2", "a vol model");
    detail::require_degree(spec.b2, 4, "b2", "a vol model");
    detail::require_degree(spec.a, 3, "a", "a vol model");
    detail::require_degree(spec.bh, 3, "bh", "a vol model (d = a + theta*bh)");
}

/// Degree bounds plus the sampled invariants: b2 >= 0 and, for vol models,
/// bh^2 <= h2*b2 at 1024 points of the domain.
inline void validate(const RateModelSpec& spec) {
    check_rate_degrees(spec);
    auto b2 = to_real(spec.b2);
    for (double z : spec.domain.sample(1024)) {
        double v = b2.eval(z);
        if (v < -1e-12 * (1.0 + std::abs(z * z * z * z)))
            throw ParamError("b2 is negative on the domain at z = " + std::to_string(z));
    }
}

inline void validate(const VolModelSpec& spec) {
    check_vol_degrees(spec);
    auto h2 = to_real(spec.h2), b2 = to_real(spec.b2), bh = to_real(spec.bh);
    for (double z : spec.domain.sample(1024)) {
        double hv = h2.eval(z), bv = b2.eval(z), cv = bh.eval(z);
        double scale = 1e-12 * (1.0 + z * z * z * z);
        if (hv < -scale) throw ParamError("h2 is negative on the domain at z = " + std::to_string(z));
        if (bv < -scale) throw ParamError("b2 is negative on the domain at z = " + std::to_string(z));
        if (cv * cv > std::max(hv, 0.0) * std::max(bv, 0.0) * (1.0 + 1e-12) + scale * scale)
            throw ParamError("correlation bound bh^2 <= h2*b2 fails at z = " + std::to_string(z));
    }
}

inline void validate(const ModelSpec& spec) {
    std::visit([](const auto& s) { validate(s); }, spec);
}

/// A_i(z) = a (z^i)' + b2/2 (z^i)'' - R z^i, with arbitrary scalar type.
template <class T>
Polynomial<T> generator_image(const Polynomial<T>& a, const Polynomial<T>& b2, const Polynomial<T>& R, int i) {
    const auto ii = static_cast<std::size_t>(i);
    Polynomial<T> out = -(R.shifted(ii));
    if (i >= 1) out += a.shifted(ii - 1) * T(i);
    if (i >= 2) out += b2.shifted(ii - 2) * (T(static_cast<long long>(i) * (i - 1)) / T(2));
    return out;
}

inline RationalPoly compute_Ai(const RateModelSpec& spec, int i) {
    if (i < 0 || i > spec.n)
        throw IndexError("A_i requested for i = " + std::to_string(i) + " outside 0..n = " + std::to_string(spec.n));
    return generator_image(spec.a, spec.b2, spec.R, i);
}

/// d(z, theta) = a(z) + theta * bh(z)
inline RationalPoly vol_drift(const VolModelSpec& spec, const Rational& theta) { return spec.a + spec.bh * theta; }

/// B_i(z, theta) = theta(theta-1)/2 h2 z^i + d (z^i)' + b2/2 (z^i)''
inline RationalPoly compute_Bi(const VolModelSpec& spec, const Rational& theta, int i) {
    if (i < 0) throw IndexError("B_i requested for negative i");
    RationalPoly minus_killing = spec.h2 * Rational(-(theta * (theta - 1)) / 2);
    return generator_image(vol_drift(spec, theta), spec.b2, minus_killing, i);
}

inline ConstraintReport check_rate_constraints(const RateModelSpec& spec) {
    check_rate_degrees(spec);
    const long long n = spec.n;
    const auto& a = spec.a;
    const auto& b = spec.b2;
    const auto& R = spec.R;
    ConstraintReport rep;
    rep.residuals.emplace_back("n*a3 + n(n-1)/2*b4 - R2",
                               Rational(n) * a.coeff(3) + detail::half_falling(n) * b.coeff(4) - R.coeff(2));
    rep.residuals.emplace_back("(n-1)*a3 + (n-1)(n-2)/2*b4 - R2",
                               Rational(n - 1) * a.coeff(3) + detail::half_falling(n - 1) * b.coeff(4) - R.coeff(2));
    rep.residuals.emplace_back("n*a2 + n(n-1)/2*b3 - R1",
                               Rational(n) * a.coeff(2) + detail::half_falling(n) * b.coeff(3) - R.coeff(1));
    for (const auto& [name, value] : rep.residuals) rep.satisfied = rep.satisfied && value == 0;
    return rep;
}

/// The three residuals at theta = i/N. When n(theta) = 0 there is no
/// k_{n-1} and the middle equation is vacuous.
inline std::array<Rational, 3> vol_residuals(const VolModelSpec& spec, int i) {
    const long long n = spec.n_of(i);
    const Rational theta = spec.theta(i);
    const Rational killing = theta * (theta - 1) / 2;
    const RationalPoly d = vol_drift(spec, theta);
    std::array<Rational, 3> r;
    r[0] = Rational(n) * d.coeff(3) + detail::half_falling(n) * spec.b2.coeff(4) + killing * spec.h2.coeff(2);
    r[1] = n == 0 ? Rational(0)
                  : Rational(n - 1) * d.coeff(3) + detail::half_falling(n - 1) * spec.b2.coeff(4) +
                        killing * spec.h2.coeff(2);
    r[2] = Rational(n) * d.coeff(2) + detail::half_falling(n) * spec.b2.coeff(3) + killing * spec.h2.coeff(1);
    return r;
}

inline ConstraintReport check_vol_constraints(const VolModelSpec& spec) {
    check_vol_degrees(spec);
    ConstraintReport rep;
    static const char* names[3] = {"n*d3 + n(n-1)/2*b4 + theta(theta-1)/2*h2",
                                   "(n-1)*d3 + (n-1)(n-2)/2*b4 + theta(theta-1)/2*h2",
                                   "n*d2 + n(n-1)/2*b3 + theta(theta-1)/2*h1"};
    for (int i = 1; i < spec.N; ++i) {
        auto r = vol_residuals(spec, i);
        rep.per_theta[i] = r;
        std::string tag = " @ theta=" + std::to_string(i) + "/" + std::to_string(spec.N);
        for (int k = 0; k < 3; ++k) {
            rep.residuals.emplace_back(names[k] + tag, r[k]);
            rep.satisfied = rep.satisfied && r[k] == 0;
        }
    }
    return rep;
}

inline ConstraintReport check_constraints(const ModelSpec& spec) {
    return std::visit(
        [](const auto& s) -> ConstraintReport {
            if constexpr (std::is_same_v<std::decay_t<decltype(s)>, RateModelSpec>)
                return check_rate_constraints(s);
            else
                return check_vol_constraints(s);
        },
        spec);
}

// ---------------------------------------------------------------------------
// Parametric families

using FamilyParams = std::map<std::string, Rational>;

namespace detail {

inline Rational param(const FamilyParams& p, const std::string& name, const std::string& family) {
    auto it = p.find(name);
    if (it == p.end()) throw ParamError(family + ": missing parameter '" + name + "'");
    return it->second;
}

inline Rational param_or(const FamilyParams& p, const std::string& name, Rational fallback) {
    auto it = p.find(name);
    return it == p.end() ? fallback : it->second;
}

inline void require(bool ok, const std::string& family, const std::string& what) {
    if (!ok) throw ParamError(family + ": parameters must satisfy " + what);
}

inline int grid_size(const FamilyParams& p, const std::string& family) {
    Rational N = param(p, "N", family);
    require(boost::multiprecision::denominator(N) == 1 && N >= 2 && N <= 100000, family, "N integer in [2, 100000]");
    return static_cast<int>(boost::multiprecision::numerator(N));
}

inline Interval closed(Rational lo, Rational hi) { return Interval{std::move(lo), std::move(hi)}; }

} // namespace detail

inline const std::vector<std::string>& family_names() {
    static const std::vector<std::string> names = {"rate-family-1", "rate-family-2", "rate-family-3",
                                                   "rate-family-4", "vol-example-6", "vol-example-7"};
    return names;
}

/// Expands a named family into its polynomial specification.
///
///  rate-family-1  alpha, beta, k > 0       dZ = alpha Z(Z-k)dt + sqrt(beta Z(k-Z))dW, r = 2 alpha Z, Z in [0,k]
///  rate-family-2  alpha, beta > 0          dZ = alpha(beta-Z)dt + sqrt(Z^3)dW, r = Z, Z in [0,inf)
///  rate-family-3  alpha > 0, 0<beta<k<=l   dZ = alpha(beta-Z)dt + sqrt(Z(k-Z)(l-Z))dW, r = Z, Z in [0,k]
///  rate-family-4  alpha, k > 0             dZ = (Z-k)(Z+2k+alpha)(Z-2k-alpha)dt + sqrt(-Z^3(Z-2k))dW, r = Z^2
///  vol-example-6  N, beta > 0, 0<alpha1<gamma<alpha2, h0 >= 0 (default 0)
///                 |h|^2 = 2N^2 z + h0, a = (z-alpha1)(z-alpha2), |b|^2 = beta z(gamma-z), n(i/N) = i(N-i)
///  vol-example-7  N, c > 0, beta >= 0 (default 0), 0<alpha1<gamma<alpha2, h0 >= 0 (default 0)
///                 |h|^2 = cN^2 z + h0, a = (N-1)c/2 (z-alpha1)(z-alpha2), |b|^2 = c z(z+beta)(gamma-z),
///                 n(i/N) = min(i, N-i)
///
/// All vol examples have b.h = 0 and factor domain [0, gamma].
inline ModelSpec build_family(const std::string& name, const FamilyParams& p) {
    using detail::param;
    using detail::require;
    const RationalPoly z = RationalPoly::monomial(1);
    const RationalPoly one = RationalPoly::constant(1);

    if (name == "rate-family-1") {
        Rational alpha = param(p, "alpha", name), beta = param(p, "beta", name), k = param(p, "k", name);
        require(alpha > 0 && beta > 0 && k > 0, name, "alpha, beta, k > 0");
        RateModelSpec s;
        s.a = z * (z - one * k) * alpha;
        s.b2 = z * (one * k - z) * beta;
        s.R = z * Rational(2 * alpha);
        s.domain = detail::closed(0, k);
        s.label = name;
        s.warnings.push_back("factor may be absorbed at the boundary of [0,k] in finite time");
        return s;
    }
    if (name == "rate-family-2") {
        Rational alpha = param(p, "alpha", name), beta = param(p, "beta", name);
        require(alpha > 0 && beta > 0, name, "alpha, beta > 0");
        RateModelSpec s;
        s.a = (one * beta - z) * alpha;
        s.b2 = RationalPoly::monomial(3);
        s.R = z;
        s.domain = Interval{Rational(0), std::nullopt};
        s.label = name;
        return s;
    }
    if (name == "rate-family-3") {
        Rational alpha = param(p, "alpha", name), beta = param(p, "beta", name);
        Rational k = param(p, "k", name), l = param(p, "l", name);
        require(alpha > 0 && beta > 0 && beta < k && k <= l, name, "alpha > 0 and 0 < beta < k <= l");
        RateModelSpec s;
        s.a = (one * beta - z) * alpha;
        s.b2 = z * (one * k - z) * (one * l - z);
        s.R = z;
        s.domain = detail::closed(0, k);
        s.label = name;
        return s;
    }
    if (name == "rate-family-4") {
        Rational alpha = param(p, "alpha", name), k = param(p, "k", name);
        require(alpha > 0 && k > 0, name, "alpha, k > 0");
        Rational m = 2 * k + alpha;
        RateModelSpec s;
        s.a = (z - one * k) * (z + one * m) * (z - one * m);
        s.b2 = -(z * z * z * (z - one * Rational(2 * k)));
        s.R = z * z;
        s.domain = detail::closed(0, 2 * k);
        s.label = name;
        return s;
    }
    if (name == "vol-example-6" || name == "vol-example-7") {
        const bool six = name == "vol-example-6";
        int N = detail::grid_size(p, name);
        Rational a1 = param(p, "alpha1", name), a2 = param(p, "alpha2", name), gamma = param(p, "gamma", name);
        Rational h0 = detail::param_or(p, "h0", 0);
        require(a1 > 0 && a1 < gamma && gamma < a2, name, "0 < alpha1 < gamma < alpha2");
        require(h0 >= 0, name, "h0 >= 0");
        VolModelSpec s;
        s.N = N;
        s.domain = detail::closed(0, gamma);
        s.label = name;
        RationalPoly quad = (z - one * a1) * (z - one * a2);
        if (six) {
            Rational beta = param(p, "beta", name);
            require(beta > 0, name, "beta > 0");
            s.h2 = z * Rational(2 * N * N) + one * h0;
            s.b2 = z * (one * gamma - z) * beta;
            s.a = quad;
            for (int i = 1; i < N; ++i) s.nmap.push_back(i * (N - i));
        } else {
            Rational c = param(p, "c", name);
            Rational beta = detail::param_or(p, "beta", 0);
            require(c > 0 && beta >= 0, name, "c > 0 and beta >= 0");
            s.h2 = z * Rational(c * N * N) + one * h0;
            s.b2 = z * (z + one * beta) * (one * gamma - z) * c;
            s.a = quad * Rational(Rational(N - 1) * c / 2);
            for (int i = 1; i < N; ++i) s.nmap.push_back(std::min(i, N - i));
        }
        return s;
    }
    throw ParamError("unknown family '" + name + "'");
}

inline RateModelSpec build_rate_family(const std::string& name, const FamilyParams& p) {
    auto spec = build_family(name, p);
    if (!std::holds_alternative<RateModelSpec>(spec)) throw ParamError(name + " is not a rate family");
    return std::get<RateModelSpec>(std::move(spec));
}

inline VolModelSpec build_vol_family(const std::string& name, const FamilyParams& p) {
    auto spec = build_family(name, p);
    if (!std::holds_alternative<VolModelSpec>(spec)) throw ParamError(name + " is not a vol family");
    return std::get<VolModelSpec>(std::move(spec));
}

// ---------------------------------------------------------------------------
// Digest used in provenance lines and path metadata

namespace detail {

inline std::string canonical(const RationalPoly& p) {
    std::string s = "[";
    for (std::size_t i = 0; i < p.coeffs().size(); ++i) s += (i ? "," : "") + to_decimal_string(p.coeffs()[i]);
    return s + "]";
}

inline std::string canonical(const Interval& d) {
    return "[" + (d.lo ? to_decimal_string(*d.lo) : std::string("-inf")) + "," +
           (d.hi ? to_decimal_string(*d.hi) : std::string("inf")) + "]";
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

} // namespace detail

inline std::string canonical_form(const RateModelSpec& s) {
    return "rate;n=" + std::to_string(s.n) + ";a=" + detail::canonical(s.a) + ";b2=" + detail::canonical(s.b2) +
           ";R=" + detail::canonical(s.R) + ";domain=" + detail::canonical(s.domain);
}

inline std::string canonical_form(const VolModelSpec& s) {
    std::string nm;
    for (std::size_t i = 0; i < s.nmap.size(); ++i) nm += (i ? "," : "") + std::to_string(s.nmap[i]);
    return "vol;N=" + std::to_string(s.N) + ";nmap=[" + nm + "];h2=" + detail::canonical(s.h2) +
           ";b2=" + detail::canonical(s.b2) + ";bh=" + detail::canonical(s.bh) + ";a=" + detail::canonical(s.a) +
           ";domain=" + detail::canonical(s.domain);
}

inline std::uint64_t digest(const RateModelSpec& s) { return detail::fnv1a(canonical_form(s)); }
inline std::uint64_t digest(const VolModelSpec& s) { return detail::fnv1a(canonical_form(s)); }
inline std::uint64_t digest(const ModelSpec& s) {
    return std::visit([](const auto& v) { return digest(v); }, s);
}

} // namespace polyterm
