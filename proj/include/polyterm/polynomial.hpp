#pragma once

#include "polyterm/rational.hpp"

#include <algorithm>
#include <climits>
#include <cstddef>
#include <initializer_list>
#include <ostream>
#include <vector>

namespace polyterm {

/// Dense univariate polynomial, coeffs()[i] multiplies z^i.
///
/// Trailing zero coefficients are stripped on every construction so the
/// degree is always well defined. The zero polynomial has no coefficients
/// and reports degree() == kZeroDegree.
///
/// T is either Rational (exact constraint checking) or double (pricing and
/// simulation).
template <class T>
class Polynomial {
public:
    static constexpr int kZeroDegree = INT_MIN;

    Polynomial() = default;
    Polynomial(std::initializer_list<T> coeffs) : c_(coeffs) { canonicalize(); }
    explicit Polynomial(std::vector<T> coeffs) : c_(std::move(coeffs)) { canonicalize(); }

    static Polynomial constant(T value) { return Polynomial(std::vector<T>{std::move(value)}); }

    /// coeff * z^power
    static Polynomial monomial(std::size_t power, T coeff = T(1)) {
        std::vector<T> c(power + 1, T(0));
        c[power] = std::move(coeff);
        return Polynomial(std::move(c));
    }

    const std::vector<T>& coeffs() const noexcept { return c_; }
    bool is_zero() const noexcept { return c_.empty(); }
    int degree() const noexcept { return c_.empty() ? kZeroDegree : static_cast<int>(c_.size()) - 1; }

    /// Coefficient of z^i; zero beyond the stored range.
    T coeff(std::size_t i) const { return i < c_.size() ? c_[i] : T(0); }

    template <class U>
    U eval(U z) const {
        U acc = U(0);
        for (auto it = c_.rbegin(); it != c_.rend(); ++it) acc = acc * z + static_cast<U>(*it);
        return acc;
    }

    Polynomial derivative(unsigned order = 1) const {
        if (order == 0) return *this;
        if (c_.size() <= order) return {};
        std::vector<T> d(c_.size() - order);
        for (std::size_t i = order; i < c_.size(); ++i) {
            T factor = T(1);
            for (std::size_t k = 0; k < order; ++k) factor *= T(static_cast<long long>(i - k));
            d[i - order] = c_[i] * factor;
        }
        return Polynomial(std::move(d));
    }

    /// Multiplies by z^k.
    Polynomial shifted(std::size_t k) const {
        if (is_zero()) return {};
        std::vector<T> d(c_.size() + k, T(0));
        std::copy(c_.begin(), c_.end(), d.begin() + static_cast<std::ptrdiff_t>(k));
        return Polynomial(std::move(d));
    }

    template <class U>
    Polynomial<U> cast() const {
        std::vector<U> d;
        d.reserve(c_.size());
        for (const auto& v : c_) d.push_back(static_cast<U>(v));
        return Polynomial<U>(std::move(d));
    }

    Polynomial& operator+=(const Polynomial& o) {
        if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), T(0));
        for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] += o.c_[i];
        canonicalize();
        return *this;
    }
    Polynomial& operator-=(const Polynomial& o) {
        if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), T(0));
        for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] -= o.c_[i];
        canonicalize();
        return *this;
    }
    Polynomial& operator*=(const T& s) {
        for (auto& v : c_) v *= s;
        canonicalize();
        return *this;
    }

    friend Polynomial operator+(Polynomial p, const Polynomial& q) { return p += q; }
    friend Polynomial operator-(Polynomial p, const Polynomial& q) { return p -= q; }
    friend Polynomial operator-(Polynomial p) { return p *= T(-1); }
    friend Polynomial operator*(Polynomial p, const T& s) { return p *= s; }
    friend Polynomial operator*(const T& s, Polynomial p) { return p *= s; }

    friend Polynomial operator*(const Polynomial& p, const Polynomial& q) {
        if (p.is_zero() || q.is_zero()) return {};
        std::vector<T> d(p.c_.size() + q.c_.size() - 1, T(0));
        for (std::size_t i = 0; i < p.c_.size(); ++i)
            for (std::size_t j = 0; j < q.c_.size(); ++j) d[i + j] += p.c_[i] * q.c_[j];
        return Polynomial(std::move(d));
    }

    friend bool operator==(const Polynomial& p, const Polynomial& q) { return p.c_ == q.c_; }
    friend bool operator!=(const Polynomial& p, const Polynomial& q) { return !(p == q); }

    friend std::ostream& operator<<(std::ostream& os, const Polynomial& p) {
        os << '[';
        for (std::size_t i = 0; i < p.c_.size(); ++i) os << (i ? ", " : "") << p.c_[i];
        return os << ']';
    }

private:
    void canonicalize() {
        while (!c_.empty() && c_.back() == T(0)) c_.pop_back();
    }

    std::vector<T> c_;
};

using RationalPoly = Polynomial<Rational>;
using RealPoly = Polynomial<double>;

template <class T, class U>
U eval(const Polynomial<T>& p, U z) { return p.template eval<U>(z); }

template <class T>
Polynomial<T> derivative(const Polynomial<T>& p, unsigned order) { return p.derivative(order); }

template <class T>
Polynomial<T> mul(const Polynomial<T>& p, const Polynomial<T>& q) { return p * q; }

/// Membership in F_k, the polynomials of degree at most k. The zero
/// polynomial belongs to every F_k with k >= 0 and to none with k < 0.
template <class T>
bool in_Fk(const Polynomial<T>& p, int k) {
    if (k < 0) return false;
    return p.is_zero() || p.degree() <= k;
}

inline RealPoly to_real(const RationalPoly& p) {
    std::vector<double> d;
    d.reserve(p.coeffs().size());
    for (const auto& v : p.coeffs()) d.push_back(to_double(v));
    return RealPoly(std::move(d));
}

} // namespace polyterm
