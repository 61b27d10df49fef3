#pragma once

#include "polyterm/errors.hpp"

#include <boost/multiprecision/cpp_int.hpp>

#include <cctype>
#include <string>
#include <string_view>

namespace polyterm {

using Rational = boost::multiprecision::cpp_rational;
using BigInt = boost::multiprecision::cpp_int;

inline double to_double(const Rational& r) { return r.convert_to<double>(); }
inline double to_double(double v) { return v; }

/// Parses "12", "-0.05", "1e-4", "2.5E+3" or "1/200" into an exact rational.
/// Binary floating point is never involved, so "0.1" is exactly 1/10.
inline Rational parse_decimal(std::string_view text) {
    auto fail = [&]() -> Rational {
        throw ParamError("not a decimal number: '" + std::string(text) + "'");
    };
    std::string s;
    for (char ch : text)
        if (!std::isspace(static_cast<unsigned char>(ch))) s.push_back(ch);
    if (s.empty()) return fail();

    if (auto slash = s.find('/'); slash != std::string::npos) {
        Rational num = parse_decimal(s.substr(0, slash));
        Rational den = parse_decimal(s.substr(slash + 1));
        if (den == 0) return fail();
        return num / den;
    }

    std::size_t pos = 0;
    bool negative = false;
    if (s[pos] == '+' || s[pos] == '-') negative = (s[pos++] == '-');

    BigInt mantissa = 0;
    long long frac_digits = 0;
    bool any_digit = false, seen_point = false;
    for (; pos < s.size(); ++pos) {
        char ch = s[pos];
        if (std::isdigit(static_cast<unsigned char>(ch))) {
            mantissa = mantissa * 10 + (ch - '0');
            any_digit = true;
            if (seen_point) ++frac_digits;
        } else if (ch == '.' && !seen_point) {
            seen_point = true;
        } else {
            break;
        }
    }
    if (!any_digit) return fail();

    long long exponent = 0;
    if (pos < s.size()) {
        if (s[pos] != 'e' && s[pos] != 'E') return fail();
        ++pos;
        bool exp_negative = false;
        if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) exp_negative = (s[pos++] == '-');
        if (pos >= s.size()) return fail();
        for (; pos < s.size(); ++pos) {
            if (!std::isdigit(static_cast<unsigned char>(s[pos]))) return fail();
            exponent = exponent * 10 + (s[pos] - '0');
            if (exponent > 100000) return fail();
        }
        if (exp_negative) exponent = -exponent;
    }

    long long shift = exponent - frac_digits;
    BigInt scale = boost::multiprecision::pow(BigInt(10), static_cast<unsigned>(shift < 0 ? -shift : shift));
    Rational value = shift < 0 ? Rational(mantissa, scale) : Rational(mantissa * scale);
    return negative ? Rational(-value) : value;
}

/// Exact decimal when the denominator has only factors 2 and 5, "p/q" otherwise.
/// parse_decimal(to_decimal_string(r)) == r for every rational r.
inline std::string to_decimal_string(const Rational& r) {
    BigInt num = boost::multiprecision::numerator(r);
    BigInt den = boost::multiprecision::denominator(r);
    BigInt rest = den;
    unsigned twos = 0, fives = 0;
    while (rest % 2 == 0) { rest /= 2; ++twos; }
    while (rest % 5 == 0) { rest /= 5; ++fives; }
    if (rest != 1) return num.str() + "/" + den.str();

    unsigned digits = twos > fives ? twos : fives;
    BigInt scaled = num * boost::multiprecision::pow(BigInt(10), digits) / den;
    bool negative = scaled < 0;
    if (negative) scaled = -scaled;
    std::string body = scaled.str();
    if (digits > 0) {
        if (body.size() <= digits) body.insert(0, digits - body.size() + 1, '0');
        body.insert(body.size() - digits, ".");
    }
    return negative ? "-" + body : body;
}

} // namespace polyterm
