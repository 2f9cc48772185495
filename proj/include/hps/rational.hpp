#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace hps {

// GMP-backed integers and rationals: the value types are exact and the gcd
// normalization stays fast when denominators grow to thousands of digits.
using BigInt = boost::multiprecision::mpz_int;
using Rational = boost::multiprecision::mpq_rational;

/// Parse "p/q" or a plain integer "p" into an exact rational.
inline Rational parse_rational(const std::string& text) {
  const auto slash = text.find('/');
  try {
    if (slash == std::string::npos) {
      return Rational(BigInt(text));
    }
    BigInt num(text.substr(0, slash));
    BigInt den(text.substr(slash + 1));
    if (den == 0) throw std::invalid_argument("rational with zero denominator: " + text);
    return Rational(num, den);
  } catch (const std::runtime_error&) {
    throw std::invalid_argument("not a rational: '" + text + "'");
  }
}

/// Canonical "p/q" in lowest terms, denominator always present and positive.
inline std::string format_rational(const Rational& r) {
  return numerator(r).str() + "/" + denominator(r).str();
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// floor(r) as a machine integer.
inline long long floor_to_ll(const Rational& r) {
  BigInt num = numerator(r), den = denominator(r);
  BigInt q = num / den;  // truncation toward zero
  if (num < 0 && q * den != num) --q;
  return q.convert_to<long long>();
}

namespace detail {
inline double log_bigint(const BigInt& x) {
  if (x <= 0) throw std::invalid_argument("log of nonpositive integer");
  const unsigned bits = msb(x);
  if (bits <= 52) return std::log(x.convert_to<double>());
  const BigInt top = x >> (bits - 52);
  return std::log(top.convert_to<double>()) +
         static_cast<double>(bits - 52) * 0.69314718055994530942;
}
}  // namespace detail

/// Natural log of a positive rational. Stays accurate when the value is far
/// outside double range (e.g. 3^-10000).
inline double log_rational(const Rational& r) {
  if (r <= 0) throw std::invalid_argument("log of nonpositive rational");
  return detail::log_bigint(numerator(r)) - detail::log_bigint(denominator(r));
}

}  // namespace hps
