#pragma once

#include <boost/multiprecision/gmp.hpp>
#include <boost/multiprecision/mpfr.hpp>

#include <string>
#include <string_view>
#include <variant>

namespace sgt {

using Integer = boost::multiprecision::mpz_int;
using Rational = boost::multiprecision::mpq_rational;
using Real = boost::multiprecision::mpfr_float;

inline constexpr unsigned kDefaultPrecisionBits = 128;

// Working mantissa precision for Real values created on this thread.
unsigned precision_bits();
void set_precision_bits(unsigned bits);

// Reads SGT_PRECISION; returns fallback when unset.
unsigned precision_from_env(unsigned fallback = kDefaultPrecisionBits);

class PrecisionScope {
 public:
  explicit PrecisionScope(unsigned bits);
  ~PrecisionScope();
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  unsigned saved_;
};

// 2^(1-p) for the current precision p.
double unit_roundoff();

std::string to_string(const Rational& q);
std::string to_string(const Real& x, int digits = 0);
Rational parse_rational(std::string_view text);

Rational pow(const Rational& q, unsigned e);

Real to_real(const Rational& q);
long double to_long_double(const Real& x);
Real from_long_double(long double x);

// Non-negative quantity produced by the exact engine: either an exact
// rational, or a real together with an absolute error bound.
class ExactScalar {
 public:
  ExactScalar() : v_(Rational(0)) {}
  ExactScalar(Rational q) : v_(std::move(q)) {}
  ExactScalar(Real value, double abs_error)
      : v_(Approx{std::move(value), abs_error}) {}

  bool is_exact() const { return std::holds_alternative<Rational>(v_); }
  const Rational& exact() const;
  Real value() const;
  double to_double() const;
  double error_bound() const;

  // "p/q" (or "p") when exact, decimal digits otherwise.
  std::string to_string() const;

 private:
  struct Approx {
    Real value;
    double abs_error;
  };
  std::variant<Rational, Approx> v_;
};

}  // namespace sgt
