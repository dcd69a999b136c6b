#include "sgt/numeric.hpp"

#include "sgt/errors.hpp"

#include <cmath>
#include <cstdlib>
#include <string>

namespace sgt {

namespace {

unsigned g_bits = 0;

unsigned digits10_for(unsigned bits) {
  return static_cast<unsigned>(std::ceil(bits * 0.30102999566398120)) + 1;
}

void ensure_init() {
  if (g_bits == 0) set_precision_bits(kDefaultPrecisionBits);
}

Integer parse_integer(std::string_view s) {
  if (s.empty()) throw Error(ErrorKind::validation, "empty number");
  std::size_t i = (s[0] == '-' || s[0] == '+') ? 1 : 0;
  if (i == s.size()) throw Error(ErrorKind::validation, "malformed number '" + std::string(s) + "'");
  for (std::size_t j = i; j < s.size(); ++j)
    if (s[j] < '0' || s[j] > '9')
      throw Error(ErrorKind::validation, "malformed number '" + std::string(s) + "'");
  Integer z(std::string(s.substr(s[0] == '+' ? 1 : 0)));
  return z;
}

}  // namespace

unsigned precision_bits() {
  ensure_init();
  return g_bits;
}

void set_precision_bits(unsigned bits) {
  if (bits < 24 || bits > 100000)
    throw Error(ErrorKind::validation, "precision must lie in [24, 100000] bits");
  Real::default_precision(digits10_for(bits));
  Real probe(0);
  g_bits = static_cast<unsigned>(mpfr_get_prec(probe.backend().data()));
}

unsigned precision_from_env(unsigned fallback) {
  const char* env = std::getenv("SGT_PRECISION");
  if (env == nullptr || *env == '\0') return fallback;
  char* end = nullptr;
  long v = std::strtol(env, &end, 10);
  if (*end != '\0' || v <= 0) throw Error(ErrorKind::validation, "SGT_PRECISION must be a positive integer");
  return static_cast<unsigned>(v);
}

PrecisionScope::PrecisionScope(unsigned bits) : saved_(precision_bits()) { set_precision_bits(bits); }
PrecisionScope::~PrecisionScope() { set_precision_bits(saved_); }

double unit_roundoff() { return std::ldexp(1.0, 1 - static_cast<int>(precision_bits())); }

std::string to_string(const Rational& q) {
  if (denominator(q) == 1) return numerator(q).str();
  return numerator(q).str() + "/" + denominator(q).str();
}

std::string to_string(const Real& x, int digits) {
  ensure_init();
  if (digits <= 0) digits = static_cast<int>(std::floor(precision_bits() * 0.30103)) - 2;
  return x.str(digits);
}

Rational parse_rational(std::string_view text) {
  auto slash = text.find('/');
  if (slash != std::string_view::npos) {
    Integer p = parse_integer(text.substr(0, slash));
    Integer q = parse_integer(text.substr(slash + 1));
    if (q == 0) throw Error(ErrorKind::validation, "zero denominator in '" + std::string(text) + "'");
    return Rational(p, q);
  }
  std::string_view mant = text;
  long exp10 = 0;
  auto e = text.find_first_of("eE");
  if (e != std::string_view::npos) {
    mant = text.substr(0, e);
    Integer ex = parse_integer(text.substr(e + 1));
    if (abs(ex) > 100000) throw Error(ErrorKind::validation, "exponent out of range");
    exp10 = ex.convert_to<long>();
  }
  std::string digits;
  auto dot = mant.find('.');
  if (dot != std::string_view::npos) {
    digits = std::string(mant.substr(0, dot)) + std::string(mant.substr(dot + 1));
    exp10 -= static_cast<long>(mant.size() - dot - 1);
  } else {
    digits = std::string(mant);
  }
  if (digits.empty() || digits == "-" || digits == "+")
    throw Error(ErrorKind::validation, "malformed number '" + std::string(text) + "'");
  Rational r(parse_integer(digits));
  Integer scale = boost::multiprecision::pow(Integer(10), static_cast<unsigned>(std::labs(exp10)));
  return exp10 >= 0 ? Rational(r * scale) : Rational(r / scale);
}

Rational pow(const Rational& q, unsigned e) {
  return Rational(boost::multiprecision::pow(numerator(q), e), boost::multiprecision::pow(denominator(q), e));
}

Real to_real(const Rational& q) {
  ensure_init();
  Real x;
  mpfr_set_q(x.backend().data(), q.backend().data(), MPFR_RNDN);
  return x;
}

long double to_long_double(const Real& x) { return mpfr_get_ld(x.backend().data(), MPFR_RNDN); }

Real from_long_double(long double x) {
  ensure_init();
  Real r;
  mpfr_set_ld(r.backend().data(), x, MPFR_RNDN);
  return r;
}

const Rational& ExactScalar::exact() const {
  if (!is_exact()) throw Error(ErrorKind::validation, "value is not exact");
  return std::get<Rational>(v_);
}

Real ExactScalar::value() const {
  if (is_exact()) return to_real(std::get<Rational>(v_));
  return std::get<Approx>(v_).value;
}

double ExactScalar::to_double() const {
  if (is_exact()) return std::get<Rational>(v_).convert_to<double>();
  return std::get<Approx>(v_).value.convert_to<double>();
}

double ExactScalar::error_bound() const { return is_exact() ? 0.0 : std::get<Approx>(v_).abs_error; }

std::string ExactScalar::to_string() const {
  if (is_exact()) return sgt::to_string(std::get<Rational>(v_));
  return sgt::to_string(std::get<Approx>(v_).value);
}

}  // namespace sgt
