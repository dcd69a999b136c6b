#include "sgt/weights.hpp"

#include "sgt/errors.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <sstream>

namespace sgt {

namespace {

using boost::multiprecision::pow;
using sgt::pow;

Integer factorial_int(std::uint64_t k) {
  Integer z;
  mpz_fac_ui(z.backend().data(), static_cast<unsigned long>(k));
  return z;
}

bool is_integer(const Rational& q) { return denominator(q) == 1; }

Real real_pow_int(const Real& t, std::uint64_t k) {
  Real r;
  mpfr_pow_ui(r.backend().data(), t.backend().data(), static_cast<unsigned long>(k), MPFR_RNDN);
  return r;
}

double series_tolerance() { return std::min(1e-14, 16.0 * unit_roundoff()); }

// Bernoulli numbers B_2, B_4, ..., B_22.
const std::pair<long, long> kBernoulli[] = {{1, 6},     {-1, 30},      {1, 42},      {-1, 30},
                                            {5, 66},    {-691, 2730},  {7, 6},       {-3617, 510},
                                            {43867, 798}, {-174611, 330}, {854513, 138}};

// Sum_{k >= a} k^{-s} for s > 1 by Euler-Maclaurin, with a remainder bound.
std::pair<Real, double> zeta_tail(const Real& s, std::uint64_t a) {
  const int p = 10;
  Real ar(a);
  Real total = pow(ar, 1 - s) / (s - 1) + pow(ar, -s) / 2;
  Real rising = s;  // (s)_{2i-1}
  Real fact = 2;    // (2i)!
  Real next;
  for (int i = 1; i <= p + 1; ++i) {
    Real b = Real(kBernoulli[i - 1].first) / kBernoulli[i - 1].second;
    Real term = b / fact * rising * pow(ar, -s - (2 * i - 1));
    if (i <= p) {
      total += term;
    } else {
      next = abs(term);
    }
    rising *= (s + 2 * i - 1) * (s + 2 * i);
    fact *= (2 * i + 1) * (2 * i + 2);
  }
  double err = 2.0 * next.convert_to<double>() + 8.0 * unit_roundoff() * total.convert_to<double>();
  return {total, err};
}

}  // namespace

const char* type_name(WeightType t) {
  switch (t) {
    case WeightType::I: return "I";
    case WeightType::II: return "II";
    case WeightType::III: return "III";
  }
  return "?";
}

WeightSequence WeightSequence::uniform() {
  WeightSequence w(Family::uniform, Radius::finite(Rational(1)), "uniform");
  return w;
}

WeightSequence WeightSequence::cayley() { return WeightSequence(Family::cayley, Radius::infinite(), "cayley"); }

WeightSequence WeightSequence::powerlaw(const Rational& alpha) {
  WeightSequence w(Family::powerlaw, Radius::finite(Rational(1)), "powerlaw(alpha=" + to_string(alpha) + ")");
  w.alpha_ = alpha;
  w.validate();
  return w;
}

WeightSequence WeightSequence::factorial(const Rational& alpha) {
  WeightSequence w(Family::factorial, Radius::zero(), "factorial(alpha=" + to_string(alpha) + ")");
  w.alpha_ = alpha;
  w.validate();
  return w;
}

WeightSequence WeightSequence::finite(std::map<std::uint64_t, Rational> values, std::string tag) {
  return listed(std::move(values), Radius::infinite(), std::move(tag));
}

WeightSequence WeightSequence::listed(std::map<std::uint64_t, Rational> values, Radius radius, std::string tag) {
  WeightSequence w(Family::listed, std::move(radius), std::move(tag));
  for (auto& [k, v] : values) {
    if (v < 0) throw Error(ErrorKind::validation, "negative weight at k=" + std::to_string(k));
    if (v != 0) w.table_.emplace(k, v);
  }
  if (w.table_.empty()) throw Error(ErrorKind::validation, "all weights are zero");
  w.validate();
  return w;
}

void WeightSequence::validate() const {
  if (family_ == Family::powerlaw || family_ == Family::factorial) {
    if (alpha_ <= 0) throw Error(ErrorKind::validation, "alpha must be positive");
    return;
  }
  if (family_ != Family::listed) return;
  if (!positive(0)) throw Error(ErrorKind::validation, "weight w_0 must be positive");
  bool big = false;
  for (auto& [k, v] : table_) big = big || (k >= 2 && v > 0);
  if (!big) throw Error(ErrorKind::validation, "some weight w_k with k >= 2 must be positive");
}

WeightSequence WeightSequence::parse(std::istream& in, const std::string& tag) {
  std::optional<Radius> radius;
  std::map<std::uint64_t, Rational> values;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    line = line.substr(first, line.find_last_not_of(" \t\r") - first + 1);
    if (line.rfind("radius=", 0) == 0) {
      std::string r = line.substr(7);
      if (r == "inf") radius = Radius::infinite();
      else {
        Rational q = parse_rational(r);
        if (q < 0) throw Error(ErrorKind::validation, "negative radius");
        radius = q == 0 ? Radius::zero() : Radius::finite(q);
      }
      continue;
    }
    std::istringstream fields(line);
    std::string ks, vs, extra;
    if (!(fields >> ks >> vs) || (fields >> extra))
      throw Error(ErrorKind::validation, "weight file line " + std::to_string(lineno) + ": expected 'k<TAB>value'");
    Rational k = parse_rational(ks);
    if (!is_integer(k) || k < 0)
      throw Error(ErrorKind::validation, "weight file line " + std::to_string(lineno) + ": bad index");
    auto idx = numerator(k).convert_to<std::uint64_t>();
    if (values.count(idx))
      throw Error(ErrorKind::validation, "weight file line " + std::to_string(lineno) + ": duplicate index");
    values[idx] = parse_rational(vs);
  }
  if (!radius) throw Error(ErrorKind::validation, "weight file lacks a radius=<value|inf|0> header");
  return listed(std::move(values), *radius, tag);
}

WeightSequence WeightSequence::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::validation, "cannot open weight file '" + path + "'");
  return parse(in, "file(" + path + ")");
}

std::optional<std::uint64_t> WeightSequence::max_degree() const {
  if (family_ != Family::listed || radius_.kind != Radius::Kind::infinite) return std::nullopt;
  return table_.rbegin()->first;
}

std::optional<std::uint64_t> WeightSequence::known_limit() const {
  if (family_ != Family::listed) return std::nullopt;
  return table_.rbegin()->first;
}

bool WeightSequence::rational() const {
  if (family_ == Family::powerlaw || family_ == Family::factorial) return is_integer(alpha_);
  return true;
}

bool WeightSequence::positive(std::uint64_t k) const {
  if (family_ != Family::listed) return true;
  if (radius_.kind != Radius::Kind::infinite && k > table_.rbegin()->first)
    throw Error(ErrorKind::validation, "weight file lists no value for k=" + std::to_string(k));
  return table_.count(k) > 0;
}

std::optional<Rational> WeightSequence::exact_weight(std::uint64_t k) const {
  switch (family_) {
    case Family::listed: {
      if (!positive(k)) return Rational(0);
      return table_.at(k);
    }
    case Family::uniform: return Rational(1);
    case Family::cayley: return Rational(Integer(1), factorial_int(k));
    case Family::powerlaw: {
      if (k <= 1) return Rational(1);
      if (!is_integer(alpha_)) return std::nullopt;
      return Rational(Integer(1), pow(Integer(k), numerator(alpha_).convert_to<unsigned>()));
    }
    case Family::factorial: {
      if (k <= 1) return Rational(1);
      if (!is_integer(alpha_)) return std::nullopt;
      return Rational(pow(factorial_int(k), numerator(alpha_).convert_to<unsigned>()));
    }
  }
  return std::nullopt;
}

Real WeightSequence::weight(std::uint64_t k) const {
  if (auto q = exact_weight(k)) return to_real(*q);
  Real a = to_real(alpha_);
  if (family_ == Family::powerlaw) return pow(Real(k), -a);
  Real f = to_real(Rational(factorial_int(k)));
  return exp(a * log(f));
}

double WeightSequence::log_weight(std::uint64_t k) const {
  const double a = alpha_.convert_to<double>();
  switch (family_) {
    case Family::listed: {
      if (!positive(k)) return -std::numeric_limits<double>::infinity();
      return log(to_real(table_.at(k))).convert_to<double>();
    }
    case Family::uniform: return 0.0;
    case Family::cayley: return -std::lgamma(static_cast<double>(k) + 1.0);
    case Family::powerlaw: return k == 0 ? 0.0 : -a * std::log(static_cast<double>(k));
    case Family::factorial: return a * std::lgamma(static_cast<double>(k) + 1.0);
  }
  return 0.0;
}

std::uint64_t WeightSequence::span() const {
  if (family_ != Family::listed) return 1;
  std::uint64_t g = 0;
  for (auto& [k, v] : table_) g = std::gcd(g, k);
  return g == 0 ? 1 : g;
}

std::uint64_t span(const WeightSequence& w) { return w.span(); }

double WeightSequence::ratio_bound(std::uint64_t k) const {
  switch (family_) {
    case Family::uniform: return 1.0;
    case Family::powerlaw: return 1.0;
    case Family::cayley: return 1.0 / (static_cast<double>(k) + 1.0);
    default: return std::numeric_limits<double>::infinity();
  }
}

SeriesValue WeightSequence::series(unsigned j, const Real& t) const {
  SeriesValue out;
  out.partial = 0;
  out.tail = 0;
  if (t < 0) throw Error(ErrorKind::validation, "series argument must be non-negative");
  if (t == 0) {
    out.partial = j == 0 ? weight(0) : Real(0);
    out.terms = 1;
    return out;
  }
  const double u = unit_roundoff();
  if (family_ == Family::listed) {
    if (radius_.kind == Radius::Kind::zero) {
      out.divergent = true;
      return out;
    }
    if (radius_.kind == Radius::Kind::finite)
      throw Error(ErrorKind::precision,
                  "listed weights with a finite radius: the tail beyond k=" +
                      std::to_string(table_.rbegin()->first) + " cannot be bounded");
    for (auto& [k, v] : table_) out.partial += pow(Real(k), j) * to_real(v) * real_pow_int(t, k);
    out.terms = table_.rbegin()->first + 1;
    out.tail_error = 4.0 * u * static_cast<double>(out.terms) * out.partial.convert_to<double>();
    return out;
  }
  if (radius_.kind == Radius::Kind::zero) {
    out.divergent = true;
    return out;
  }
  if (radius_.kind == Radius::Kind::finite) {
    Real rho = to_real(radius_.value);
    if (t > rho) {
      out.divergent = true;
      return out;
    }
    if (t == rho) {
      if (family_ != Family::powerlaw) {
        out.divergent = true;
        return out;
      }
      Real s = to_real(alpha_) - j;
      if (s <= 1) {
        out.divergent = true;
        return out;
      }
      const std::uint64_t N = 1000;
      for (std::uint64_t k = 0; k <= N; ++k) {
        if (k == 0) {
          if (j == 0) out.partial += 1;
          continue;
        }
        out.partial += pow(Real(k), -s);
      }
      auto [tail, err] = zeta_tail(s, N + 1);
      out.tail = tail;
      out.terms = N + 1;
      out.tail_error = err + 8.0 * u * static_cast<double>(N) * out.partial.convert_to<double>();
      return out;
    }
  }
  const double tol = series_tolerance();
  const double td = t.convert_to<double>() * (1 + 1e-15);
  Real tk = 1;
  for (std::uint64_t k = 0;; ++k) {
    Real term = (k == 0 ? Real(j == 0 ? 1 : 0) : pow(Real(k), j)) * weight(k) * tk;
    out.partial += term;
    if (k >= 1) {
      double r = std::pow(1.0 + 1.0 / static_cast<double>(k), j) * ratio_bound(k) * td;
      if (r < 1.0) {
        double bound = term.convert_to<double>() * r / (1.0 - r);
        if (bound <= tol * out.partial.convert_to<double>()) {
          out.tail = bound / 2;
          out.terms = k + 1;
          out.tail_error = bound / 2 + 4.0 * u * static_cast<double>(k + 1) * out.partial.convert_to<double>();
          return out;
        }
      }
    }
    if (k > 10000000)
      throw Error(ErrorKind::precision, "series tail bound not met within 10^7 terms");
    tk *= t;
  }
}

std::optional<Rational> WeightSequence::exact_series(unsigned j, const Rational& t) const {
  if (t < 0) return std::nullopt;
  if (t == 0) return j == 0 ? exact_weight(0) : std::optional<Rational>(Rational(0));
  if (family_ == Family::listed) {
    if (radius_.kind != Radius::Kind::infinite) return std::nullopt;
    Rational s = 0;
    for (auto& [k, v] : table_) s += pow(Rational(k), j) * v * pow(t, static_cast<unsigned>(k));
    return s;
  }
  if (family_ == Family::uniform && t < 1) {
    Rational one_minus = 1 - t;
    switch (j) {
      case 0: return 1 / one_minus;
      case 1: return t / (one_minus * one_minus);
      case 2: return t * (1 + t) / (one_minus * one_minus * one_minus);
      default: return std::nullopt;
    }
  }
  return std::nullopt;
}

TailEnvelope WeightSequence::envelope(unsigned j, double t, std::uint64_t start) const {
  TailEnvelope e;
  if (t <= 0.0 || family_ == Family::listed || family_ == Family::factorial) return e;
  if (family_ == Family::powerlaw && t >= 1.0) {
    e.kind = TailEnvelope::Kind::power;
    e.exponent = alpha_.convert_to<double>() - j;
    return e;
  }
  if (start == 0) start = 1;
  e.kind = TailEnvelope::Kind::geometric;
  e.ratio = std::pow(1.0 + 1.0 / static_cast<double>(start), j) * ratio_bound(start) * t * (1 + 1e-15);
  return e;
}

WeightSequence builtin(const FamilySpec& spec) {
  const std::string& name = spec.name;
  auto alpha = [&](const char* dflt) { return parse_rational(spec.alpha ? *spec.alpha : dflt); };
  if (name == "uniform" || name == "catalan") return WeightSequence::uniform();
  if (name == "binary") return WeightSequence::finite({{0, 1}, {2, 1}}, "binary");
  if (name == "motzkin") return WeightSequence::finite({{0, 1}, {1, 1}, {2, 1}}, "motzkin");
  if (name == "cayley") return WeightSequence::cayley();
  if (name == "powerlaw") return WeightSequence::powerlaw(alpha("3"));
  if (name == "factorial") return WeightSequence::factorial(alpha("1"));
  if (name == "finite") {
    if (!spec.weights) throw Error(ErrorKind::usage, "family 'finite' needs --weights w0,w1,...");
    std::map<std::uint64_t, Rational> values;
    std::stringstream ss(*spec.weights);
    std::string item;
    std::uint64_t k = 0;
    while (std::getline(ss, item, ',')) values[k++] = parse_rational(item);
    return WeightSequence::finite(std::move(values), "finite(" + *spec.weights + ")");
  }
  if (name == "file") {
    if (!spec.file) throw Error(ErrorKind::usage, "family 'file' needs --weights-file");
    return WeightSequence::load(*spec.file);
  }
  throw Error(ErrorKind::usage, "unknown family '" + name + "'");
}

namespace {

Real psi(const WeightSequence& w, const Real& t) {
  SeriesValue s0 = w.series(0, t);
  SeriesValue s1 = w.series(1, t);
  if (s0.divergent || s1.divergent) throw Error(ErrorKind::precision, "series diverges inside the radius");
  return s1.value() / s0.value();
}

// Best rational approximations of x with denominators up to max_den.
std::vector<Rational> convergents(const Real& x, long max_den) {
  std::vector<Rational> out;
  Integer h0 = 0, h1 = 1, k0 = 1, k1 = 0;
  Real r = x;
  for (int it = 0; it < 64; ++it) {
    Real fl = floor(r);
    Integer a(fl.convert_to<long long>());
    Integer h2 = a * h1 + h0, k2 = a * k1 + k0;
    if (k2 > max_den) break;
    out.emplace_back(h2, k2);
    h0 = h1; h1 = h2; k0 = k1; k1 = k2;
    Real frac = r - fl;
    if (frac == 0 || fl > 1e15) break;
    r = 1 / frac;
  }
  return out;
}

}  // namespace

OffspringLaw classify(const WeightSequence& w, const ClassifyOptions& opt) {
  OffspringLaw law(w);
  if (w.radius().kind == Radius::Kind::zero) {
    law.type_ = WeightType::III;
    law.tau_ = 0;
    law.tau_exact_ = Rational(0);
    law.phi_tau_ = w.weight(0);
    law.phi_tau_exact_ = w.exact_weight(0);
    law.nu_ = 0;
    law.mu_ = 0;
    law.mu_exact_ = Rational(0);
    law.sigma2_ = 0;
    law.sigma2_exact_ = Rational(0);
    law.head_ = {Real(1)};
    law.tail_mass_ = 0;
    law.log_tau_ = -std::numeric_limits<double>::infinity();
    return law;
  }

  // nu = lim psi(t) as t increases to the radius.
  std::optional<Real> rho;
  if (w.radius().kind == Radius::Kind::finite) rho = to_real(w.radius().value);
  if (!rho) {
    if (auto d = w.max_degree()) law.nu_ = Real(*d);
    else law.nu_infinite_ = true;
  } else {
    SeriesValue s0 = w.series(0, *rho);
    SeriesValue s1 = w.series(1, *rho);
    if (s0.divergent || s1.divergent) law.nu_infinite_ = true;
    else law.nu_ = s1.value() / s0.value();
  }

  Real tau;
  if (!law.nu_infinite_ && law.nu_ < 1) {
    law.type_ = WeightType::II;
    tau = *rho;
  } else {
    law.type_ = WeightType::I;
    if (!law.nu_infinite_ && law.nu_ == 1) {
      tau = *rho;
    } else {
      Real lo = 0, hi;
      if (rho) {
        hi = *rho;
      } else {
        hi = 1;
        while (psi(w, hi) <= 1) {
          lo = hi;
          hi *= 2;
        }
      }
      const Real tol = opt.tolerance;
      const Real fine = 8 * unit_roundoff() * hi;
      for (int it = 0; hi - lo > fine && it < 4096; ++it) {
        Real mid = (lo + hi) / 2;
        if (rho && mid == *rho) break;
        if (psi(w, mid) < 1) lo = mid;
        else hi = mid;
      }
      tau = (lo + hi) / 2;
      if (w.rational()) {
        for (const Rational& c : convergents(tau, 1000000)) {
          if (abs(to_real(c) - tau) > 2 * tol || c <= 0) continue;
          if (rho && to_real(c) >= *rho) continue;
          auto e0 = w.exact_series(0, c);
          auto e1 = w.exact_series(1, c);
          if (e0 && e1 && *e0 == *e1) {
            law.tau_exact_ = c;
            tau = to_real(c);
            break;
          }
        }
      }
    }
  }
  law.tau_ = tau;
  law.log_tau_ = log(tau).convert_to<double>();

  SeriesValue s0 = w.series(0, tau);
  SeriesValue s1 = w.series(1, tau);
  SeriesValue s2 = w.series(2, tau);
  if (s0.divergent || s1.divergent) throw Error(ErrorKind::precision, "generating function diverges at tau");
  law.phi_tau_ = s0.value();

  if (law.tau_exact_) {
    auto e0 = w.exact_series(0, *law.tau_exact_);
    auto e1 = w.exact_series(1, *law.tau_exact_);
    auto e2 = w.exact_series(2, *law.tau_exact_);
    if (e0 && e1 && e2) {
      law.phi_tau_exact_ = *e0;
      law.phi_tau_ = to_real(*e0);
      Rational m = *e1 / *e0;
      law.sigma2_exact_ = *e2 / *e0 - m * m;
    }
  }
  law.log_phi_tau_ = log(law.phi_tau_).convert_to<double>();

  Real mean = s1.value() / s0.value();
  law.psi_residual_ = law.type_ == WeightType::I ? abs(mean - 1).convert_to<double>() : 0.0;
  if (law.type_ == WeightType::I) {
    law.mu_ = 1;
    law.mu_exact_ = Rational(1);
  } else {
    law.mu_ = law.nu_;
  }
  if (law.sigma2_exact_) {
    law.sigma2_ = to_real(*law.sigma2_exact_);
  } else if (s2.divergent) {
    law.sigma2_infinite_ = true;
  } else {
    law.sigma2_ = s2.value() / s0.value() - mean * mean;
  }

  law.head_.reserve(s0.terms);
  for (std::uint64_t k = 0; k < s0.terms; ++k) law.head_.push_back(law.pmf(k));
  law.tail_mass_ = s0.tail / s0.value();
  law.tail_error_ = s0.tail_error / s0.value().convert_to<double>();
  return law;
}

Real OffspringLaw::pmf(std::uint64_t k) const {
  if (type_ == WeightType::III) return Real(k == 0 ? 1 : 0);
  if (k < head_.size()) return head_[k];
  if (auto q = exact_pmf(k)) return to_real(*q);
  if (!w_.positive(k)) return Real(0);
  return real_pow_int(tau_, k) * w_.weight(k) / phi_tau_;
}

std::optional<Rational> OffspringLaw::exact_pmf(std::uint64_t k) const {
  if (type_ == WeightType::III) return Rational(k == 0 ? 1 : 0);
  if (!tau_exact_ || !phi_tau_exact_) return std::nullopt;
  auto wk = w_.exact_weight(k);
  if (!wk) return std::nullopt;
  return pow(*tau_exact_, static_cast<unsigned>(k)) * *wk / *phi_tau_exact_;
}

double OffspringLaw::log_pmf(std::uint64_t k) const {
  const double ninf = -std::numeric_limits<double>::infinity();
  if (type_ == WeightType::III) return k == 0 ? 0.0 : ninf;
  if (!w_.positive(k)) return ninf;
  return w_.log_weight(k) + static_cast<double>(k) * log_tau_ - log_phi_tau_;
}

SizeBiasedLaw::SizeBiasedLaw(std::shared_ptr<const OffspringLaw> law) : law_(std::move(law)) {
  infinity_mass_ = 1 - law_->mu();
}

Real SizeBiasedLaw::finite_mass(std::uint64_t k) const { return Real(k) * law_->pmf(k); }

SizeBiasedLaw size_biased(const OffspringLaw& law) {
  return SizeBiasedLaw(std::make_shared<const OffspringLaw>(law));
}

}  // namespace sgt
