#pragma once

#include "sgt/numeric.hpp"

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace sgt {

using Degree = std::uint32_t;

enum class WeightType { I, II, III };
const char* type_name(WeightType t);

struct Radius {
  enum class Kind { zero, finite, infinite };
  Kind kind = Kind::infinite;
  Rational value;  // only for Kind::finite

  static Radius zero() { return {Kind::zero, Rational(0)}; }
  static Radius infinite() { return {Kind::infinite, Rational(0)}; }
  static Radius finite(Rational r) { return {Kind::finite, std::move(r)}; }
};

// Sum_k k^j w_k t^k split as a truncated part plus a bounded tail.
struct SeriesValue {
  bool divergent = false;
  Real partial;
  Real tail;          // estimate of the remainder beyond `terms`
  double tail_error = 0.0;  // absolute bound on |tail - true remainder| plus rounding
  std::uint64_t terms = 0;  // partial sums run over k < terms

  Real value() const { return partial + tail; }
};

// Dominating shape of k^j w_k t^k beyond some index, for exact tail sampling.
struct TailEnvelope {
  enum class Kind { none, geometric, power };
  Kind kind = Kind::none;
  double ratio = 0.0;     // geometric: term_{k+1}/term_k <= ratio for k > start
  double exponent = 0.0;  // power: term_k proportional to k^{-exponent}
};

class WeightSequence {
 public:
  static WeightSequence uniform();
  static WeightSequence cayley();
  static WeightSequence powerlaw(const Rational& alpha);
  static WeightSequence factorial(const Rational& alpha);
  static WeightSequence finite(std::map<std::uint64_t, Rational> values, std::string tag);
  // Listed weights with a user-declared radius (zero or infinite).
  static WeightSequence listed(std::map<std::uint64_t, Rational> values, Radius radius, std::string tag);

  // Weight file: "radius=<value|inf|0>" header, then "k<TAB>p/q" or "k<TAB>decimal" lines.
  static WeightSequence parse(std::istream& in, const std::string& tag);
  static WeightSequence load(const std::string& path);

  const std::string& tag() const { return tag_; }
  const Radius& radius() const { return radius_; }
  // Largest k with w_k > 0 when the support is finite.
  std::optional<std::uint64_t> max_degree() const;
  // Largest k whose weight is known (listed sequences only).
  std::optional<std::uint64_t> known_limit() const;
  bool rational() const;

  bool positive(std::uint64_t k) const;
  std::optional<Rational> exact_weight(std::uint64_t k) const;
  Real weight(std::uint64_t k) const;
  double log_weight(std::uint64_t k) const;

  std::uint64_t span() const;

  SeriesValue series(unsigned j, const Real& t) const;
  std::optional<Rational> exact_series(unsigned j, const Rational& t) const;
  TailEnvelope envelope(unsigned j, double t, std::uint64_t start) const;

 private:
  enum class Family { listed, uniform, cayley, powerlaw, factorial };

  WeightSequence(Family f, Radius r, std::string tag) : family_(f), radius_(std::move(r)), tag_(std::move(tag)) {}
  void validate() const;
  double ratio_bound(std::uint64_t k) const;

  Family family_;
  Radius radius_;
  std::string tag_;
  Rational alpha_;
  std::map<std::uint64_t, Rational> table_;
};

std::uint64_t span(const WeightSequence& w);

// Named families: uniform, catalan, binary, motzkin, cayley, powerlaw, factorial.
struct FamilySpec {
  std::string name = "uniform";
  std::optional<std::string> alpha;
  std::optional<std::string> weights;  // comma-separated list for "finite"
  std::optional<std::string> file;
};
WeightSequence builtin(const FamilySpec& spec);

struct ClassifyOptions {
  double tolerance = 1e-12;
};

class OffspringLaw {
 public:
  const WeightSequence& weights() const { return w_; }
  WeightType type() const { return type_; }

  const Real& tau() const { return tau_; }
  const std::optional<Rational>& tau_exact() const { return tau_exact_; }
  const Real& phi_tau() const { return phi_tau_; }
  bool nu_infinite() const { return nu_infinite_; }
  const Real& nu() const { return nu_; }
  const Real& mu() const { return mu_; }
  const std::optional<Rational>& mu_exact() const { return mu_exact_; }
  bool sigma2_infinite() const { return sigma2_infinite_; }
  const Real& sigma2() const { return sigma2_; }
  const std::optional<Rational>& sigma2_exact() const { return sigma2_exact_; }
  double psi_residual() const { return psi_residual_; }

  // pmf is tabulated on k < truncation(); tail_mass() is the remainder.
  std::uint64_t truncation() const { return head_.size(); }
  const Real& tail_mass() const { return tail_mass_; }
  double tail_error() const { return tail_error_; }

  Real pmf(std::uint64_t k) const;
  std::optional<Rational> exact_pmf(std::uint64_t k) const;
  double log_pmf(std::uint64_t k) const;
  double mu_double() const { return mu_.convert_to<double>(); }

 private:
  friend OffspringLaw classify(const WeightSequence&, const ClassifyOptions&);
  explicit OffspringLaw(WeightSequence w) : w_(std::move(w)) {}

  WeightSequence w_;
  WeightType type_ = WeightType::I;
  Real tau_;
  std::optional<Rational> tau_exact_;
  Real phi_tau_;
  std::optional<Rational> phi_tau_exact_;
  double log_tau_ = 0.0;
  double log_phi_tau_ = 0.0;
  bool nu_infinite_ = false;
  Real nu_;
  Real mu_;
  std::optional<Rational> mu_exact_;
  bool sigma2_infinite_ = false;
  Real sigma2_;
  std::optional<Rational> sigma2_exact_;
  double psi_residual_ = 0.0;
  std::vector<Real> head_;
  Real tail_mass_;
  double tail_error_ = 0.0;
};

OffspringLaw classify(const WeightSequence& w, const ClassifyOptions& opt = {});

class SizeBiasedLaw {
 public:
  explicit SizeBiasedLaw(std::shared_ptr<const OffspringLaw> law);

  const OffspringLaw& law() const { return *law_; }
  // k * pi_k for k >= 1, zero at k = 0.
  Real finite_mass(std::uint64_t k) const;
  const Real& infinity_mass() const { return infinity_mass_; }

 private:
  std::shared_ptr<const OffspringLaw> law_;
  Real infinity_mass_;
};

SizeBiasedLaw size_biased(const OffspringLaw& law);

}  // namespace sgt
