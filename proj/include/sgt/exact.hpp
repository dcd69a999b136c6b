#pragma once

#include "sgt/errors.hpp"
#include "sgt/numeric.hpp"
#include "sgt/plane_tree.hpp"
#include "sgt/pointed_tree.hpp"
#include "sgt/rng.hpp"
#include "sgt/weights.hpp"

#include <cfloat>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <variant>
#include <vector>

namespace sgt {

enum class ScalarMode { rational, real, extended };
const char* mode_name(ScalarMode m);
ScalarMode parse_mode(const std::string& s);

template <class S>
struct Scalar;

template <>
struct Scalar<Rational> {
  static double u() { return 0.0; }
  static Rational from_int(std::uint64_t x) { return Rational(x); }
  static Rational weight(const WeightSequence& w, std::uint64_t k, double& err) {
    auto q = w.exact_weight(k);
    if (!q) throw Error(ErrorKind::validation, "rational mode needs rational weights; use real mode");
    err = 0.0;
    return *q;
  }
  static bool finite(const Rational&) { return true; }
  static double to_double(const Rational& x) { return x.convert_to<double>(); }
  static ExactScalar finish(const Rational& v, double) { return ExactScalar(v); }
};

template <>
struct Scalar<Real> {
  static double u() { return unit_roundoff(); }
  static Real from_int(std::uint64_t x) { return Real(x); }
  static Real weight(const WeightSequence& w, std::uint64_t k, double& err) {
    if (!w.positive(k)) {
      err = 0.0;
      return Real(0);
    }
    err = u() * (4.0 + std::fabs(w.log_weight(k)));
    return w.weight(k);
  }
  static bool finite(const Real& x) { return boost::multiprecision::isfinite(x); }
  static double to_double(const Real& x) { return x.convert_to<double>(); }
  static ExactScalar finish(const Real& v, double rel) { return ExactScalar(v, rel * v.convert_to<double>()); }
};

template <>
struct Scalar<long double> {
  static double u() { return LDBL_EPSILON / 2; }
  static long double from_int(std::uint64_t x) { return static_cast<long double>(x); }
  static long double weight(const WeightSequence& w, std::uint64_t k, double& err) {
    if (!w.positive(k)) {
      err = 0.0;
      return 0.0L;
    }
    err = unit_roundoff() * (4.0 + std::fabs(w.log_weight(k))) + u();
    long double v = to_long_double(w.weight(k));
    if (!std::isfinite(v) || v == 0.0L)
      throw Error(ErrorKind::resource, "weight w_" + std::to_string(k) + " leaves the extended range; use real mode");
    return v;
  }
  static bool finite(long double x) { return std::isfinite(x); }
  static double to_double(long double x) { return static_cast<double>(x); }
  static ExactScalar finish(long double v, double rel) {
    return ExactScalar(from_long_double(v), rel * static_cast<double>(v));
  }
};

// Value with a first-order relative error bound; all operands are non-negative.
template <class S>
struct Tracked {
  S v;
  double e = 0.0;

  friend Tracked operator*(const Tracked& a, const Tracked& b) { return {a.v * b.v, a.e + b.e + Scalar<S>::u()}; }
  friend Tracked operator/(const Tracked& a, const Tracked& b) { return {a.v / b.v, a.e + b.e + Scalar<S>::u()}; }
  friend Tracked operator+(const Tracked& a, const Tracked& b) {
    return {a.v + b.v, std::max(a.e, b.e) + Scalar<S>::u()};
  }
  ExactScalar finish() const { return Scalar<S>::finish(v, e); }
};

struct TableOptions {
  std::size_t max_entries = 20000000;
  // largest n for an exact-rational engine
  std::size_t rational_max_n = 1024;
};

// Truncated convolution c[m] = sum_x a[x] b[m - x], m < len.
template <class S>
std::vector<S> convolve(const std::vector<S>& a, const std::vector<S>& b, std::size_t len) {
  std::vector<S> c(len, S(0));
  std::vector<std::size_t> nz;
  for (std::size_t x = 0; x < std::min(len, a.size()); ++x)
    if (a[x] != 0) nz.push_back(x);
  for (std::size_t m = 0; m < len; ++m) {
    S acc(0);
    for (std::size_t x : nz) {
      if (x > m) break;
      if (m - x < b.size()) acc += a[x] * b[m - x];
    }
    c[m] = acc;
  }
  return c;
}

// Z(m, j) = sum over (y_1..y_j) with sum m of prod w_{y_i}, for m <= n-1, j <= n.
template <class S>
class PartitionTable {
 public:
  static PartitionTable build(const WeightSequence& w, std::size_t n, const TableOptions& opt = {}) {
    if (n == 0) throw Error(ErrorKind::validation, "n must be at least 1");
    guard(n, opt);
    std::vector<S> wt(n);
    double ew = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double e = 0.0;
      wt[k] = Scalar<S>::weight(w, k, e);
      ew = std::max(ew, e);
    }
    return from_weights(std::move(wt), n, ew, false, opt);
  }

  // Table over caller-supplied weights; a tilted table gives the same
  // conditioned sequence law but not the raw partition function.
  static PartitionTable from_weights(std::vector<S> wt, std::size_t n, double weight_error, bool tilted,
                                     const TableOptions& opt = {}) {
    guard(n, opt);
    PartitionTable t;
    t.n_ = n;
    t.tilted_ = tilted;
    t.w_ = std::move(wt);
    t.w_.resize(n, S(0));
    t.ew_ = weight_error;
    t.z_.assign((n + 1) * n, S(0));
    t.err_.assign(n + 1, 0.0);
    t.at(0, 0) = S(1);
    std::vector<std::size_t> nz;
    for (std::size_t k = 0; k < n; ++k)
      if (t.w_[k] != 0) nz.push_back(k);
    const double u = Scalar<S>::u();
    for (std::size_t j = 1; j <= n; ++j) {
      for (std::size_t m = 0; m < n; ++m) {
        S acc(0);
        for (std::size_t k : nz) {
          if (k > m) break;
          acc += t.w_[k] * t.at(m - k, j - 1);
        }
        if (!Scalar<S>::finite(acc))
          throw Error(ErrorKind::resource, "partition function leaves the extended range; use real mode");
        t.at(m, j) = std::move(acc);
      }
      t.err_[j] = t.err_[j - 1] + t.ew_ + u * static_cast<double>(nz.size() + 1);
    }
    return t;
  }

  std::size_t n() const { return n_; }
  bool tilted() const { return tilted_; }
  const S& z(std::size_t m, std::size_t j) const { return z_[j * n_ + m]; }
  const S& weight(std::size_t k) const { return w_[k]; }
  double rel_error(std::size_t j) const { return err_[j]; }
  double weight_error() const { return ew_; }
  bool has_column(std::size_t j) const { return j <= n_; }

 private:
  static void guard(std::size_t n, const TableOptions& opt) {
    if ((n + 1) * n > opt.max_entries)
      throw Error(ErrorKind::resource, "partition table for n=" + std::to_string(n) + " exceeds the cap of " +
                                           std::to_string(opt.max_entries) + " entries");
  }
  S& at(std::size_t m, std::size_t j) { return z_[j * n_ + m]; }

  std::size_t n_ = 0;
  bool tilted_ = false;
  std::vector<S> w_;
  std::vector<S> z_;
  std::vector<double> err_;
  double ew_ = 0.0;
};

// Selected columns of the partition function, each computed by binary
// powering of the weight polynomial; O(n^2 log n) per column.
template <class S>
class PartitionColumns {
 public:
  static PartitionColumns build(const WeightSequence& w, std::size_t n, std::vector<std::size_t> columns) {
    std::vector<S> wt(n);
    double ew = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      double e = 0.0;
      wt[k] = Scalar<S>::weight(w, k, e);
      ew = std::max(ew, e);
    }
    return from_weights(std::move(wt), n, ew, std::move(columns));
  }

  static PartitionColumns from_weights(std::vector<S> wt, std::size_t n, double weight_error,
                                       std::vector<std::size_t> columns) {
    PartitionColumns pc;
    pc.n_ = n;
    wt.resize(n, S(0));
    pc.w_ = wt;
    pc.ew_ = weight_error;
    columns.push_back(n);
    const double u = Scalar<S>::u();
    std::vector<std::vector<S>> pow2{wt};
    std::vector<double> pow2e{weight_error};
    for (std::size_t j : columns) {
      if (pc.cols_.count(j)) continue;
      if (j > n) throw Error(ErrorKind::validation, "column beyond n");
      if (j == n && pc.cols_.count(n - 1)) {
        const auto& prev = pc.cols_.at(n - 1);
        std::vector<S> col(n, S(0));
        S acc(0);
        for (std::size_t k = 0; k < n; ++k)
          if (wt[k] != 0) acc += wt[k] * prev[n - 1 - k];
        col[n - 1] = acc;
        pc.cols_[n] = std::move(col);
        pc.err_[n] = pc.err_[n - 1] + weight_error + u * static_cast<double>(n + 1);
        continue;
      }
      std::vector<S> acc(n, S(0));
      acc[0] = S(1);
      double e = 0.0;
      bool first = true;
      for (std::size_t bit = 0; (std::size_t(1) << bit) <= j; ++bit) {
        while (pow2.size() <= bit) {
          pow2.push_back(convolve(pow2.back(), pow2.back(), n));
          pow2e.push_back(2 * pow2e.back() + u * static_cast<double>(n + 1));
        }
        if (j & (std::size_t(1) << bit)) {
          if (first) {
            acc = pow2[bit];
            e = pow2e[bit];
            first = false;
          } else {
            acc = convolve(acc, pow2[bit], n);
            e += pow2e[bit] + u * static_cast<double>(n + 1);
          }
        }
      }
      for (const S& x : acc)
        if (!Scalar<S>::finite(x)) throw Error(ErrorKind::resource, "partition function leaves the extended range");
      pc.cols_[j] = std::move(acc);
      pc.err_[j] = e;
    }
    return pc;
  }

  std::size_t n() const { return n_; }
  bool tilted() const { return false; }
  bool has_column(std::size_t j) const { return cols_.count(j) > 0; }
  const S& z(std::size_t m, std::size_t j) const {
    auto it = cols_.find(j);
    if (it == cols_.end()) throw Error(ErrorKind::validation, "partition column " + std::to_string(j) + " not built");
    return it->second[m];
  }
  const S& weight(std::size_t k) const { return w_[k]; }
  double rel_error(std::size_t j) const { return err_.at(j); }
  double weight_error() const { return ew_; }

 private:
  std::size_t n_ = 0;
  std::vector<S> w_;
  std::map<std::size_t, std::vector<S>> cols_;
  std::map<std::size_t, double> err_;
  double ew_ = 0.0;
};

namespace detail {

template <class Src>
using ScalarOf = std::decay_t<decltype(std::declval<const Src&>().weight(0))>;

template <class Src>
Tracked<ScalarOf<Src>> zt(const Src& t, std::size_t m, std::size_t j) {
  return {t.z(m, j), t.rel_error(j)};
}

template <class Src>
Tracked<ScalarOf<Src>> normalizer(const Src& t) {
  auto z = zt(t, t.n() - 1, t.n());
  if (z.v == 0)
    throw Error(ErrorKind::validation, "no tree with n=" + std::to_string(t.n()) + " vertices has positive weight");
  return z;
}

}  // namespace detail

template <class Src>
ExactScalar total_tree_weight(const Src& t) {
  using S = detail::ScalarOf<Src>;
  if (t.tilted()) throw Error(ErrorKind::validation, "total weight is undefined on a tilted table");
  auto z = detail::zt(t, t.n() - 1, t.n());
  Tracked<S> nn{Scalar<S>::from_int(t.n()), 0.0};
  return (z / nn).finish();
}

// Pr{(Y_0..Y_l) = d} for the exchangeable balls-in-boxes sequence.
template <class Src>
Tracked<detail::ScalarOf<Src>> prefix_prob_tracked(const Src& t, const std::vector<Degree>& d) {
  using S = detail::ScalarOf<Src>;
  const std::size_t n = t.n();
  if (d.empty()) throw Error(ErrorKind::validation, "prefix must be non-empty");
  auto norm = detail::normalizer(t);
  if (d.size() > n) return {S(0), 0.0};
  std::uint64_t sum = 0;
  for (Degree x : d) sum += x;
  if (sum > n - 1) return {S(0), 0.0};
  Tracked<S> p{S(1), 0.0};
  for (Degree x : d) {
    if (t.weight(x) == 0) return {S(0), 0.0};
    p = p * Tracked<S>{t.weight(x), t.weight_error()};
  }
  auto z = detail::zt(t, n - 1 - sum, n - d.size());
  if (z.v == 0) return {S(0), 0.0};
  return p * z / norm;
}

template <class Src>
ExactScalar prefix_prob(const Src& t, const std::vector<Degree>& d) {
  return prefix_prob_tracked(t, d).finish();
}

template <class Src>
std::map<Degree, ExactScalar> root_degree_dist(const Src& t) {
  using S = detail::ScalarOf<Src>;
  const std::size_t n = t.n();
  std::map<Degree, ExactScalar> out;
  if (n == 1) {
    out.emplace(0, ExactScalar(Rational(1)));
    return out;
  }
  for (std::size_t k = 1; k < n; ++k) {
    auto p = prefix_prob_tracked(t, {static_cast<Degree>(k)});
    if (p.v == 0) continue;
    Tracked<S> f = Tracked<S>{Scalar<S>::from_int(n * k), 0.0} / Tracked<S>{Scalar<S>::from_int(n - 1), 0.0};
    out.emplace(static_cast<Degree>(k), (f * p).finish());
  }
  return out;
}

template <class Src>
std::map<Degree, ExactScalar> dtilde_dist(const Src& t, std::uint64_t omega) {
  using S = detail::ScalarOf<Src>;
  const std::size_t n = t.n();
  std::map<Degree, Tracked<S>> mass;
  Tracked<S> total{S(0), 0.0};
  for (std::size_t k = omega + 1; k < n; ++k) {
    auto p = prefix_prob_tracked(t, {static_cast<Degree>(k)});
    if (p.v == 0) continue;
    Tracked<S> f = Tracked<S>{Scalar<S>::from_int(k), 0.0} * p;
    mass.emplace(static_cast<Degree>(k), f);
    total = total + f;
  }
  if (n == 1 && omega == 0) throw Error(ErrorKind::validation, "zero-probability conditioning event");
  if (total.v == 0) throw Error(ErrorKind::validation, "zero-probability conditioning event: no root degree exceeds omega");
  std::map<Degree, ExactScalar> out;
  for (auto& [k, f] : mass) out.emplace(k, (f / total).finish());
  return out;
}

// Threshold on the pair of one spine vertex o = u_level.
struct SpineThreshold {
  enum class Kind { at_least, above };
  std::uint32_t level = 1;
  Kind kind = Kind::at_least;
  std::uint64_t left_min = 0;
  std::uint64_t right_min = 0;
  std::uint64_t omega = 0;
};

// Event on the pointed fringe at the top of `shape`: exact everywhere, except
// at threshold levels, where the pair of `shape` lists only the nearest
// specified siblings and the threshold bounds the true pair.
struct FringeEvent {
  PointedTree shape;
  std::vector<SpineThreshold> thresholds;

  WindowPattern pattern() const;
};

namespace detail {

struct ThresholdPlan {
  std::vector<Degree> rest;  // degrees of the flattened shape other than o
  std::uint64_t r_min = 0;
  std::uint64_t base = 0;    // multiplicity of r is r - base + 1
};

ThresholdPlan plan_threshold(const FringeEvent& ev, std::size_t n);

}  // namespace detail

template <class Src>
ExactScalar fringe_event_prob(const Src& t, const FringeEvent& ev) {
  using S = detail::ScalarOf<Src>;
  if (ev.thresholds.size() > 1)
    throw Error(ErrorKind::unsupported_pattern, "at most one threshold ancestor is supported");
  if (ev.thresholds.empty()) return prefix_prob(t, flatten(ev.shape).tree.degrees());
  const std::size_t n = t.n();
  auto plan = detail::plan_threshold(ev, n);
  auto norm = detail::normalizer(t);
  const std::size_t len = plan.rest.size() + 1;
  if (len > n) return ExactScalar(Rational(0));
  std::uint64_t sum = 0;
  Tracked<S> common{S(1), 0.0};
  for (Degree x : plan.rest) {
    sum += x;
    if (x >= n || t.weight(x) == 0) return Scalar<S>::finish(S(0), 0.0);
    common = common * Tracked<S>{t.weight(x), t.weight_error()};
  }
  Tracked<S> acc{S(0), 0.0};
  for (std::uint64_t r = plan.r_min; r + sum <= n - 1; ++r) {
    if (t.weight(r) == 0) continue;
    auto z = detail::zt(t, n - 1 - sum - r, n - len);
    if (z.v == 0) continue;
    Tracked<S> mult{Scalar<S>::from_int(r - plan.base + 1), 0.0};
    acc = acc + mult * Tracked<S>{t.weight(r), t.weight_error()} * z;
  }
  if (acc.v == 0) return Scalar<S>::finish(S(0), 0.0);
  return (common * acc / norm).finish();
}

// (l/m) Pr{xi_1 + ... + xi_m = m - l}: probability that l independent
// Galton-Watson trees have total size m.
ExactScalar forest_count_prob(const OffspringLaw& law, std::uint64_t l, std::uint64_t m);

struct WeightedTree {
  PlaneTree tree;
  Rational weight;
};
// Every n-vertex tree with positive weight, in lexicographic DFS order.
std::vector<WeightedTree> enumerate_trees(const WeightSequence& w, std::size_t n);

// Exact sequential draw of (Y_0..Y_{n-1}) from a full table.
template <class S>
std::vector<Degree> sample_sequence(const PartitionTable<S>& t, Rng& rng) {
  const std::size_t n = t.n();
  std::vector<Degree> y(n, 0);
  std::size_t m = n - 1;
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t slots = n - j;
    if (m == 0) break;
    const S& total = t.z(m, slots);
    double u = rng.uniform01();
    double acc = 0.0;
    std::size_t pick = m + 1;
    std::size_t last = 0;
    for (std::size_t k = 0; k <= m; ++k) {
      if (t.weight(k) == 0) continue;
      const S& rest = t.z(m - k, slots - 1);
      if (rest == 0) continue;
      double p = Scalar<S>::to_double(S(t.weight(k) * rest / total));
      last = k;
      acc += p;
      if (u < acc) {
        pick = k;
        break;
      }
    }
    if (pick > m) pick = last;
    y[j] = static_cast<Degree>(pick);
    m -= pick;
  }
  return y;
}

// Exact draw of (Y_0..Y_{n-1}) by recursive halving: the sum of the left half
// of a block is drawn from its conditional law, then both halves recurse.
// Rows are kept only for block sizes reachable by halving n.
class SplitSampler {
 public:
  static SplitSampler build(std::vector<long double> weights, std::size_t n, const TableOptions& opt = {});

  std::size_t n() const { return n_; }
  std::vector<Degree> sample(Rng& rng) const;
  const std::vector<long double>& row(std::size_t size) const { return rows_.at(size); }

 private:
  void fill(std::vector<Degree>& out, std::size_t offset, std::size_t size, std::size_t sum, Rng& rng) const;

  std::size_t n_ = 0;
  std::map<std::size_t, std::vector<long double>> rows_;
};

// Weights rescaled by w_k t^k / c so that values stay in extended range:
// the tilt tau for types I/II, and a pseudo-tilt for type III.
std::vector<long double> tilted_weights(const OffspringLaw& law, std::size_t n);

// Runtime-selected scalar mode over a full table.
class ExactEngine {
 public:
  ExactEngine(const WeightSequence& w, std::size_t n, ScalarMode mode, const TableOptions& opt = {});

  ScalarMode mode() const { return mode_; }
  std::size_t n() const;
  ExactScalar total_tree_weight() const;
  ExactScalar prefix_prob(const std::vector<Degree>& d) const;
  std::map<Degree, ExactScalar> root_degree_dist() const;
  std::map<Degree, ExactScalar> dtilde_dist(std::uint64_t omega) const;
  ExactScalar fringe_event_prob(const FringeEvent& ev) const;
  std::vector<Degree> sample_sequence(Rng& rng) const;

 private:
  ScalarMode mode_;
  std::variant<PartitionTable<Rational>, PartitionTable<Real>, PartitionTable<long double>> table_;
};

}  // namespace sgt
