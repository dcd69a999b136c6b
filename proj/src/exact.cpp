#include "sgt/exact.hpp"

#include <algorithm>
#include <functional>
#include <set>

namespace sgt {

const char* mode_name(ScalarMode m) {
  switch (m) {
    case ScalarMode::rational: return "rational";
    case ScalarMode::real: return "real";
    case ScalarMode::extended: return "extended";
  }
  return "?";
}

ScalarMode parse_mode(const std::string& s) {
  if (s == "rational") return ScalarMode::rational;
  if (s == "real") return ScalarMode::real;
  if (s == "extended") return ScalarMode::extended;
  throw Error(ErrorKind::usage, "unknown scalar mode '" + s + "' (rational, real, extended)");
}

namespace detail {

ThresholdPlan plan_threshold(const FringeEvent& ev, std::size_t) {
  const SpineThreshold& th = ev.thresholds.front();
  const PointedTree& shape = ev.shape;
  if (shape.window) throw Error(ErrorKind::validation, "event shapes must be fully materialized");
  if (th.level < 1 || th.level > shape.spine.size())
    throw Error(ErrorKind::validation, "threshold level outside the spine of the shape");
  const DegreePair& pair = shape.spine[th.level - 1].pair;
  if (!pair.finite()) throw Error(ErrorKind::validation, "event shapes must have finite pairs");
  const std::uint64_t a0 = pair.left.value(), b0 = pair.right.value();
  const std::uint64_t d0 = a0 + b0 + 1;

  Flattened flat = flatten(shape);
  auto parents = flat.tree.parents();
  std::size_t o = flat.point.index;
  for (std::uint32_t i = 0; i < th.level; ++i) o = parents[o];

  ThresholdPlan plan;
  Degree other_max = 0;
  for (std::size_t i = 0; i < flat.tree.size(); ++i) {
    if (i == o) continue;
    plan.rest.push_back(flat.tree.degrees()[i]);
    other_max = std::max(other_max, flat.tree.degrees()[i]);
  }
  if (th.kind == SpineThreshold::Kind::at_least) {
    if (th.left_min < a0 || th.right_min < b0)
      throw Error(ErrorKind::validation, "threshold must cover the specified siblings");
    plan.r_min = th.left_min + th.right_min + 1;
    plan.base = plan.r_min;
  } else {
    plan.r_min = std::max<std::uint64_t>(th.omega + 1, d0);
    plan.base = d0;
  }
  if (plan.r_min <= other_max)
    throw Error(ErrorKind::unsupported_pattern,
                "threshold outdegree must exceed every other outdegree in the pattern");
  return plan;
}

}  // namespace detail

WindowPattern FringeEvent::pattern() const {
  WindowPattern exact = WindowPattern::exact(shape, false);
  WindowPattern out;
  for (auto& [addr, c] : exact.constraints) {
    const SpineThreshold* th = nullptr;
    for (const auto& t : thresholds)
      if (addr == Address::spine_vertex(t.level)) th = &t;
    if (!th) {
      out.add(addr, c);
      continue;
    }
    if (th->kind == SpineThreshold::Kind::at_least) {
      out.add(addr, Constraint::at_least(th->left_min, th->right_min));
    } else {
      out.add(addr, Constraint::at_least(c.pair.left.value(), c.pair.right.value()));
      out.add(addr, Constraint::above(th->omega));
    }
  }
  return out;
}

namespace {

template <class S>
std::vector<S> power(const std::vector<S>& p, std::uint64_t m, std::size_t len) {
  std::vector<S> acc(len, S(0));
  acc[0] = S(1);
  std::vector<S> base = p;
  base.resize(len, S(0));
  while (m) {
    if (m & 1) acc = convolve(acc, base, len);
    m >>= 1;
    if (m) base = convolve(base, base, len);
  }
  return acc;
}

}  // namespace

ExactScalar forest_count_prob(const OffspringLaw& law, std::uint64_t l, std::uint64_t m) {
  if (m == 0 || l > m) throw Error(ErrorKind::validation, "forest_count_prob needs 1 <= m and l <= m");
  if (l == 0) return ExactScalar(Rational(0));
  const std::size_t len = m - l + 1;
  bool exact = true;
  std::vector<Rational> q(len);
  for (std::size_t k = 0; k < len && exact; ++k) {
    auto v = law.exact_pmf(k);
    if (v) q[k] = *v;
    else exact = false;
  }
  if (exact) {
    Rational p = power(q, m, len)[len - 1];
    return ExactScalar(Rational(l, m) * p);
  }
  std::vector<Real> r(len);
  for (std::size_t k = 0; k < len; ++k) r[k] = law.pmf(k);
  Real p = power(r, m, len)[len - 1] * l / m;
  const double u = unit_roundoff();
  double rel = static_cast<double>(m) * (law.tail_error() + 8 * u) + 2.0 * static_cast<double>(m) * static_cast<double>(len + 1) * u;
  return ExactScalar(p, rel * p.convert_to<double>());
}

std::vector<WeightedTree> enumerate_trees(const WeightSequence& w, std::size_t n) {
  if (n == 0) throw Error(ErrorKind::validation, "n must be at least 1");
  if (n > 12) throw Error(ErrorKind::resource, "enumeration is limited to n <= 12");
  std::vector<Rational> wt(n);
  for (std::size_t k = 0; k < n; ++k) {
    auto q = w.exact_weight(k);
    if (!q) throw Error(ErrorKind::validation, "enumeration needs rational weights");
    wt[k] = *q;
  }
  std::vector<WeightedTree> out;
  std::vector<Degree> seq;
  std::function<void(std::size_t, const Rational&)> rec = [&](std::size_t open, const Rational& weight) {
    const std::size_t i = seq.size();
    if (i == n) {
      if (open == 0) out.push_back({PlaneTree::from_degrees(seq), weight});
      return;
    }
    const std::size_t after = n - i - 1;  // vertices still to place after this one
    for (std::size_t d = 0; d < n; ++d) {
      std::size_t next = open - 1 + d;
      if (next > after) break;
      if (next == 0 && after > 0) continue;
      if (wt[d] == 0) continue;
      seq.push_back(static_cast<Degree>(d));
      rec(next, weight * wt[d]);
      seq.pop_back();
    }
  };
  rec(1, Rational(1));
  return out;
}

SplitSampler SplitSampler::build(std::vector<long double> weights, std::size_t n, const TableOptions& opt) {
  if (n == 0) throw Error(ErrorKind::validation, "n must be at least 1");
  weights.resize(n, 0.0L);
  std::set<std::size_t> sizes;
  std::vector<std::size_t> todo{n};
  while (!todo.empty()) {
    std::size_t s = todo.back();
    todo.pop_back();
    if (!sizes.insert(s).second || s == 1) continue;
    todo.push_back(s / 2);
    todo.push_back(s - s / 2);
  }
  if (sizes.size() * n > opt.max_entries)
    throw Error(ErrorKind::resource, "split rows for n=" + std::to_string(n) + " exceed the entry cap");
  SplitSampler sp;
  sp.n_ = n;
  for (std::size_t s : sizes) {
    if (s == 1) {
      sp.rows_[1] = weights;
      continue;
    }
    auto row = convolve(sp.rows_.at(s / 2), sp.rows_.at(s - s / 2), n);
    for (long double x : row)
      if (!std::isfinite(x)) throw Error(ErrorKind::resource, "split rows leave the extended range");
    sp.rows_[s] = std::move(row);
  }
  if (!(sp.rows_.at(n)[n - 1] > 0))
    throw Error(ErrorKind::validation, "no tree with n=" + std::to_string(n) + " vertices has positive weight");
  return sp;
}

void SplitSampler::fill(std::vector<Degree>& out, std::size_t offset, std::size_t size, std::size_t sum,
                        Rng& rng) const {
  if (sum == 0) return;
  if (size == 1) {
    out[offset] = static_cast<Degree>(sum);
    return;
  }
  const std::size_t sl = size / 2, sr = size - sl;
  const auto& L = rows_.at(sl);
  const auto& R = rows_.at(sr);
  const long double target = static_cast<long double>(rng.uniform01()) * rows_.at(size)[sum];
  long double acc = 0.0L;
  std::size_t pick = sum + 1, last = 0;
  for (std::size_t x = 0; x <= sum; ++x) {
    long double p = L[x] * R[sum - x];
    if (p == 0.0L) continue;
    last = x;
    acc += p;
    if (acc > target) {
      pick = x;
      break;
    }
  }
  if (pick > sum) pick = last;
  fill(out, offset, sl, pick, rng);
  fill(out, offset + sl, sr, sum - pick, rng);
}

std::vector<Degree> SplitSampler::sample(Rng& rng) const {
  std::vector<Degree> out(n_, 0);
  fill(out, 0, n_, n_ - 1, rng);
  return out;
}

std::vector<long double> tilted_weights(const OffspringLaw& law, std::size_t n) {
  std::vector<long double> out(n, 0.0L);
  const WeightSequence& w = law.weights();
  if (law.type() != WeightType::III) {
    for (std::size_t k = 0; k < n; ++k) out[k] = w.positive(k) ? to_long_double(law.pmf(k)) : 0.0L;
    return out;
  }
  double log_t = 0.0;
  bool any = false;
  for (std::size_t k = 1; k < n; ++k) {
    if (!w.positive(k)) continue;
    double c = -w.log_weight(k) / static_cast<double>(k);
    log_t = any ? std::min(log_t, c) : c;
    any = true;
  }
  Real t = exp(Real(log_t));
  Real tk = 1;
  for (std::size_t k = 0; k < n; ++k) {
    if (w.positive(k)) out[k] = to_long_double(w.weight(k) * tk);
    tk *= t;
  }
  return out;
}

ExactEngine::ExactEngine(const WeightSequence& w, std::size_t n, ScalarMode mode, const TableOptions& opt)
    : mode_(mode), table_(PartitionTable<long double>()) {
  switch (mode) {
    case ScalarMode::rational:
      if (n > opt.rational_max_n)
        throw Error(ErrorKind::resource, "rational mode is capped at n=" + std::to_string(opt.rational_max_n) +
                                             "; use real mode");
      table_ = PartitionTable<Rational>::build(w, n, opt);
      break;
    case ScalarMode::real: table_ = PartitionTable<Real>::build(w, n, opt); break;
    case ScalarMode::extended: table_ = PartitionTable<long double>::build(w, n, opt); break;
  }
}

std::size_t ExactEngine::n() const {
  return std::visit([](const auto& t) { return t.n(); }, table_);
}

ExactScalar ExactEngine::total_tree_weight() const {
  return std::visit([](const auto& t) { return sgt::total_tree_weight(t); }, table_);
}

ExactScalar ExactEngine::prefix_prob(const std::vector<Degree>& d) const {
  return std::visit([&](const auto& t) { return sgt::prefix_prob(t, d); }, table_);
}

std::map<Degree, ExactScalar> ExactEngine::root_degree_dist() const {
  return std::visit([](const auto& t) { return sgt::root_degree_dist(t); }, table_);
}

std::map<Degree, ExactScalar> ExactEngine::dtilde_dist(std::uint64_t omega) const {
  return std::visit([&](const auto& t) { return sgt::dtilde_dist(t, omega); }, table_);
}

ExactScalar ExactEngine::fringe_event_prob(const FringeEvent& ev) const {
  return std::visit([&](const auto& t) { return sgt::fringe_event_prob(t, ev); }, table_);
}

std::vector<Degree> ExactEngine::sample_sequence(Rng& rng) const {
  return std::visit([&](const auto& t) { return sgt::sample_sequence(t, rng); }, table_);
}

}  // namespace sgt
