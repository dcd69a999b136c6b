#include "sgt/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

namespace sgt {

namespace {

constexpr std::uint64_t kHuge = UINT64_MAX - 1;

double log_term(const OffspringLaw& law, unsigned j, std::uint64_t k) {
  double lp = law.log_pmf(k);
  if (j == 1) lp += std::log(static_cast<double>(k));
  return lp;
}

}  // namespace

DiscreteSampler DiscreteSampler::build(const OffspringLaw& law, unsigned j) {
  DiscreteSampler s;
  s.law_ = std::make_shared<const OffspringLaw>(law);
  s.j_ = j;
  const std::uint64_t K = std::max<std::uint64_t>(law.truncation(), 1);
  Real head = 0;
  for (std::uint64_t k = j; k < K; ++k) {
    Real p = law.pmf(k) * (j ? Real(k) : Real(1));
    if (p == 0) continue;
    head += p;
    s.values_.push_back(k);
    s.cdf_.push_back(p.convert_to<double>());
  }
  Real tail = 0;
  if (law.type() != WeightType::III) {
    const WeightSequence& w = law.weights();
    bool finite = w.max_degree() && *w.max_degree() < K;
    if (!finite) {
      if (j == 0) {
        tail = law.tail_mass();
      } else {
        SeriesValue s1 = w.series(1, law.tau());
        tail = s1.value() / law.phi_tau() - head;
      }
    }
  }
  if (tail < 0) tail = 0;
  s.start_ = K;
  if (tail > 0) {
    s.env_ = law.weights().envelope(j, law.tau().convert_to<double>(), K);
    if (s.env_.kind == TailEnvelope::Kind::none)
      throw Error(ErrorKind::precision, "no tail envelope for sampling weights '" + law.weights().tag() + "'");
    if (s.env_.kind == TailEnvelope::Kind::power && s.env_.exponent <= 1.0)
      throw Error(ErrorKind::precision, "tail too heavy to sample");
  }
  s.head_mass_ = head.convert_to<double>();
  s.tail_mass_ = tail.convert_to<double>();
  s.inf_mass_ = j == 1 ? std::max(0.0, (1 - law.mu()).convert_to<double>()) : 0.0;
  double acc = 0.0;
  for (double& c : s.cdf_) {
    acc += c;
    c = acc;
  }
  s.cdf_.push_back(acc += s.tail_mass_);
  s.cdf_.push_back(acc += s.inf_mass_);
  return s;
}

DiscreteSampler DiscreteSampler::offspring(const OffspringLaw& law) { return build(law, 0); }

DiscreteSampler DiscreteSampler::size_biased(const OffspringLaw& law) { return build(law, 1); }

DiscreteSampler DiscreteSampler::from_pmf(const std::map<std::uint64_t, double>& pmf) {
  DiscreteSampler s;
  double acc = 0.0;
  for (auto& [k, p] : pmf) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw Error(ErrorKind::validation, "invalid pmf: negative or non-finite mass");
    if (p == 0.0) continue;
    acc += p;
    s.values_.push_back(k);
    s.cdf_.push_back(acc);
  }
  if (s.values_.empty() || std::fabs(acc - 1.0) > 1e-9)
    throw Error(ErrorKind::validation, "invalid pmf: masses sum to " + std::to_string(acc));
  s.head_mass_ = acc;
  s.cdf_.push_back(acc);
  s.cdf_.push_back(acc);
  return s;
}

std::uint64_t DiscreteSampler::sample(Rng& rng) const {
  const double u = rng.uniform01() * cdf_.back();
  std::size_t i = std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin();
  if (i < values_.size()) return values_[i];
  if (i == values_.size() && tail_mass_ > 0) return sample_tail(rng);
  if (inf_mass_ > 0) return kInfinity;
  if (tail_mass_ > 0) return sample_tail(rng);
  return values_.back();
}

std::uint64_t DiscreteSampler::sample_tail(Rng& rng) const {
  const std::uint64_t K = start_;
  if (env_.kind == TailEnvelope::Kind::power) {
    // discrete Pareto proposal floor(K U^{-1/(a-1)}); f is its pmf ratio to k^{-a}
    const double a = env_.exponent;
    auto f = [a](double k) { return 1.0 / (k * -std::expm1((1.0 - a) * std::log1p(1.0 / k))); };
    const double fK = f(static_cast<double>(K));
    for (;;) {
      double x = static_cast<double>(K) * std::pow(rng.uniform_open0(), -1.0 / (a - 1.0));
      if (!(x < 1.8e19)) return kHuge;
      double k = std::floor(x);
      if (rng.uniform01() * fK < f(k)) return static_cast<std::uint64_t>(k);
    }
  }
  const double r = env_.ratio;
  const double lr = std::log(r);
  const double lK = log_term(*law_, j_, K);
  for (;;) {
    std::uint64_t g = rng.geometric(r);
    if (g >= kHuge - K) return kHuge;
    std::uint64_t k = K + g;
    double la = log_term(*law_, j_, k) - lK - static_cast<double>(g) * lr;
    if (la > 1e-9) throw Error(ErrorKind::precision, "tail envelope violated at k=" + std::to_string(k));
    if (std::log(rng.uniform_open0()) <= la) return k;
  }
}

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::automatic: return "auto";
    case Strategy::rejection_cycle: return "rejection-cycle";
    case Strategy::exact_sequential: return "exact-sequential";
    case Strategy::exact_split: return "exact-split";
  }
  return "?";
}

Strategy parse_strategy(const std::string& s) {
  if (s == "auto") return Strategy::automatic;
  if (s == "rejection-cycle" || s == "rejection") return Strategy::rejection_cycle;
  if (s == "exact-sequential") return Strategy::exact_sequential;
  if (s == "exact-split") return Strategy::exact_split;
  throw Error(ErrorKind::usage,
              "unknown strategy '" + s + "' (auto, rejection-cycle, exact-sequential, exact-split)");
}

bool admissible(const WeightSequence& w, std::size_t n) { return n >= 1 && (n - 1) % span(w) == 0; }

SgtSampler::SgtSampler(const OffspringLaw& law, std::size_t n, const SamplerOptions& opt)
    : n_(n), strategy_(opt.strategy), opt_(opt) {
  if (n == 0) throw Error(ErrorKind::validation, "n must be at least 1");
  if (!admissible(law.weights(), n))
    throw Error(ErrorKind::validation, "n=" + std::to_string(n) + " is not admissible: trees need n = 1 mod " +
                                           std::to_string(span(law.weights())));
  if (strategy_ == Strategy::automatic)
    strategy_ = law.type() == WeightType::I && n <= opt.rejection_max_n ? Strategy::rejection_cycle
                                                                         : Strategy::exact_split;
  switch (strategy_) {
    case Strategy::rejection_cycle:
      if (law.type() == WeightType::III && n > 1)
        throw Error(ErrorKind::validation,
                    "type III weights admit no probability tilt; use exact-sequential or exact-split");
      xi_ = DiscreteSampler::offspring(law);
      break;
    case Strategy::exact_sequential: {
      auto t = PartitionTable<long double>::from_weights(tilted_weights(law, n), n, 0.0, true, opt.table);
      if (!(t.z(n - 1, n) > 0))
        throw Error(ErrorKind::validation, "no tree with n=" + std::to_string(n) + " vertices has positive weight");
      table_ = std::make_shared<PartitionTable<long double>>(std::move(t));
      break;
    }
    case Strategy::exact_split:
      split_ = std::make_shared<SplitSampler>(SplitSampler::build(tilted_weights(law, n), n, opt.table));
      break;
    case Strategy::automatic: break;
  }
}

std::vector<Degree> SgtSampler::sample_sequence(Rng& rng) const {
  if (n_ == 1) return {0};
  if (table_) return sgt::sample_sequence(*table_, rng);
  if (split_) return split_->sample(rng);
  std::vector<Degree> y(n_);
  const std::uint64_t target = n_ - 1;
  for (std::uint64_t attempt = 0; attempt < opt_.max_attempts; ++attempt) {
    std::uint64_t sum = 0;
    bool ok = true;
    for (std::size_t i = 0; i < n_; ++i) {
      std::uint64_t k = xi_->sample(rng);
      if (k > target - sum) {
        ok = false;
        break;
      }
      sum += k;
      y[i] = static_cast<Degree>(k);
    }
    if (ok && sum == target) return y;
  }
  throw Error(ErrorKind::resource, "rejection sampling exceeded " + std::to_string(opt_.max_attempts) +
                                       " attempts; use --strategy exact-split");
}

PlaneTree SgtSampler::sample(Rng& rng) const { return cycle_shift(sample_sequence(rng)).tree; }

namespace {

// Appends a Galton-Watson tree in DFS order; false once total exceeds cap.
bool append_gw(const DiscreteSampler& xi, std::uint64_t budget, Rng& rng, std::uint64_t cap,
               std::vector<Degree>& out) {
  std::vector<std::uint64_t> stack{0};
  while (!stack.empty()) {
    std::uint64_t depth = stack.back();
    stack.pop_back();
    if (out.size() >= cap) return false;
    std::uint64_t k = xi.sample(rng);
    if (k > cap) return false;
    out.push_back(static_cast<Degree>(k));
    if (depth < budget) stack.insert(stack.end(), k, depth + 1);
    if (stack.size() + out.size() > cap) return false;
  }
  return true;
}

}  // namespace

std::optional<PlaneTree> sample_gw(const DiscreteSampler& xi, Rng& rng, std::uint64_t size_cap) {
  if (size_cap == 0) throw Error(ErrorKind::validation, "size cap must be at least 1");
  std::vector<Degree> d;
  if (!append_gw(xi, UINT64_MAX, rng, size_cap, d)) return std::nullopt;
  return PlaneTree::from_degrees(std::move(d));
}

std::optional<PlaneTree> sample_gw(const OffspringLaw& law, Rng& rng, std::uint64_t size_cap) {
  return sample_gw(DiscreteSampler::offspring(law), rng, size_cap);
}

std::optional<Subtree> sample_gw_cut(const DiscreteSampler& xi, std::uint64_t budget, Rng& rng,
                                     std::uint64_t size_cap) {
  Subtree s;
  if (!append_gw(xi, budget, rng, size_cap, s)) return std::nullopt;
  return s;
}

LimitSampler::LimitSampler(const OffspringLaw& law, std::uint64_t size_cap)
    : law_(law),
      xi_(DiscreteSampler::offspring(law)),
      xihat_(DiscreteSampler::size_biased(law)),
      size_cap_(size_cap) {}

void LimitSampler::require_condensation() const {
  if (law_.type() == WeightType::I)
    throw Error(ErrorKind::validation, "condensation objects need weights of type II or III");
}

std::optional<SpineRecord> LimitSampler::record(DegreePair pair, std::uint32_t m, Rng& rng) const {
  SpineRecord rec;
  rec.pair = pair;
  for (std::uint64_t i = 0; i < pair.left.capped(m); ++i) {
    auto s = sample_gw_cut(xi_, m, rng, size_cap_);
    if (!s) return std::nullopt;
    rec.left.push_back(std::move(*s));
  }
  for (std::uint64_t i = 0; i < pair.right.capped(m); ++i) {
    auto s = sample_gw_cut(xi_, m, rng, size_cap_);
    if (!s) return std::nullopt;
    rec.right.push_back(std::move(*s));
  }
  return rec;
}

std::optional<SpineRecord> LimitSampler::finite_record(std::uint64_t xihat, std::uint32_t m, Rng& rng) const {
  if (xihat >= kHuge) throw Error(ErrorKind::resource, "size-biased draw beyond the representable range");
  std::uint64_t left = rng.uniform_index(xihat);
  return record({Count(left), Count(xihat - 1 - left)}, m, rng);
}

std::optional<PointedTree> LimitSampler::sin_tree(std::uint32_t m, Rng& rng) const {
  if (law_.type() != WeightType::I) throw Error(ErrorKind::validation, "the sin-tree needs weights of type I");
  PointedTree pt;
  pt.window = m;
  pt.height = Count::infinity();
  auto c = sample_gw_cut(xi_, m, rng, size_cap_);
  if (!c) return std::nullopt;
  pt.center = std::move(*c);
  for (std::uint32_t i = 1; i <= m; ++i) {
    std::uint64_t k = xihat_.sample(rng);
    if (k == DiscreteSampler::kInfinity) throw Error(ErrorKind::precision, "infinite size-biased draw in type I");
    auto rec = finite_record(k, m, rng);
    if (!rec) return std::nullopt;
    pt.spine.push_back(std::move(*rec));
  }
  return pt;
}

std::optional<PointedTree> LimitSampler::limit_fringe(std::uint32_t k, Rng& rng) const {
  if (law_.type() != WeightType::I) throw Error(ErrorKind::validation, "the sin-tree needs weights of type I");
  constexpr std::uint64_t full = UINT64_MAX;
  PointedTree pt;
  pt.height = k;
  auto c = sample_gw_cut(xi_, full, rng, size_cap_);
  if (!c) return std::nullopt;
  pt.center = std::move(*c);
  for (std::uint32_t i = 1; i <= k; ++i) {
    std::uint64_t d = xihat_.sample(rng);
    if (d == DiscreteSampler::kInfinity) throw Error(ErrorKind::precision, "infinite size-biased draw in type I");
    if (d >= kHuge) throw Error(ErrorKind::resource, "size-biased draw beyond the representable range");
    std::uint64_t left = rng.uniform_index(d);
    SpineRecord rec;
    rec.pair = {Count(left), Count(d - 1 - left)};
    for (std::uint64_t j = 0; j < d - 1; ++j) {
      auto s = sample_gw_cut(xi_, full, rng, size_cap_);
      if (!s) return std::nullopt;
      (j < left ? rec.left : rec.right).push_back(std::move(*s));
    }
    pt.spine.push_back(std::move(rec));
  }
  return pt;
}

std::optional<std::uint64_t> LimitSampler::lower_spine(PointedTree& pt, std::uint32_t m, Rng& rng) const {
  pt.window = m;
  auto c = sample_gw_cut(xi_, m, rng, size_cap_);
  if (!c) return std::nullopt;
  pt.center = std::move(*c);
  for (std::uint64_t i = 1;; ++i) {
    std::uint64_t k = xihat_.sample(rng);
    if (k == DiscreteSampler::kInfinity) return i;
    if (i > m) continue;
    auto rec = finite_record(k, m, rng);
    if (!rec) return std::nullopt;
    pt.spine.push_back(std::move(*rec));
  }
}

std::optional<PointedTree> LimitSampler::condensation_tree(std::uint32_t m, Rng& rng) const {
  require_condensation();
  PointedTree pt;
  auto i1 = lower_spine(pt, m, rng);
  if (!i1) return std::nullopt;
  if (*i1 <= m) {
    auto rec = record({Count::infinity(), Count::infinity()}, m, rng);
    if (!rec) return std::nullopt;
    pt.spine.push_back(std::move(*rec));
  }
  for (std::uint64_t i = *i1 + 1;; ++i) {
    std::uint64_t k = xihat_.sample(rng);
    if (k == DiscreteSampler::kInfinity) {
      pt.height = Count(i - 1);
      return pt;
    }
    if (i > m) continue;
    auto rec = finite_record(k, m, rng);
    if (!rec) return std::nullopt;
    pt.spine.push_back(std::move(*rec));
  }
}

std::optional<PointedTree> LimitSampler::tbar_star_n(const DiscreteSampler& dtilde, std::uint32_t m,
                                                     Rng& rng) const {
  require_condensation();
  PointedTree pt;
  auto i1 = lower_spine(pt, m, rng);
  if (!i1) return std::nullopt;
  std::uint64_t d = dtilde.sample(rng);
  if (d == 0 || d >= kHuge) throw Error(ErrorKind::validation, "invalid pmf: the large degree must be positive");
  pt.height = Count(*i1);
  if (*i1 <= m) {
    auto rec = finite_record(d, m, rng);
    if (!rec) return std::nullopt;
    pt.spine.push_back(std::move(*rec));
  }
  return pt;
}

std::optional<PointedTree> LimitSampler::pruned_star_n(const DiscreteSampler& dtilde, std::uint32_t m,
                                                       Rng& rng) const {
  require_condensation();
  PointedTree pt;
  auto i1 = lower_spine(pt, m, rng);
  if (!i1) return std::nullopt;
  pt.height = Count(*i1);
  std::uint64_t d = dtilde.sample(rng);
  if (d == 0 || d >= kHuge) throw Error(ErrorKind::validation, "invalid pmf: the large degree must be positive");
  if (*i1 <= m) {
    auto rec = record({Count::infinity(), Count::infinity()}, m, rng);
    if (!rec) return std::nullopt;
    std::uint64_t left = rng.uniform_index(d);
    std::uint64_t right = d - 1 - left;
    rec->pair = {Count(left), Count(right)};
    rec->left.resize(std::min<std::uint64_t>(left, rec->left.size()));
    rec->right.resize(std::min<std::uint64_t>(right, rec->right.size()));
    pt.spine.push_back(std::move(*rec));
  }
  return pt;
}

std::optional<ModifiedGw> LimitSampler::modified_gw(const DiscreteSampler& dtilde, Rng& rng) const {
  require_condensation();
  ModifiedGw out{PlaneTree::from_degrees({0}), VertexRef{0}, 0, {}, 0};
  std::vector<Degree> seq;
  const std::uint64_t cap = size_cap_;
  std::function<bool(std::uint64_t)> special = [&](std::uint64_t depth) {
    if (seq.size() >= cap) return false;
    std::uint64_t k = xihat_.sample(rng);
    if (k == DiscreteSampler::kInfinity) {
      ++out.placeholder_draws;
      std::uint64_t d = dtilde.sample(rng);
      if (d > cap) return false;
      out.tip = VertexRef{seq.size()};
      out.tip_height = depth;
      seq.push_back(static_cast<Degree>(d));
      for (std::uint64_t c = 0; c < d; ++c)
        if (!append_gw(xi_, UINT64_MAX, rng, cap, seq)) return false;
      return true;
    }
    if (k > cap) return false;
    ++out.special_draws[k];
    seq.push_back(static_cast<Degree>(k));
    std::uint64_t heir = rng.uniform_index(k);
    for (std::uint64_t c = 0; c < k; ++c) {
      bool ok = c == heir ? special(depth + 1) : append_gw(xi_, UINT64_MAX, rng, cap, seq);
      if (!ok) return false;
    }
    return true;
  };
  if (!special(0)) return std::nullopt;
  out.tree = PlaneTree::from_degrees(std::move(seq));
  return out;
}

std::optional<ModifiedGw> sample_modified_gw(const OffspringLaw& law, const DiscreteSampler& dtilde, Rng& rng,
                                             std::uint64_t size_cap) {
  if (law.type() == WeightType::I)
    throw Error(ErrorKind::validation, "the modified Galton-Watson tree needs weights of type II or III");
  return LimitSampler(law, size_cap).modified_gw(dtilde, rng);
}

}  // namespace sgt
