#pragma once

#include "sgt/exact.hpp"
#include "sgt/plane_tree.hpp"
#include "sgt/pointed_tree.hpp"
#include "sgt/rng.hpp"
#include "sgt/weights.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <variant>
#include <vector>

namespace sgt {

// Draws from a law on {0, 1, ...} with an optional atom at infinity.  The
// head is searched in a cumulative table; the tail beyond it is drawn by
// rejection from a geometric or discrete Pareto proposal.
class DiscreteSampler {
 public:
  static constexpr std::uint64_t kInfinity = UINT64_MAX;

  static DiscreteSampler offspring(const OffspringLaw& law);
  // Size-biased law: k pi_k on k >= 1, mass 1 - mu at kInfinity.
  static DiscreteSampler size_biased(const OffspringLaw& law);
  // Finite pmf given as k -> mass; masses must be non-negative and sum to 1.
  static DiscreteSampler from_pmf(const std::map<std::uint64_t, double>& pmf);

  std::uint64_t sample(Rng& rng) const;
  double head_mass() const { return head_mass_; }
  double tail_mass() const { return tail_mass_; }
  double infinity_mass() const { return inf_mass_; }
  // Draw conditioned on k >= tail_start(); needs tail_mass() > 0.
  std::uint64_t tail_start() const { return start_; }
  std::uint64_t sample_tail(Rng& rng) const;

 private:
  static DiscreteSampler build(const OffspringLaw& law, unsigned j);

  std::vector<std::uint64_t> values_;
  std::vector<double> cdf_;  // over values_, then tail, then infinity
  double head_mass_ = 0.0, tail_mass_ = 0.0, inf_mass_ = 0.0;
  // tail k >= start_, term_k proportional to exp(log_term(k))
  std::uint64_t start_ = 0;
  TailEnvelope env_;
  std::shared_ptr<const OffspringLaw> law_;
  unsigned j_ = 0;
};

enum class Strategy { automatic, rejection_cycle, exact_sequential, exact_split };
const char* strategy_name(Strategy s);
Strategy parse_strategy(const std::string& s);

struct SamplerOptions {
  Strategy strategy = Strategy::automatic;
  std::uint64_t max_attempts = 10000000;
  // automatic: rejection for type I up to this size, exact-split otherwise
  std::size_t rejection_max_n = 256;
  TableOptions table;
};

// Exact draws of the conditioned simply generated tree with n vertices.
class SgtSampler {
 public:
  SgtSampler(const OffspringLaw& law, std::size_t n, const SamplerOptions& opt = {});

  std::size_t n() const { return n_; }
  Strategy strategy() const { return strategy_; }
  std::vector<Degree> sample_sequence(Rng& rng) const;
  PlaneTree sample(Rng& rng) const;

 private:
  std::size_t n_;
  Strategy strategy_;
  SamplerOptions opt_;
  std::optional<DiscreteSampler> xi_;
  std::shared_ptr<PartitionTable<long double>> table_;
  std::shared_ptr<SplitSampler> split_;
};

// True when n = 1 mod span(w).
bool admissible(const WeightSequence& w, std::size_t n);

// Unconditioned Galton-Watson tree; nullopt once it exceeds size_cap vertices.
std::optional<PlaneTree> sample_gw(const DiscreteSampler& xi, Rng& rng, std::uint64_t size_cap = 1000000);
std::optional<PlaneTree> sample_gw(const OffspringLaw& law, Rng& rng, std::uint64_t size_cap = 1000000);

// Galton-Watson tree with vertices below depth budget left unexpanded.
std::optional<Subtree> sample_gw_cut(const DiscreteSampler& xi, std::uint64_t budget, Rng& rng,
                                     std::uint64_t size_cap = 1000000);

struct ModifiedGw {
  PlaneTree tree;
  VertexRef tip;
  std::uint64_t tip_height = 0;
  // construction audit: finite special draws by value, and placeholder draws
  std::map<std::uint64_t, std::uint64_t> special_draws;
  std::uint64_t placeholder_draws = 0;
};

// Windowed limit objects.  A nullopt result marks a size-capped subtree.
class LimitSampler {
 public:
  explicit LimitSampler(const OffspringLaw& law, std::uint64_t size_cap = 1000000);

  const OffspringLaw& law() const { return law_; }
  std::optional<PointedTree> sin_tree(std::uint32_t m, Rng& rng) const;
  // H_k of the sin-tree at u_0, fully materialized.
  std::optional<PointedTree> limit_fringe(std::uint32_t k, Rng& rng) const;
  std::optional<PointedTree> condensation_tree(std::uint32_t m, Rng& rng) const;
  // Spine up to the first infinite size-biased draw, whose vertex becomes the
  // root with a dtilde-distributed outdegree.
  std::optional<PointedTree> tbar_star_n(const DiscreteSampler& dtilde, std::uint32_t m, Rng& rng) const;
  // Pointed fringe at the infinite-degree vertex of the condensation tree,
  // pruned to a dtilde-distributed outdegree with a uniform left count.
  std::optional<PointedTree> pruned_star_n(const DiscreteSampler& dtilde, std::uint32_t m, Rng& rng) const;
  std::optional<ModifiedGw> modified_gw(const DiscreteSampler& dtilde, Rng& rng) const;

 private:
  void require_condensation() const;
  std::optional<SpineRecord> record(DegreePair pair, std::uint32_t m, Rng& rng) const;
  std::optional<SpineRecord> finite_record(std::uint64_t xihat, std::uint32_t m, Rng& rng) const;
  // Center and spine up to the first infinite size-biased draw, materialized
  // within window m; returns that level, records stop before it.
  std::optional<std::uint64_t> lower_spine(PointedTree& pt, std::uint32_t m, Rng& rng) const;

  OffspringLaw law_;
  DiscreteSampler xi_;
  DiscreteSampler xihat_;
  std::uint64_t size_cap_;
};

// Modified Galton-Watson tree with special spine and a dtilde burst at its
// tip.  Builds the samplers on every call; use LimitSampler::modified_gw in loops.
std::optional<ModifiedGw> sample_modified_gw(const OffspringLaw& law, const DiscreteSampler& dtilde, Rng& rng,
                                             std::uint64_t size_cap = 1000000);

}  // namespace sgt
