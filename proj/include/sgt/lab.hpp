#pragma once

#include "sgt/exact.hpp"
#include "sgt/pointed_tree.hpp"
#include "sgt/rng.hpp"
#include "sgt/samplers.hpp"
#include "sgt/weights.hpp"

#include <json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace sgt {

enum class Statistic { height_dist, max_degree, pattern_probs, tv_vs_limit, tv_extended_fringe };
const char* statistic_name(Statistic s);
Statistic parse_statistic(const std::string& s);

// quarter_power: ceil(n^(1/4)); log: ceil(log(n+1)); user: ceil(c n^beta), 0 <= beta < 1.
struct OmegaSpec {
  std::string name = "quarter_power";
  double c = 1.0;
  double beta = 0.25;
};
std::uint64_t omega_schedule(const OmegaSpec& spec, std::uint64_t n);
std::uint64_t omega_schedule(const std::string& name, std::uint64_t n);

// A threshold pattern at level h is matched against H(T, v0, omega) and must
// put its threshold at the top of its shape; an exact pattern of height h is
// matched against H_h(T, v0).  Threshold patterns with kind "above" and no
// fixed omega follow the schedule.  With free_center the subtree at v0 is
// left unconstrained.
struct PatternSpec {
  std::string name;
  FringeEvent event;
  bool scheduled_omega = true;
  bool free_center = false;
};

struct AddressSet {
  std::string name;
  std::vector<Address> addresses;
};

struct ExperimentConfig {
  FamilySpec family;
  std::vector<std::size_t> n_grid;
  std::uint64_t replications = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  OmegaSpec omega;
  std::vector<PatternSpec> patterns;
  std::set<Statistic> statistics;
  // tv_extended_fringe compares H_k; tv_vs_limit compares marginals on the
  // address sets with limit objects drawn in window `window`.
  std::uint32_t k = 1;
  std::uint32_t window = 4;
  std::vector<AddressSet> address_sets;
  Strategy strategy = Strategy::automatic;
  unsigned bootstrap = 1000;
  // exact pattern values for n up to this size
  std::size_t exact_cap = 10001;
  ScalarMode dtilde_mode = ScalarMode::real;
  std::uint64_t gw_cap = 1000000;

  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct TvEstimate {
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::uint64_t size_a = 0;
  std::uint64_t size_b = 0;
  std::uint64_t distinct = 0;
  bool undersampled = false;
};

using Histogram = std::map<std::string, std::uint64_t>;

// Plug-in (1/2) sum |p - q| with a percentile bootstrap CI.
TvEstimate tv_plugin(const Histogram& a, const Histogram& b, Rng& rng, unsigned resamples = 1000,
                     double level = 0.95);
TvEstimate tv_plugin(const std::vector<std::string>& a, const std::vector<std::string>& b, Rng& rng,
                     unsigned resamples = 1000, double level = 0.95);
// TV between an empirical histogram on {0,1,...} and a known pmf.
TvEstimate tv_against_pmf(const std::map<std::uint64_t, std::uint64_t>& counts,
                          const std::vector<double>& pmf, Rng& rng, unsigned resamples = 1000,
                          double level = 0.95);

// t (1 - mu)^2 mu^(t-1) for t >= 1, and 0 at t = 0.
double height_limit_pmf(double mu, std::uint64_t t);
// Prod pi_{d_i} over the shape, or (1 - mu) times the product over all
// vertices but the threshold one; a free center drops its subtree from the
// product.  Nullopt for at_least thresholds.
std::optional<double> pattern_limit(const OffspringLaw& law, const FringeEvent& ev, bool free_center = false);

// Smallest admissible size >= n.
std::size_t round_admissible(const WeightSequence& w, std::size_t n);

struct ReportRow {
  std::size_t n = 0;
  std::string statistic;
  double value = 0.0;
  double stderr_ = 0.0;
  std::uint64_t sample_size = 0;  // 0 for predictions
  double ci_low = 0.0;
  double ci_high = 0.0;
};

struct ExperimentReport {
  nlohmann::json config;
  std::vector<ReportRow> rows;
  // n -> group -> category -> count; each group sums to the replications
  std::map<std::size_t, std::map<std::string, std::map<std::string, std::uint64_t>>> censoring;
  std::vector<std::string> warnings;
  double runtime_seconds = 0.0;

  const ReportRow* find(std::size_t n, const std::string& statistic) const;
  double value(std::size_t n, const std::string& statistic) const;
  // Deterministic given the config unless the runtime is included.
  nlohmann::json to_json(bool with_runtime = false) const;
  std::string to_csv() const;
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);
ExperimentReport run_height_experiment(ExperimentConfig cfg);
ExperimentReport run_max_degree_experiment(ExperimentConfig cfg);
ExperimentReport run_pattern_experiment(ExperimentConfig cfg);
// tv_extended_fringe for type I, tv_vs_limit otherwise.
ExperimentReport run_tv_experiment(ExperimentConfig cfg);

Address parse_address(const std::string& s);

// Law of the root degree of the tree conditioned on exceeding omega.
std::map<Degree, ExactScalar> dtilde_law(const OffspringLaw& law, std::size_t n, std::uint64_t omega,
                                         ScalarMode mode);

// Gated invariants of a report: censoring groups sum to the replications and
// every pattern frequency holds its exact value in a 99.9% Wilson interval.
std::vector<std::string> gate_failures(const ExperimentReport& r);

}  // namespace sgt
