#include "sgt/lab.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <sstream>
#include <thread>

namespace sgt {

const char* statistic_name(Statistic s) {
  switch (s) {
    case Statistic::height_dist: return "height_dist";
    case Statistic::max_degree: return "max_degree";
    case Statistic::pattern_probs: return "pattern_probs";
    case Statistic::tv_vs_limit: return "tv_vs_limit";
    case Statistic::tv_extended_fringe: return "tv_extended_fringe";
  }
  return "?";
}

Statistic parse_statistic(const std::string& s) {
  for (Statistic x : {Statistic::height_dist, Statistic::max_degree, Statistic::pattern_probs, Statistic::tv_vs_limit,
                      Statistic::tv_extended_fringe})
    if (s == statistic_name(x)) return x;
  throw Error(ErrorKind::validation, "unknown statistic \"" + s + "\"");
}

std::uint64_t omega_schedule(const OmegaSpec& spec, std::uint64_t n) {
  if (spec.name == "quarter_power") {
    std::uint64_t c = 0;
    while (static_cast<unsigned __int128>(c) * c * c * c < n) ++c;
    return c;
  }
  if (spec.name == "log") return static_cast<std::uint64_t>(std::ceil(std::log(static_cast<double>(n) + 1.0)));
  if (spec.name == "user") {
    if (!(spec.beta < 1.0)) throw Error(ErrorKind::validation, "omega exponent beta must be below 1 (omega_n = o(n))");
    if (!(spec.beta >= 0.0) || !(spec.c > 0.0))
      throw Error(ErrorKind::validation, "omega needs c > 0 and beta >= 0 to be nondecreasing");
    return static_cast<std::uint64_t>(std::ceil(spec.c * std::pow(static_cast<double>(n), spec.beta)));
  }
  throw Error(ErrorKind::validation, "unknown omega schedule \"" + spec.name + "\"");
}

std::uint64_t omega_schedule(const std::string& name, std::uint64_t n) {
  OmegaSpec s;
  s.name = name;
  return omega_schedule(s, n);
}

namespace {

std::pair<double, double> percentile_ci(std::vector<double> v, double level) {
  if (v.empty()) return {0.0, 0.0};
  std::sort(v.begin(), v.end());
  auto at = [&](double q) {
    double pos = q * static_cast<double>(v.size() - 1);
    return v[static_cast<std::size_t>(std::lround(pos))];
  };
  return {at((1.0 - level) / 2.0), at((1.0 + level) / 2.0)};
}

struct Bins {
  std::vector<std::uint32_t> a, b;  // one bin id per observation
  std::size_t count = 0;
};

Bins bin(const Histogram& ha, const Histogram& hb) {
  Bins out;
  std::map<std::string, std::uint32_t> ids;
  auto id = [&](const std::string& k) {
    auto [it, fresh] = ids.emplace(k, static_cast<std::uint32_t>(ids.size()));
    return it->second;
  };
  for (auto& [k, c] : ha) out.a.insert(out.a.end(), c, id(k));
  for (auto& [k, c] : hb) out.b.insert(out.b.end(), c, id(k));
  out.count = ids.size();
  return out;
}

double tv_of(const std::vector<std::uint64_t>& ca, double na, const std::vector<std::uint64_t>& cb, double nb) {
  double s = 0.0;
  for (std::size_t i = 0; i < ca.size(); ++i) s += std::abs(ca[i] / na - cb[i] / nb);
  return std::min(1.0, s / 2.0);
}

}  // namespace

TvEstimate tv_plugin(const Histogram& ha, const Histogram& hb, Rng& rng, unsigned resamples, double level) {
  Bins bins = bin(ha, hb);
  if (bins.a.empty() || bins.b.empty()) throw Error(ErrorKind::validation, "tv_plugin needs nonempty samples");
  const double na = static_cast<double>(bins.a.size()), nb = static_cast<double>(bins.b.size());
  std::vector<std::uint64_t> ca(bins.count), cb(bins.count);
  for (auto i : bins.a) ++ca[i];
  for (auto i : bins.b) ++cb[i];
  TvEstimate est;
  est.estimate = tv_of(ca, na, cb, nb);
  est.size_a = bins.a.size();
  est.size_b = bins.b.size();
  est.distinct = bins.count;
  est.undersampled = static_cast<double>(bins.count) > std::min(na, nb) / 10.0;
  std::vector<double> boot;
  boot.reserve(resamples);
  for (unsigned r = 0; r < resamples; ++r) {
    std::fill(ca.begin(), ca.end(), 0);
    std::fill(cb.begin(), cb.end(), 0);
    for (std::size_t i = 0; i < bins.a.size(); ++i) ++ca[bins.a[rng.uniform_index(bins.a.size())]];
    for (std::size_t i = 0; i < bins.b.size(); ++i) ++cb[bins.b[rng.uniform_index(bins.b.size())]];
    boot.push_back(tv_of(ca, na, cb, nb));
  }
  std::tie(est.ci_low, est.ci_high) = resamples ? percentile_ci(boot, level) : std::make_pair(est.estimate, est.estimate);
  return est;
}

TvEstimate tv_plugin(const std::vector<std::string>& a, const std::vector<std::string>& b, Rng& rng,
                     unsigned resamples, double level) {
  Histogram ha, hb;
  for (auto& s : a) ++ha[s];
  for (auto& s : b) ++hb[s];
  return tv_plugin(ha, hb, rng, resamples, level);
}

TvEstimate tv_against_pmf(const std::map<std::uint64_t, std::uint64_t>& counts, const std::vector<double>& pmf,
                          Rng& rng, unsigned resamples, double level) {
  std::vector<std::uint64_t> obs;
  for (auto& [t, c] : counts) obs.insert(obs.end(), c, t);
  if (obs.empty()) throw Error(ErrorKind::validation, "tv_against_pmf needs a nonempty sample");
  std::size_t width = pmf.size();
  if (!counts.empty()) width = std::max<std::size_t>(width, counts.rbegin()->first + 1);
  double rest = 1.0;
  for (double q : pmf) rest -= q;
  rest = std::max(rest, 0.0);
  const double n = static_cast<double>(obs.size());
  auto tv = [&](const std::vector<std::uint64_t>& c) {
    double s = rest;
    for (std::size_t t = 0; t < width; ++t) s += std::abs(c[t] / n - (t < pmf.size() ? pmf[t] : 0.0));
    return std::min(1.0, s / 2.0);
  };
  std::vector<std::uint64_t> c(width);
  for (auto t : obs) ++c[t];
  TvEstimate est;
  est.estimate = tv(c);
  est.size_a = obs.size();
  est.distinct = counts.size();
  est.undersampled = static_cast<double>(counts.size()) > n / 10.0;
  std::vector<double> boot;
  for (unsigned r = 0; r < resamples; ++r) {
    std::fill(c.begin(), c.end(), 0);
    for (std::size_t i = 0; i < obs.size(); ++i) ++c[obs[rng.uniform_index(obs.size())]];
    boot.push_back(tv(c));
  }
  std::tie(est.ci_low, est.ci_high) = resamples ? percentile_ci(boot, level) : std::make_pair(est.estimate, est.estimate);
  return est;
}

double height_limit_pmf(double mu, std::uint64_t t) {
  if (t == 0) return 0.0;
  double q = 1.0 - mu;
  return static_cast<double>(t) * q * q * std::pow(mu, static_cast<double>(t - 1));
}

std::optional<double> pattern_limit(const OffspringLaw& law, const FringeEvent& ev, bool free_center) {
  if (ev.thresholds.size() > 1) return std::nullopt;
  if (!ev.thresholds.empty()) {
    const SpineThreshold& th = ev.thresholds.front();
    if (th.kind != SpineThreshold::Kind::above) return std::nullopt;
    FringeEvent far = ev;
    far.thresholds.front().omega = std::numeric_limits<std::uint32_t>::max();
    detail::plan_threshold(far, std::numeric_limits<std::size_t>::max() / 2);
  }
  Flattened flat = flatten(ev.shape);
  const auto& deg = flat.tree.degrees();
  const std::size_t point = flat.point.index;
  std::size_t top = flat.tree.size();
  if (!ev.thresholds.empty()) {
    auto parents = flat.tree.parents();
    top = point;
    for (std::uint32_t i = 0; i < ev.thresholds.front().level; ++i) top = parents[top];
  }
  double p = ev.thresholds.empty() ? 1.0 : 1.0 - law.mu_double();
  for (std::size_t i = 0; i < deg.size(); ++i) {
    if (i == top) continue;
    if (free_center && i >= point && i < point + ev.shape.center.size()) continue;
    p *= law.pmf(deg[i]).convert_to<double>();
  }
  return p;
}

std::size_t round_admissible(const WeightSequence& w, std::size_t n) {
  const std::uint64_t s = span(w);
  if (n < 1) n = 1;
  return n + (s - (n - 1) % s) % s;
}

Address parse_address(const std::string& text) {
  auto bad = [&]() { return Error(ErrorKind::validation, "malformed address \"" + text + "\""); };
  std::string head = text, tail;
  if (auto slash = text.find('/'); slash != std::string::npos) {
    head = text.substr(0, slash);
    tail = text.substr(slash + 1);
    if (tail.empty()) throw bad();
  }
  auto number = [&](const std::string& s) -> std::uint32_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) throw bad();
    return static_cast<std::uint32_t>(std::stoul(s));
  };
  Address a;
  if (head == "c") {
    a = Address::center();
  } else if (head.size() >= 2 && head[0] == 'u') {
    auto side = head.find_first_of("LR");
    if (side == std::string::npos) {
      a = Address::spine_vertex(number(head.substr(1)));
    } else {
      a = Address::sibling(number(head.substr(1, side - 1)), head[side] == 'L' ? Address::Side::left : Address::Side::right,
                           number(head.substr(side + 1)));
    }
    if (a.level == 0) throw bad();
  } else {
    throw bad();
  }
  std::stringstream ss(tail);
  for (std::string part; std::getline(ss, part, '.');) a.path.push_back(number(part));
  return a;
}

// ---------------------------------------------------------------- config

namespace {

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> keys, const char* where) {
  if (!j.is_object()) throw Error(ErrorKind::validation, std::string(where) + " must be a JSON object");
  for (auto& [k, v] : j.items()) {
    bool known = false;
    for (const char* x : keys) known = known || k == x;
    if (!known) throw Error(ErrorKind::validation, std::string("unknown key \"") + k + "\" in " + where);
  }
}

nlohmann::json threshold_json(const SpineThreshold& t, bool scheduled) {
  nlohmann::json j;
  j["level"] = t.level;
  if (t.kind == SpineThreshold::Kind::above) {
    j["kind"] = "above";
    if (!scheduled) j["omega"] = t.omega;
  } else {
    j["kind"] = "at_least";
    j["left_min"] = t.left_min;
    j["right_min"] = t.right_min;
  }
  return j;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  try {
    check_keys(j,
               {"family", "n_grid", "replications", "seed", "threads", "omega", "patterns", "statistics", "k",
                "window", "address_sets", "strategy", "bootstrap", "exact_cap", "dtilde_mode", "gw_cap"},
               "experiment config");
    ExperimentConfig c;
    const auto& f = j.at("family");
    if (f.is_string()) {
      c.family.name = f.get<std::string>();
    } else {
      check_keys(f, {"name", "alpha", "weights", "file"}, "family");
      c.family.name = f.at("name").get<std::string>();
      if (f.contains("alpha")) c.family.alpha = f["alpha"].is_string() ? f["alpha"].get<std::string>() : f["alpha"].dump();
      if (f.contains("weights")) c.family.weights = f["weights"].get<std::string>();
      if (f.contains("file")) c.family.file = f["file"].get<std::string>();
    }
    c.n_grid = j.at("n_grid").get<std::vector<std::size_t>>();
    if (j.contains("replications")) c.replications = j["replications"].get<std::uint64_t>();
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("threads")) c.threads = j["threads"].get<unsigned>();
    if (j.contains("omega")) {
      const auto& o = j["omega"];
      if (o.is_string()) {
        c.omega.name = o.get<std::string>();
      } else {
        check_keys(o, {"name", "c", "beta"}, "omega");
        c.omega.name = o.at("name").get<std::string>();
        if (o.contains("c")) c.omega.c = o["c"].get<double>();
        if (o.contains("beta")) c.omega.beta = o["beta"].get<double>();
      }
    }
    if (j.contains("patterns")) {
      for (const auto& p : j["patterns"]) {
        check_keys(p, {"name", "shape", "threshold", "free_center"}, "pattern");
        PatternSpec ps;
        ps.name = p.at("name").get<std::string>();
        ps.free_center = p.value("free_center", false);
        ps.event.shape = pointed_from_json(p.at("shape"));
        if (p.contains("threshold")) {
          const auto& t = p["threshold"];
          check_keys(t, {"level", "kind", "omega", "left_min", "right_min"}, "threshold");
          SpineThreshold th;
          th.level = t.at("level").get<std::uint32_t>();
          std::string kind = t.at("kind").get<std::string>();
          if (kind == "above") {
            th.kind = SpineThreshold::Kind::above;
            if (t.contains("omega")) {
              th.omega = t["omega"].get<std::uint64_t>();
              ps.scheduled_omega = false;
            }
          } else if (kind == "at_least") {
            th.kind = SpineThreshold::Kind::at_least;
            th.left_min = t.value("left_min", std::uint64_t{0});
            th.right_min = t.value("right_min", std::uint64_t{0});
          } else {
            throw Error(ErrorKind::validation, "threshold kind must be \"above\" or \"at_least\"");
          }
          ps.event.thresholds.push_back(th);
        }
        c.patterns.push_back(std::move(ps));
      }
    }
    if (j.contains("statistics"))
      for (const auto& s : j["statistics"]) c.statistics.insert(parse_statistic(s.get<std::string>()));
    if (j.contains("k")) c.k = j["k"].get<std::uint32_t>();
    if (j.contains("window")) c.window = j["window"].get<std::uint32_t>();
    if (j.contains("address_sets")) {
      for (const auto& s : j["address_sets"]) {
        check_keys(s, {"name", "addresses"}, "address set");
        AddressSet as;
        as.name = s.at("name").get<std::string>();
        for (const auto& a : s.at("addresses")) as.addresses.push_back(parse_address(a.get<std::string>()));
        c.address_sets.push_back(std::move(as));
      }
    }
    if (j.contains("strategy")) c.strategy = parse_strategy(j["strategy"].get<std::string>());
    if (j.contains("bootstrap")) c.bootstrap = j["bootstrap"].get<unsigned>();
    if (j.contains("exact_cap")) c.exact_cap = j["exact_cap"].get<std::size_t>();
    if (j.contains("dtilde_mode")) c.dtilde_mode = parse_mode(j["dtilde_mode"].get<std::string>());
    if (j.contains("gw_cap")) c.gw_cap = j["gw_cap"].get<std::uint64_t>();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::validation, std::string("experiment config: ") + e.what());
  }
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  nlohmann::json f;
  f["name"] = family.name;
  if (family.alpha) f["alpha"] = *family.alpha;
  if (family.weights) f["weights"] = *family.weights;
  if (family.file) f["file"] = *family.file;
  j["family"] = f;
  j["n_grid"] = n_grid;
  j["replications"] = replications;
  j["seed"] = seed;
  j["threads"] = threads;
  j["omega"] = {{"name", omega.name}, {"c", omega.c}, {"beta", omega.beta}};
  nlohmann::json pats = nlohmann::json::array();
  for (const auto& p : patterns) {
    nlohmann::json pj;
    pj["name"] = p.name;
    pj["shape"] = sgt::to_json(p.event.shape);
    if (p.free_center) pj["free_center"] = true;
    if (!p.event.thresholds.empty()) pj["threshold"] = threshold_json(p.event.thresholds.front(), p.scheduled_omega);
    pats.push_back(pj);
  }
  j["patterns"] = pats;
  nlohmann::json stats = nlohmann::json::array();
  for (Statistic s : statistics) stats.push_back(statistic_name(s));
  j["statistics"] = stats;
  j["k"] = k;
  j["window"] = window;
  nlohmann::json sets = nlohmann::json::array();
  for (const auto& s : address_sets) {
    nlohmann::json a = nlohmann::json::array();
    for (const auto& x : s.addresses) a.push_back(x.to_string());
    sets.push_back({{"name", s.name}, {"addresses", a}});
  }
  j["address_sets"] = sets;
  j["strategy"] = strategy_name(strategy);
  j["bootstrap"] = bootstrap;
  j["exact_cap"] = exact_cap;
  j["dtilde_mode"] = mode_name(dtilde_mode);
  j["gw_cap"] = gw_cap;
  return j;
}

// ---------------------------------------------------------------- report

const ReportRow* ExperimentReport::find(std::size_t n, const std::string& statistic) const {
  for (const auto& r : rows)
    if (r.n == n && r.statistic == statistic) return &r;
  return nullptr;
}

double ExperimentReport::value(std::size_t n, const std::string& statistic) const {
  const ReportRow* r = find(n, statistic);
  if (!r) throw Error(ErrorKind::validation, "no statistic " + statistic + " at n=" + std::to_string(n));
  return r->value;
}

nlohmann::json ExperimentReport::to_json(bool with_runtime) const {
  nlohmann::json j;
  j["config"] = config;
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : rows)
    rs.push_back({{"n", r.n},
                  {"statistic", r.statistic},
                  {"value", r.value},
                  {"stderr", r.stderr_},
                  {"sample_size", r.sample_size},
                  {"ci", {r.ci_low, r.ci_high}}});
  j["rows"] = rs;
  nlohmann::json cens = nlohmann::json::object();
  for (const auto& [n, groups] : censoring) cens[std::to_string(n)] = groups;
  j["censoring"] = cens;
  j["warnings"] = warnings;
  if (with_runtime) j["runtime_seconds"] = runtime_seconds;
  return j;
}

std::string ExperimentReport::to_csv() const {
  std::string out = "n,statistic,value,stderr\n";
  char buf[64];
  for (const auto& r : rows) {
    std::string stat = r.statistic;
    if (stat.find_first_of(",\"") != std::string::npos) {
      std::string q = "\"";
      for (char ch : stat) q += ch == '"' ? std::string("\"\"") : std::string(1, ch);
      stat = q + "\"";
    }
    out += std::to_string(r.n) + "," + stat + ",";
    std::snprintf(buf, sizeof buf, "%.17g", r.value);
    out += buf;
    std::snprintf(buf, sizeof buf, ",%.17g\n", r.stderr_);
    out += buf;
  }
  return out;
}

// ---------------------------------------------------------------- runner

namespace {

constexpr std::uint64_t kStageTrees = 1, kStageLimit = 2, kStageBootstrap = 3;
const std::string kUndefined = "<undefined>";

// Long encodings are replaced by their length and a 64-bit FNV-1a digest.
std::string histogram_key(const std::string& enc) {
  if (enc.size() <= 96) return enc;
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : enc) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[48];
  std::snprintf(buf, sizeof buf, "#%zu:%016llx", enc.size(), static_cast<unsigned long long>(h));
  return buf;
}

std::string observation_key(const PointedTree& pt, const AddressSet& set, bool& insufficient) {
  std::string key;
  for (const Address& a : set.addresses) {
    auto o = observe(pt, a);
    if (!o) {
      insufficient = true;
      return {};
    }
    if (!key.empty()) key += ';';
    key += o->to_string();
  }
  return key;
}

void parallel_for(std::uint64_t count, unsigned threads, const std::function<void(unsigned, std::uint64_t, std::uint64_t)>& fn) {
  threads = std::max(1u, threads);
  if (threads == 1 || count < 2) {
    fn(0, 0, count);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  for (unsigned w = 0; w < threads; ++w) {
    std::uint64_t lo = count * w / threads, hi = count * (w + 1) / threads;
    pool.emplace_back([&, w, lo, hi] {
      try {
        fn(w, lo, hi);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct PatternPlan {
  const PatternSpec* spec = nullptr;
  FringeEvent event;
  WindowPattern pattern;
  bool truncated = false;  // matched against H(T, v0, omega)
  std::uint64_t omega = 0;
  std::uint32_t height = 0;
};

// Only the parent-above-omega pattern has a closed form with a free center:
// the parent of a uniform vertex has outdegree r with probability r Pr{Y_0 = r}.
template <class Src>
std::optional<std::pair<double, double>> free_center_exact(const Src& t, const PatternPlan& pl) {
  const PointedTree& s = pl.event.shape;
  if (!pl.truncated || s.spine.size() != 1 || !(s.spine[0].pair == DegreePair{Count(0), Count(0)})) return std::nullopt;
  double v = 0.0, err = 0.0;
  for (std::size_t r = pl.omega + 1; r < t.n(); ++r) {
    ExactScalar p = prefix_prob(t, {static_cast<Degree>(r)});
    v += static_cast<double>(r) * p.to_double();
    err += static_cast<double>(r) * p.error_bound();
  }
  return std::make_pair(v, err);
}

struct TreeAcc {
  std::map<std::uint64_t, std::uint64_t> height;
  std::uint64_t sum_delta = 0;
  unsigned __int128 sum_delta2 = 0;
  std::uint64_t at_root = 0, on_spine = 0;
  std::vector<std::uint64_t> delta_hist = std::vector<std::uint64_t>(20);
  std::vector<std::array<std::uint64_t, 4>> patterns;  // match, no_match, undefined, insufficient
  Histogram fringe;
  std::uint64_t fringe_undefined = 0;
  std::vector<Histogram> approx;
  std::uint64_t approx_undefined = 0;

  void merge(const TreeAcc& o) {
    for (auto& [t, c] : o.height) height[t] += c;
    sum_delta += o.sum_delta;
    sum_delta2 += o.sum_delta2;
    at_root += o.at_root;
    on_spine += o.on_spine;
    for (std::size_t i = 0; i < delta_hist.size(); ++i) delta_hist[i] += o.delta_hist[i];
    for (std::size_t i = 0; i < patterns.size(); ++i)
      for (int j = 0; j < 4; ++j) patterns[i][j] += o.patterns[i][j];
    for (auto& [k, c] : o.fringe) fringe[k] += c;
    fringe_undefined += o.fringe_undefined;
    for (std::size_t i = 0; i < approx.size(); ++i)
      for (auto& [k, c] : o.approx[i]) approx[i][k] += c;
    approx_undefined += o.approx_undefined;
  }
};

struct LimitAcc {
  Histogram fringe;
  std::uint64_t overflow = 0;
  std::vector<Histogram> approx;
  std::vector<std::uint64_t> insufficient;

  void merge(const LimitAcc& o) {
    for (auto& [k, c] : o.fringe) fringe[k] += c;
    overflow += o.overflow;
    for (std::size_t i = 0; i < approx.size(); ++i) {
      for (auto& [k, c] : o.approx[i]) approx[i][k] += c;
      insufficient[i] += o.insufficient[i];
    }
  }
};

std::pair<double, double> wilson(double successes, double n, double z = 1.959963984540054) {
  if (n <= 0) return {0.0, 1.0};
  double p = successes / n;
  double denom = 1.0 + z * z / n;
  double center = (p + z * z / (2 * n)) / denom;
  double half = z * std::sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom;
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

class Runner {
 public:
  explicit Runner(const ExperimentConfig& cfg) : cfg_(cfg), law_(classify(builtin(cfg.family))) {
    if (cfg.replications < 1) throw Error(ErrorKind::validation, "replications must be at least 1");
    if (cfg.n_grid.empty()) throw Error(ErrorKind::validation, "n_grid must not be empty");
    if (cfg.statistics.empty()) throw Error(ErrorKind::validation, "no statistics requested");
    for (std::size_t n : cfg.n_grid)
      if (n < 1) throw Error(ErrorKind::validation, "grid sizes must be positive");
    omega_schedule(cfg.omega, 1);
    if (want(Statistic::height_dist) && law_.type() == WeightType::I)
      throw Error(ErrorKind::validation, "the height experiment needs weights of type II or III");
    if (want(Statistic::tv_extended_fringe) && law_.type() != WeightType::I)
      throw Error(ErrorKind::validation, "H_k against the sin-tree needs weights of type I");
    if (want(Statistic::tv_vs_limit)) {
      if (law_.type() == WeightType::I)
        throw Error(ErrorKind::validation, "marginals against the truncated limit need weights of type II or III");
      if (cfg.address_sets.empty()) throw Error(ErrorKind::validation, "tv_vs_limit needs address sets");
    }
    if (want(Statistic::pattern_probs) && cfg.patterns.empty())
      throw Error(ErrorKind::validation, "pattern_probs needs patterns");
    for (const auto& p : cfg.patterns) {
      if (p.event.thresholds.size() > 1)
        throw Error(ErrorKind::unsupported_pattern, "at most one threshold ancestor is supported");
      if (p.event.shape.window) throw Error(ErrorKind::validation, "pattern shapes must be fully materialized");
      if (!p.event.thresholds.empty() && p.event.thresholds.front().kind == SpineThreshold::Kind::above &&
          p.event.thresholds.front().level != p.event.shape.spine.size())
        throw Error(ErrorKind::validation, "pattern \"" + p.name + "\": an omega threshold must sit at the top of the shape");
    }
    if (want(Statistic::tv_extended_fringe) || want(Statistic::tv_vs_limit))
      limit_.emplace(law_, cfg.gw_cap);
    report_.config = cfg.to_json();
  }

  ExperimentReport run() {
    for (std::size_t g = 0; g < cfg_.n_grid.size(); ++g) run_grid(g);
    return std::move(report_);
  }

 private:
  bool want(Statistic s) const { return cfg_.statistics.count(s) > 0; }

  void row(std::size_t n, std::string stat, double v, double se, std::uint64_t size, double lo, double hi) {
    report_.rows.push_back({n, std::move(stat), v, se, size, lo, hi});
  }
  void prediction(std::size_t n, std::string stat, double v, double err = 0.0) {
    row(n, std::move(stat), v, err, 0, v - err, v + err);
  }
  void proportion(std::size_t n, std::string stat, std::uint64_t hits, std::uint64_t total) {
    double p = total ? static_cast<double>(hits) / total : 0.0;
    auto [lo, hi] = wilson(static_cast<double>(hits), static_cast<double>(total));
    row(n, std::move(stat), p, total ? std::sqrt(p * (1 - p) / total) : 0.0, total, lo, hi);
  }
  void tv_row(std::size_t n, const std::string& stat, const TvEstimate& e) {
    row(n, stat, e.estimate, (e.ci_high - e.ci_low) / (2 * 1.959963984540054), e.size_a, e.ci_low, e.ci_high);
    if (e.undersampled)
      report_.warnings.push_back("n=" + std::to_string(n) + " " + stat + ": undersampled support, " +
                                 std::to_string(e.distinct) + " distinct outcomes");
  }

  std::vector<PatternPlan> plan_patterns(std::size_t n, std::uint64_t omega) {
    std::vector<PatternPlan> plans;
    for (const auto& p : cfg_.patterns) {
      PatternPlan pl;
      pl.spec = &p;
      pl.event = p.event;
      pl.height = static_cast<std::uint32_t>(p.event.shape.spine.size());
      if (!pl.event.thresholds.empty() && pl.event.thresholds.front().kind == SpineThreshold::Kind::above) {
        pl.truncated = true;
        if (p.scheduled_omega) pl.event.thresholds.front().omega = omega;
        pl.omega = pl.event.thresholds.front().omega;
      }
      pl.pattern = pl.event.pattern();
      if (p.free_center)
        std::erase_if(pl.pattern.constraints, [](const auto& c) { return c.first.level == 0; });
      plans.push_back(std::move(pl));
    }
    (void)n;
    return plans;
  }

  void exact_patterns(std::size_t n, const std::vector<PatternPlan>& plans) {
    std::vector<std::size_t> cols;
    for (const auto& pl : plans) {
      std::size_t len = pl.spec->free_center ? 1 : flatten(pl.event.shape).tree.size();
      if (len <= n) cols.push_back(n - len);
    }
    auto table = PartitionColumns<long double>::from_weights(tilted_weights(law_, n), n,
                                                              std::numeric_limits<long double>::epsilon(), cols);
    for (const auto& pl : plans) {
      const std::string stat = "pattern." + pl.spec->name + ".exact";
      if (pl.truncated) {
        // a lower spine vertex above omega would stop the truncation earlier
        bool blocked = false;
        for (std::uint32_t i = 0; i + 1 < pl.height; ++i) {
          auto d = pl.event.shape.spine[i].pair.degree();
          blocked = blocked || !d || *d > pl.omega;
        }
        if (blocked) {
          prediction(n, stat, 0.0);
          continue;
        }
      }
      if (pl.spec->free_center) {
        if (auto v = free_center_exact(table, pl)) prediction(n, stat, v->first, v->second);
        continue;
      }
      try {
        ExactScalar v = fringe_event_prob(table, pl.event);
        prediction(n, stat, v.to_double(), v.error_bound());
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::unsupported_pattern) throw;
        report_.warnings.push_back("n=" + std::to_string(n) + " " + stat + ": " + e.what());
      }
    }
  }

  std::optional<DiscreteSampler> dtilde(std::size_t n, std::uint64_t omega) {
    if (omega + 1 >= n) {
      report_.warnings.push_back("n=" + std::to_string(n) + " tv_vs_limit: no root degree can exceed omega");
      return std::nullopt;
    }
    std::map<std::uint64_t, double> pmf;
    double total = 0.0;
    for (auto& [k, p] : dtilde_law(law_, n, omega, cfg_.dtilde_mode)) {
      double v = p.to_double();
      if (v > 0) pmf[k] = v;
      total += v;
    }
    for (auto& [k, v] : pmf) v /= total;
    return DiscreteSampler::from_pmf(pmf);
  }

  void run_grid(std::size_t g) {
    const std::size_t n = round_admissible(law_.weights(), cfg_.n_grid[g]);
    const std::uint64_t omega = omega_schedule(cfg_.omega, n);
    const std::uint64_t reps = cfg_.replications;
    prediction(n, "omega", static_cast<double>(omega));

    SamplerOptions opt;
    opt.strategy = cfg_.strategy;
    SgtSampler sampler(law_, n, opt);
    std::vector<PatternPlan> plans;
    if (want(Statistic::pattern_probs)) plans = plan_patterns(n, omega);

    std::vector<TreeAcc> accs(std::max(1u, cfg_.threads));
    for (auto& a : accs) {
      a.patterns.resize(plans.size());
      a.approx.resize(cfg_.address_sets.size());
    }
    parallel_for(reps, cfg_.threads, [&](unsigned w, std::uint64_t lo, std::uint64_t hi) {
      TreeAcc& acc = accs[w];
      for (std::uint64_t r = lo; r < hi; ++r) {
        Rng rng(cfg_.seed, stream_id(kStageTrees, g, r));
        PlaneTree t = sampler.sample(rng);
        VertexRef v0{rng.uniform_index(n)};
        observe_tree(t, v0, n, omega, plans, acc);
      }
    });
    for (std::size_t w = 1; w < accs.size(); ++w) accs[0].merge(accs[w]);
    const TreeAcc& acc = accs[0];
    auto& cens = report_.censoring[n];

    if (want(Statistic::height_dist)) height_rows(n, g, acc);
    if (want(Statistic::max_degree)) max_degree_rows(n, acc);
    if (want(Statistic::pattern_probs)) {
      for (std::size_t i = 0; i < plans.size(); ++i) {
        const auto& c = acc.patterns[i];
        const std::string base = "pattern." + plans[i].spec->name;
        proportion(n, base + ".freq", c[0], reps);
        proportion(n, base + ".undefined", c[2], reps);
        proportion(n, base + ".insufficient_window", c[3], reps);
        cens[base] = {{"match", c[0]}, {"no_match", c[1]}, {"undefined", c[2]}, {"insufficient_window", c[3]}};
        if (auto lim = pattern_limit(law_, plans[i].event, plans[i].spec->free_center))
          prediction(n, base + ".limit", *lim);
      }
      if (n <= cfg_.exact_cap) exact_patterns(n, plans);
    }
    if (want(Statistic::tv_extended_fringe) || want(Statistic::tv_vs_limit)) limit_rows(n, g, omega, acc);
  }

  void observe_tree(const PlaneTree& t, VertexRef v0, std::size_t n, std::uint64_t omega,
                    const std::vector<PatternPlan>& plans, TreeAcc& acc) const {
    const auto parents = t.parents();
    const auto& deg = t.degrees();
    if (want(Statistic::height_dist)) {
      std::uint64_t h = 0;
      for (std::size_t u = v0.index; parents[u] != kNoParent; u = parents[u]) ++h;
      ++acc.height[h];
    }
    if (want(Statistic::max_degree)) {
      Degree delta = *std::max_element(deg.begin(), deg.end());
      acc.sum_delta += delta;
      acc.sum_delta2 += static_cast<unsigned __int128>(delta) * delta;
      if (deg[0] == delta) ++acc.at_root;
      for (std::size_t u = parents[v0.index]; u != kNoParent; u = parents[u])
        if (deg[u] == delta) {
          ++acc.on_spine;
          break;
        }
      std::size_t bin = std::min<std::size_t>(19, static_cast<std::size_t>(20.0 * delta / n));
      ++acc.delta_hist[bin];
    }
    for (std::size_t i = 0; i < plans.size(); ++i) {
      const PatternPlan& pl = plans[i];
      auto h = pl.truncated ? truncate_at_large_ancestor(t, parents, v0, pl.omega)
                            : extended_fringe(t, parents, v0, pl.height);
      if (!h) {
        ++acc.patterns[i][2];
        continue;
      }
      switch (matches(*h, pl.pattern)) {
        case Match::yes: ++acc.patterns[i][0]; break;
        case Match::no: ++acc.patterns[i][1]; break;
        case Match::insufficient_window: ++acc.patterns[i][3]; break;
      }
    }
    if (want(Statistic::tv_extended_fringe)) {
      auto h = extended_fringe(t, parents, v0, cfg_.k);
      if (h) ++acc.fringe[histogram_key(encode(*h))];
      else {
        ++acc.fringe[kUndefined];
        ++acc.fringe_undefined;
      }
    }
    if (want(Statistic::tv_vs_limit)) {
      auto h = truncate_at_large_ancestor(t, parents, v0, omega);
      if (!h) ++acc.approx_undefined;
      for (std::size_t s = 0; s < cfg_.address_sets.size(); ++s) {
        bool insufficient = false;
        std::string key = h ? observation_key(*h, cfg_.address_sets[s], insufficient) : kUndefined;
        ++acc.approx[s][key];
      }
    }
  }

  void height_rows(std::size_t n, std::size_t g, const TreeAcc& acc) {
    const std::uint64_t reps = cfg_.replications;
    const double mu = law_.mu_double();
    std::uint64_t root = acc.height.count(0) ? acc.height.at(0) : 0;
    for (auto& [t, c] : acc.height) proportion(n, "height.pmf[" + std::to_string(t) + "]", c, reps);
    proportion(n, "height.root_mass", root, reps);
    std::vector<double> pmf{0.0};
    double mass = 0.0;
    for (std::uint64_t t = 1; t < 100000; ++t) {
      double p = height_limit_pmf(mu, t);
      pmf.push_back(p);
      mass += p;
      if (1.0 - mass < 1e-15 && p < 1e-15) break;
    }
    const std::uint64_t shown = std::max<std::uint64_t>(acc.height.empty() ? 0 : acc.height.rbegin()->first, 1);
    for (std::uint64_t t = 1; t <= shown && t < pmf.size(); ++t)
      prediction(n, "height.limit[" + std::to_string(t) + "]", pmf[t]);
    std::map<std::uint64_t, std::uint64_t> positive;
    for (auto& [t, c] : acc.height)
      if (t >= 1) positive.emplace(t, c);
    if (positive.empty()) return;
    Rng boot(cfg_.seed, stream_id(kStageBootstrap, g, 0));
    tv_row(n, "height.tv", tv_against_pmf(positive, pmf, boot, cfg_.bootstrap));
  }

  void max_degree_rows(std::size_t n, const TreeAcc& acc) {
    const double reps = static_cast<double>(cfg_.replications);
    const double nn = static_cast<double>(n);
    double mean = static_cast<double>(acc.sum_delta) / reps / nn;
    double m2 = static_cast<double>(acc.sum_delta2) / reps / (nn * nn);
    double var = std::max(0.0, m2 - mean * mean) * (reps > 1 ? reps / (reps - 1) : 0.0);
    double se = std::sqrt(var / reps);
    row(n, "max_degree.ratio.mean", mean, se, cfg_.replications, mean - 1.959963984540054 * se,
        mean + 1.959963984540054 * se);
    prediction(n, "max_degree.ratio.limit", 1.0 - law_.mu_double());
    proportion(n, "max_degree.at_root", acc.at_root, cfg_.replications);
    proportion(n, "max_degree.on_spine", acc.on_spine, cfg_.replications);
    for (std::size_t b = 0; b < acc.delta_hist.size(); ++b) {
      char name[64];
      std::snprintf(name, sizeof name, "max_degree.hist[%.2f,%.2f)", b / 20.0, (b + 1) / 20.0);
      proportion(n, name, acc.delta_hist[b], cfg_.replications);
    }
  }

  void limit_rows(std::size_t n, std::size_t g, std::uint64_t omega, const TreeAcc& acc) {
    const std::uint64_t reps = cfg_.replications;
    auto& cens = report_.censoring[n];
    std::optional<DiscreteSampler> dt;
    if (want(Statistic::tv_vs_limit)) dt = dtilde(n, omega);
    std::vector<LimitAcc> laccs(std::max(1u, cfg_.threads));
    for (auto& l : laccs) {
      l.approx.resize(cfg_.address_sets.size());
      l.insufficient.resize(cfg_.address_sets.size());
    }
    std::uint64_t approx_overflow = 0;
    {
      std::vector<std::uint64_t> overflow(laccs.size());
      parallel_for(reps, cfg_.threads, [&](unsigned w, std::uint64_t lo, std::uint64_t hi) {
        LimitAcc& la = laccs[w];
        for (std::uint64_t r = lo; r < hi; ++r) {
          Rng rng(cfg_.seed, stream_id(kStageLimit, g, r));
          if (want(Statistic::tv_extended_fringe)) {
            auto h = limit_->limit_fringe(cfg_.k, rng);
            if (h) ++la.fringe[histogram_key(encode(*h))];
            else ++la.overflow;
          }
          if (dt) {
            auto pt = limit_->tbar_star_n(*dt, cfg_.window, rng);
            if (!pt) {
              ++overflow[w];
              continue;
            }
            for (std::size_t s = 0; s < cfg_.address_sets.size(); ++s) {
              bool insufficient = false;
              std::string key = observation_key(*pt, cfg_.address_sets[s], insufficient);
              if (insufficient) ++la.insufficient[s];
              else ++la.approx[s][key];
            }
          }
        }
      });
      for (auto o : overflow) approx_overflow += o;
    }
    for (std::size_t w = 1; w < laccs.size(); ++w) laccs[0].merge(laccs[w]);
    const LimitAcc& la = laccs[0];
    std::uint64_t stream = 1;
    if (want(Statistic::tv_extended_fringe)) {
      cens["tv_fringe.finite"] = {{"ok", reps - acc.fringe_undefined}, {"undefined", acc.fringe_undefined}};
      cens["tv_fringe.limit"] = {{"ok", reps - la.overflow}, {"gw_overflow", la.overflow}};
      Rng boot(cfg_.seed, stream_id(kStageBootstrap, g, stream++));
      if (!la.fringe.empty())
        tv_row(n, "tv_fringe.k=" + std::to_string(cfg_.k), tv_plugin(acc.fringe, la.fringe, boot, cfg_.bootstrap));
    }
    if (want(Statistic::tv_vs_limit)) {
      cens["tv_approx.finite"] = {{"ok", reps - acc.approx_undefined}, {"undefined", acc.approx_undefined}};
      if (!dt) return;
      for (std::size_t s = 0; s < cfg_.address_sets.size(); ++s) {
        const std::string base = "tv_approx." + cfg_.address_sets[s].name;
        std::uint64_t ok = reps - approx_overflow - la.insufficient[s];
        cens[base + ".limit"] = {
            {"ok", ok}, {"gw_overflow", approx_overflow}, {"insufficient_window", la.insufficient[s]}};
        Rng boot(cfg_.seed, stream_id(kStageBootstrap, g, stream++));
        if (!la.approx[s].empty()) tv_row(n, base, tv_plugin(acc.approx[s], la.approx[s], boot, cfg_.bootstrap));
      }
    }
  }

  const ExperimentConfig& cfg_;
  OffspringLaw law_;
  std::optional<LimitSampler> limit_;
  ExperimentReport report_;
};

}  // namespace

std::map<Degree, ExactScalar> dtilde_law(const OffspringLaw& law, std::size_t n, std::uint64_t omega,
                                         ScalarMode mode) {
  if (n < 2) throw Error(ErrorKind::validation, "dtilde needs n >= 2");
  std::vector<std::size_t> cols{n - 1};
  switch (mode) {
    case ScalarMode::rational:
      return dtilde_dist(PartitionColumns<Rational>::build(law.weights(), n, cols), omega);
    case ScalarMode::real:
      return dtilde_dist(PartitionColumns<Real>::build(law.weights(), n, cols), omega);
    case ScalarMode::extended:
      break;
  }
  return dtilde_dist(PartitionColumns<long double>::from_weights(tilted_weights(law, n), n,
                                                                 std::numeric_limits<long double>::epsilon(), cols),
                     omega);
}

std::vector<std::string> gate_failures(const ExperimentReport& r) {
  std::vector<std::string> out;
  const std::uint64_t reps = r.config.value("replications", std::uint64_t{0});
  for (const auto& [n, groups] : r.censoring)
    for (const auto& [group, cats] : groups) {
      std::uint64_t sum = 0;
      for (const auto& [cat, c] : cats) sum += c;
      if (sum != reps)
        out.push_back("n=" + std::to_string(n) + " " + group + ": categories sum to " + std::to_string(sum) +
                      " of " + std::to_string(reps));
    }
  const std::string suffix = ".freq";
  for (const auto& row : r.rows) {
    if (row.statistic.rfind("pattern.", 0) != 0 || row.statistic.size() <= suffix.size() ||
        row.statistic.compare(row.statistic.size() - suffix.size(), suffix.size(), suffix) != 0)
      continue;
    const std::string base = row.statistic.substr(0, row.statistic.size() - suffix.size());
    const ReportRow* exact = r.find(row.n, base + ".exact");
    if (!exact || row.sample_size == 0) continue;
    auto [lo, hi] = wilson(row.value * static_cast<double>(row.sample_size), static_cast<double>(row.sample_size),
                           3.2905267314919255);
    const double slack = 1e-12 + exact->stderr_;
    if (exact->value < lo - slack || exact->value > hi + slack) {
      std::ostringstream msg;
      msg << "n=" << row.n << " " << base << ": exact " << exact->value << " outside 99.9% interval [" << lo << ", "
          << hi << "]";
      out.push_back(msg.str());
    }
  }
  return out;
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
  auto start = std::chrono::steady_clock::now();
  ExperimentReport r = Runner(cfg).run();
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

ExperimentReport run_height_experiment(ExperimentConfig cfg) {
  cfg.statistics = {Statistic::height_dist};
  return run_experiment(cfg);
}

ExperimentReport run_max_degree_experiment(ExperimentConfig cfg) {
  cfg.statistics = {Statistic::max_degree};
  return run_experiment(cfg);
}

ExperimentReport run_pattern_experiment(ExperimentConfig cfg) {
  cfg.statistics = {Statistic::pattern_probs};
  return run_experiment(cfg);
}

ExperimentReport run_tv_experiment(ExperimentConfig cfg) {
  auto law = classify(builtin(cfg.family));
  cfg.statistics = {law.type() == WeightType::I ? Statistic::tv_extended_fringe : Statistic::tv_vs_limit};
  return run_experiment(cfg);
}

}  // namespace sgt
