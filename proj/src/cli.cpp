#include "sgt/cli.hpp"

#include "sgt/errors.hpp"
#include "sgt/exact.hpp"
#include "sgt/lab.hpp"
#include "sgt/numeric.hpp"
#include "sgt/samplers.hpp"
#include "sgt/selftest.hpp"
#include "sgt/weights.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <new>
#include <random>
#include <sstream>
#include <thread>

namespace sgt {

namespace {

using ojson = nlohmann::ordered_json;

struct FamilyOpts {
  std::string name = "uniform";
  std::string alpha;
  std::string weights;
  std::string file;
  CLI::Option* name_opt = nullptr;

  void add(CLI::App* app) {
    name_opt = app->add_option("--family", name,
                               "uniform, catalan, binary, motzkin, cayley, powerlaw, factorial, finite or file");
    app->add_option("--alpha", alpha, "exponent for powerlaw and factorial");
    app->add_option("--weights", weights, "comma-separated w0,w1,... for family finite");
    app->add_option("--weights-file", file, "weight file for family file");
  }
  bool given() const { return name_opt && name_opt->count() > 0; }
  FamilySpec spec() const {
    FamilySpec s;
    s.name = name;
    if (!alpha.empty()) s.alpha = alpha;
    if (!weights.empty()) s.weights = weights;
    if (!file.empty()) s.file = file;
    if (s.name == "finite" && !s.weights && !file.empty()) s.name = "file";
    return s;
  }
};

struct Globals {
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> precision;
  std::string out_path;
  bool json = false;
  unsigned threads = 1;
  CLI::Option* threads_opt = nullptr;
};

// Integer JSON when the rational is integral, a double otherwise.
ojson number_json(const std::optional<Rational>& exact, const Real& approx) {
  if (exact && boost::multiprecision::denominator(*exact) == 1) {
    Integer num = boost::multiprecision::numerator(*exact);
    if (num >= 0 && num <= Integer(INT64_MAX)) return num.convert_to<std::int64_t>();
  }
  if (exact) return exact->convert_to<double>();
  return approx.convert_to<double>();
}

ojson scalar_json(const ExactScalar& v) {
  ojson j;
  j["value"] = v.to_string();
  if (!v.is_exact()) j["error"] = v.error_bound();
  return j;
}

// {"<key>": value} plus an error bound when approximate.
ojson scalar_result(const std::string& key, const ExactScalar& v) {
  ojson j;
  j[key] = v.to_string();
  if (!v.is_exact()) j["error"] = v.error_bound();
  return j;
}

ojson dist_json(const std::map<Degree, ExactScalar>& d) {
  ojson j = ojson::object();
  for (const auto& [k, p] : d) j[std::to_string(k)] = p.is_exact() ? ojson(p.to_string()) : scalar_json(p);
  return j;
}

void print_human(std::ostream& os, const ojson& j, const std::string& indent = "") {
  if (!j.is_object()) {
    os << indent << (j.is_string() ? j.get<std::string>() : j.dump()) << "\n";
    return;
  }
  for (const auto& [k, v] : j.items()) {
    if (v.is_object()) {
      os << indent << k << ":\n";
      print_human(os, v, indent + "  ");
    } else if (v.is_string()) {
      os << indent << k << ": " << v.get<std::string>() << "\n";
    } else {
      os << indent << k << ": " << v.dump() << "\n";
    }
  }
}

std::uint64_t require_seed(const Globals& g, bool terminal) {
  if (g.seed) return *g.seed;
  if (!terminal) throw Error(ErrorKind::usage, "--seed is required when output is not a terminal");
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) | rd();
}

template <class F>
void parallel_indices(std::uint64_t count, unsigned threads, F&& f) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::uint64_t>(count, 1))));
  if (threads == 1) {
    for (std::uint64_t i = 0; i < count; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  std::exception_ptr first;
  std::mutex mu;
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back([&, t] {
      try {
        for (std::uint64_t i = t; i < count; i += threads) f(i);
      } catch (...) {
        std::lock_guard lock(mu);
        if (!first) first = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  if (first) std::rethrow_exception(first);
}

std::string error_line(int code, const std::string& kind, const std::string& message) {
  nlohmann::ordered_json j;
  j["error"] = {{"code", code}, {"kind", kind}, {"message", message}};
  return j.dump();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err, bool terminal) {
  CLI::App app{"Simply generated trees: sampling, exact laws and local-limit experiments", "sgt"};
  app.require_subcommand(1, 1);
  Globals g;
  app.add_option("--seed", g.seed, "random seed (required for sampling unless stdout is a terminal)");
  app.add_option("--precision", g.precision, "mantissa bits for high-precision reals (default SGT_PRECISION or 128)")
      ->check(CLI::Range(16u, 1u << 20));
  app.add_option("--out", g.out_path, "write results to this file instead of stdout");
  app.add_flag("--json", g.json, "force JSON output");
  g.threads_opt = app.add_option("--threads", g.threads, "worker threads")->check(CLI::Range(1u, 1024u));

  std::ostringstream buf;
  bool human = false;
  int status = 0;
  std::function<void()> action;

  // classify
  auto* classify_cmd = app.add_subcommand("classify", "offspring law of a weight sequence");
  classify_cmd->fallthrough();
  FamilyOpts classify_fam;
  classify_fam.add(classify_cmd);
  classify_cmd->callback([&] {
    action = [&] {
      WeightSequence w = builtin(classify_fam.spec());
      OffspringLaw law = classify(w);
      ojson j;
      j["type"] = type_name(law.type());
      j["tau"] = law.tau_exact() ? to_string(*law.tau_exact()) : to_string(law.tau(), 20);
      j["mu"] = number_json(law.mu_exact(), law.mu());
      if (law.sigma2_infinite())
        j["sigma2"] = "inf";
      else
        j["sigma2"] = number_json(law.sigma2_exact(), law.sigma2());
      if (auto s = span(w); s > 1) j["span"] = s;
      if (human)
        print_human(buf, j);
      else
        buf << j.dump() << "\n";
    };
  });

  // sample
  auto* sample_cmd = app.add_subcommand("sample", "draw conditioned trees with n vertices");
  sample_cmd->fallthrough();
  FamilyOpts sample_fam;
  sample_fam.add(sample_cmd);
  std::size_t sample_n = 0;
  std::uint64_t sample_count = 1;
  std::string sample_strategy = "auto";
  sample_cmd->add_option("--n", sample_n, "number of vertices")->required();
  sample_cmd->add_option("--count", sample_count, "number of trees");
  sample_cmd->add_option("--strategy", sample_strategy, "auto, rejection-cycle, exact-sequential or exact-split");
  sample_cmd->callback([&] {
    action = [&] {
      std::uint64_t seed = require_seed(g, terminal);
      OffspringLaw law = classify(builtin(sample_fam.spec()));
      SamplerOptions opt;
      opt.strategy = parse_strategy(sample_strategy);
      SgtSampler sampler(law, sample_n, opt);
      std::vector<std::string> trees(sample_count);
      parallel_indices(sample_count, g.threads, [&](std::uint64_t i) {
        Rng rng(seed, i);
        trees[i] = sampler.sample(rng).to_string();
      });
      if (g.json) {
        buf << ojson(trees).dump() << "\n";
      } else {
        for (const auto& t : trees) buf << t << "\n";
      }
    };
  });

  // sample-limit
  auto* limit_cmd = app.add_subcommand("sample-limit", "draw windowed local-limit objects");
  limit_cmd->fallthrough();
  FamilyOpts limit_fam;
  limit_fam.add(limit_cmd);
  std::string regime = "sin";
  std::uint32_t window = 5;
  std::uint64_t limit_count = 1;
  std::size_t limit_n = 0;
  std::optional<std::uint64_t> limit_omega;
  std::string limit_mode = "real";
  std::uint64_t gw_cap = 1000000;
  limit_cmd->add_option("--regime", regime, "sin, condensation, tbar, pruned or modified-gw")
      ->check(CLI::IsMember({"sin", "condensation", "tbar", "pruned", "modified-gw"}));
  limit_cmd->add_option("--window", window, "window size m");
  limit_cmd->add_option("--count", limit_count, "number of draws");
  limit_cmd->add_option("--n", limit_n, "tree size for the dtilde law (tbar, pruned, modified-gw)");
  limit_cmd->add_option("--omega", limit_omega, "threshold for the dtilde law (default ceil(n^(1/4)))");
  limit_cmd->add_option("--mode", limit_mode, "scalar mode for the dtilde law: rational, real or extended");
  limit_cmd->add_option("--gw-cap", gw_cap, "size cap for Galton-Watson subtrees");
  limit_cmd->callback([&] {
    action = [&] {
      std::uint64_t seed = require_seed(g, terminal);
      FamilySpec fam = limit_fam.spec();
      if (!limit_fam.given() && regime != "sin") {
        fam.name = "powerlaw";
        if (!fam.alpha) fam.alpha = "3";
      }
      OffspringLaw law = classify(builtin(fam));
      LimitSampler ls(law, gw_cap);
      std::optional<DiscreteSampler> dtilde;
      if (regime == "tbar" || regime == "pruned" || regime == "modified-gw") {
        if (limit_n < 2) throw Error(ErrorKind::usage, "--n >= 2 is required for regime " + regime);
        std::uint64_t omega = limit_omega ? *limit_omega : omega_schedule("quarter_power", limit_n);
        std::map<std::uint64_t, double> pmf;
        double total = 0.0;
        for (const auto& [k, p] : dtilde_law(law, limit_n, omega, parse_mode(limit_mode))) {
          double v = p.to_double();
          if (v > 0) pmf[k] = v;
          total += v;
        }
        for (auto& [k, v] : pmf) v /= total;
        dtilde = DiscreteSampler::from_pmf(pmf);
      }
      std::vector<ojson> draws(limit_count);
      parallel_indices(limit_count, g.threads, [&](std::uint64_t i) {
        Rng rng(seed, i);
        ojson j;
        if (regime == "modified-gw") {
          auto m = ls.modified_gw(*dtilde, rng);
          if (!m) {
            draws[i] = {{"censored", "gw_overflow"}};
            return;
          }
          j["tree"] = m->tree.to_string();
          j["tip"] = m->tip.index;
          j["tip_height"] = m->tip_height;
          draws[i] = j;
          return;
        }
        std::optional<PointedTree> pt;
        if (regime == "sin")
          pt = ls.sin_tree(window, rng);
        else if (regime == "condensation")
          pt = ls.condensation_tree(window, rng);
        else if (regime == "tbar")
          pt = ls.tbar_star_n(*dtilde, window, rng);
        else
          pt = ls.pruned_star_n(*dtilde, window, rng);
        if (!pt) {
          draws[i] = {{"censored", "gw_overflow"}};
          return;
        }
        draws[i] = ojson::parse(to_json(*pt).dump());
        if (human) draws[i] = encode(*pt);
      });
      if (g.json) {
        buf << ojson(draws).dump() << "\n";
      } else {
        for (const auto& d : draws) buf << (d.is_string() ? d.get<std::string>() : d.dump()) << "\n";
      }
    };
  });

  // exact
  auto* exact_cmd = app.add_subcommand("exact", "exact laws from the partition function");
  exact_cmd->fallthrough();
  exact_cmd->require_subcommand(1, 1);
  FamilyOpts exact_fam;
  exact_fam.add(exact_cmd);
  std::size_t exact_n = 0;
  std::string exact_mode = "rational";
  exact_cmd->add_option("--n", exact_n, "number of vertices");
  exact_cmd->add_option("--mode", exact_mode, "rational, real or extended")
      ->check(CLI::IsMember({"rational", "real", "extended"}));
  auto need_n = [&] {
    if (exact_n == 0) throw Error(ErrorKind::usage, "--n is required");
  };
  auto emit = [&](const ojson& j) {
    if (human)
      print_human(buf, j);
    else
      buf << j.dump() << "\n";
  };
  auto engine = [&] { return ExactEngine(builtin(exact_fam.spec()), exact_n, parse_mode(exact_mode)); };

  auto* total_cmd = exact_cmd->add_subcommand("total", "total weight of n-vertex trees");
  total_cmd->fallthrough();
  total_cmd->callback([&] {
    action = [&] {
      need_n();
      emit(scalar_result("weight", engine().total_tree_weight()));
    };
  });

  auto* prefix_cmd = exact_cmd->add_subcommand("prefix", "probability of a prefix of the degree sequence");
  prefix_cmd->fallthrough();
  std::string prefix_degrees;
  prefix_cmd->add_option("--degrees", prefix_degrees, "comma-separated outdegrees")->required();
  prefix_cmd->callback([&] {
    action = [&] {
      need_n();
      emit(scalar_result("prob", engine().prefix_prob(parse_degrees(prefix_degrees))));
    };
  });

  auto* root_cmd = exact_cmd->add_subcommand("root-degree", "law of the root degree");
  root_cmd->fallthrough();
  root_cmd->callback([&] {
    action = [&] {
      need_n();
      ojson j;
      j["root_degree"] = dist_json(engine().root_degree_dist());
      emit(j);
    };
  });

  auto* dtilde_cmd = exact_cmd->add_subcommand("dtilde", "size-biased root degree conditioned to exceed omega");
  dtilde_cmd->fallthrough();
  std::optional<std::uint64_t> dtilde_omega;
  dtilde_cmd->add_option("--omega", dtilde_omega, "threshold (default ceil(n^(1/4)))");
  dtilde_cmd->callback([&] {
    action = [&] {
      need_n();
      std::uint64_t omega = dtilde_omega ? *dtilde_omega : omega_schedule("quarter_power", exact_n);
      OffspringLaw law = classify(builtin(exact_fam.spec()));
      ojson j;
      j["omega"] = omega;
      j["dtilde"] = dist_json(dtilde_law(law, exact_n, omega, parse_mode(exact_mode)));
      emit(j);
    };
  });

  auto* enum_cmd = exact_cmd->add_subcommand("enumerate", "every n-vertex tree with its weight");
  enum_cmd->fallthrough();
  enum_cmd->callback([&] {
    action = [&] {
      need_n();
      ojson trees = ojson::array();
      for (const auto& t : enumerate_trees(builtin(exact_fam.spec()), exact_n))
        trees.push_back({{"tree", t.tree.to_string()}, {"weight", to_string(t.weight)}});
      ojson j;
      j["trees"] = trees;
      if (human) {
        for (const auto& t : trees) buf << t["tree"].get<std::string>() << "  " << t["weight"].get<std::string>() << "\n";
      } else {
        buf << j.dump() << "\n";
      }
    };
  });

  auto* fringe_cmd = exact_cmd->add_subcommand("fringe", "probability of a pointed fringe event at a uniform vertex");
  fringe_cmd->fallthrough();
  std::string shape_text;
  std::optional<std::uint32_t> th_level;
  std::string th_kind = "at_least";
  std::uint64_t th_omega = 0, th_left = 0, th_right = 0;
  fringe_cmd->add_option("--shape", shape_text, "pointed tree as JSON, or @file")->required();
  fringe_cmd->add_option("--threshold-level", th_level, "spine level carrying a threshold");
  fringe_cmd->add_option("--threshold-kind", th_kind, "at_least or above")
      ->check(CLI::IsMember({"at_least", "above"}));
  fringe_cmd->add_option("--threshold-omega", th_omega, "outdegree bound for kind above");
  fringe_cmd->add_option("--left-min", th_left, "minimum left count for kind at_least");
  fringe_cmd->add_option("--right-min", th_right, "minimum right count for kind at_least");
  fringe_cmd->callback([&] {
    action = [&] {
      need_n();
      std::string text = shape_text;
      if (!text.empty() && text[0] == '@') {
        std::ifstream in(text.substr(1));
        if (!in) throw Error(ErrorKind::usage, "cannot read " + text.substr(1));
        text.assign(std::istreambuf_iterator<char>(in), {});
      }
      FringeEvent ev;
      try {
        ev.shape = pointed_from_json(nlohmann::json::parse(text));
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::validation, std::string("--shape: ") + e.what());
      }
      if (th_level) {
        SpineThreshold th;
        th.level = *th_level;
        th.kind = th_kind == "above" ? SpineThreshold::Kind::above : SpineThreshold::Kind::at_least;
        th.omega = th_omega;
        th.left_min = th_left;
        th.right_min = th_right;
        ev.thresholds.push_back(th);
      }
      emit(scalar_result("prob", engine().fringe_event_prob(ev)));
    };
  });

  auto* forest_cmd = exact_cmd->add_subcommand("forest", "probability that l Galton-Watson trees have m vertices");
  forest_cmd->fallthrough();
  std::uint64_t forest_l = 0, forest_m = 0;
  forest_cmd->add_option("--l", forest_l, "number of trees")->required();
  forest_cmd->add_option("--m", forest_m, "total size")->required();
  forest_cmd->callback([&] {
    action = [&] {
      OffspringLaw law = classify(builtin(exact_fam.spec()));
      emit(scalar_result("prob", forest_count_prob(law, forest_l, forest_m)));
    };
  });

  // converge
  auto* conv_cmd = app.add_subcommand("converge", "run a convergence experiment from a JSON config");
  conv_cmd->fallthrough();
  std::string config_path, csv_path;
  conv_cmd->add_option("--config", config_path, "experiment config (JSON)")->required();
  conv_cmd->add_option("--csv", csv_path, "also write the flat CSV report here");
  conv_cmd->callback([&] {
    action = [&] {
      std::ifstream in(config_path);
      if (!in) throw Error(ErrorKind::usage, "cannot read " + config_path);
      nlohmann::json cj;
      try {
        cj = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::validation, std::string("config: ") + e.what());
      }
      ExperimentConfig cfg = ExperimentConfig::from_json(cj);
      if (g.seed) cfg.seed = *g.seed;
      if (g.threads_opt->count()) cfg.threads = g.threads;
      ExperimentReport report = run_experiment(cfg);
      if (!csv_path.empty()) {
        std::ofstream csv(csv_path);
        if (!csv) throw Error(ErrorKind::usage, "cannot write " + csv_path);
        csv << report.to_csv();
      }
      if (human) {
        buf << std::left << std::setw(8) << "n" << std::setw(44) << "statistic" << std::setw(14) << "value"
            << "stderr\n";
        for (const auto& r : report.rows)
          buf << std::setw(8) << r.n << std::setw(44) << r.statistic << std::setw(14) << r.value << r.stderr_ << "\n";
        for (const auto& w : report.warnings) buf << "warning: " << w << "\n";
      } else {
        buf << report.to_json().dump() << "\n";
      }
      auto failures = gate_failures(report);
      if (!failures.empty()) {
        std::string msg;
        for (const auto& f : failures) msg += (msg.empty() ? "" : "; ") + f;
        err << error_line(1, "gate", msg) << "\n";
        status = 1;
      }
    };
  });

  // selftest
  auto* self_cmd = app.add_subcommand("selftest", "exact engine against brute-force enumeration");
  self_cmd->fallthrough();
  FamilyOpts self_fam;
  self_fam.add(self_cmd);
  std::size_t self_n = 8;
  self_cmd->add_option("--n-max", self_n, "largest tree size")->check(CLI::Range(1, 12));
  self_cmd->callback([&] {
    action = [&] {
      auto fams = self_fam.given() ? std::vector<FamilySpec>{self_fam.spec()} : selftest_families();
      SelftestSummary s = run_selftest(fams, self_n);
      ojson j;
      j["checks"] = s.checks;
      j["ok"] = s.ok();
      ojson f = ojson::array();
      for (const auto& x : s.failures)
        f.push_back({{"family", x.family}, {"n", x.n}, {"check", x.check}, {"detail", x.detail}});
      j["failures"] = f;
      if (human) {
        buf << (s.ok() ? "ok" : "FAILED") << ": " << s.checks << " checks, " << s.failures.size() << " failures\n";
        for (const auto& x : s.failures) buf << "  " << x.family << " n=" << x.n << " " << x.check << ": " << x.detail << "\n";
      } else {
        buf << j.dump() << "\n";
      }
      if (!s.ok()) status = 1;
    };
  });

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
      out << app.help();
      return 0;
    } catch (const CLI::CallForAllHelp&) {
      out << app.help("", CLI::AppFormatMode::All);
      return 0;
    } catch (const CLI::ParseError& e) {
      throw Error(ErrorKind::usage, e.what());
    }
    human = terminal && !g.json;
    PrecisionScope prec(g.precision ? *g.precision : precision_from_env());
    if (action) action();
    if (g.out_path.empty()) {
      out << buf.str();
    } else {
      std::ofstream f(g.out_path, std::ios::binary);
      if (!f) throw Error(ErrorKind::usage, "cannot write " + g.out_path);
      f << buf.str();
    }
    return status;
  } catch (const Error& e) {
    err << error_line(exit_code(e.kind()), kind_name(e.kind()), e.what()) << "\n";
    return exit_code(e.kind());
  } catch (const std::bad_alloc&) {
    err << error_line(exit_code(ErrorKind::resource), kind_name(ErrorKind::resource), "out of memory") << "\n";
    return exit_code(ErrorKind::resource);
  } catch (const std::exception& e) {
    err << error_line(1, "internal", e.what()) << "\n";
    return 1;
  }
}

}  // namespace sgt
