#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sgt/exact.hpp"

#include <cmath>
#include <functional>
#include <map>
#include <set>

using namespace sgt;

namespace {

Rational tree_weight(const WeightSequence& w, const std::vector<Degree>& d) {
  Rational p = 1;
  for (Degree x : d) p *= *w.exact_weight(x);
  return p;
}

std::vector<std::pair<std::string, WeightSequence>> rational_families() {
  return {
      {"uniform", WeightSequence::uniform()},
      {"binary", WeightSequence::finite({{0, 1}, {2, 1}}, "binary")},
      {"motzkin", WeightSequence::finite({{0, 1}, {1, 1}, {2, 1}}, "motzkin")},
      {"cayley", WeightSequence::cayley()},
      {"powerlaw", WeightSequence::powerlaw(3)},
      {"mixed", WeightSequence::finite({{0, 1}, {1, 2}, {3, Rational(1, 2)}}, "mixed")},
  };
}

// Every pointed pattern T* of size <= 5, keyed by encoding.
std::map<std::string, PointedTree> small_patterns() {
  std::map<std::string, PointedTree> out;
  for (std::size_t n = 1; n <= 5; ++n)
    for (const auto& wt : enumerate_trees(WeightSequence::uniform(), n)) {
      auto depths = wt.tree.depths();
      for (std::size_t v = 0; v < n; ++v) {
        auto pt = extended_fringe(wt.tree, VertexRef{v}, depths[v]);
        REQUIRE(pt);
        out.emplace(encode(*pt), *pt);
      }
    }
  return out;
}

}  // namespace

TEST_CASE("partition table examples") {
  auto bin = PartitionTable<Rational>::build(WeightSequence::finite({{0, 1}, {2, 1}}, "b"), 3);
  CHECK(bin.z(2, 3) == 3);
  auto uni = PartitionTable<Rational>::build(WeightSequence::uniform(), 4);
  CHECK(uni.z(3, 4) == 20);
  for (std::size_t m = 0; m < 4; ++m)
    for (std::size_t j = 1; j <= 4; ++j) {
      // stars and bars
      Integer c = 1;
      for (std::size_t i = 0; i < j - 1; ++i) c = c * (m + j - 1 - i) / (i + 1);
      CHECK(uni.z(m, j) == Rational(c));
    }
  auto mix = PartitionTable<Rational>::build(WeightSequence::finite({{0, 3}, {1, 1}, {2, 1}}, "m"), 5);
  for (std::size_t j = 0; j <= 5; ++j) CHECK(mix.z(0, j) == pow(Rational(3), j));
  CHECK(uni.z(1, 0) == 0);
  CHECK(uni.z(0, 0) == 1);
}

TEST_CASE("total weight, prefix, root degree, dtilde examples") {
  auto uni = PartitionTable<Rational>::build(WeightSequence::uniform(), 4);
  CHECK(total_tree_weight(uni).exact() == 5);
  CHECK(total_tree_weight(PartitionTable<Rational>::build(WeightSequence::finite({{0, 1}, {1, 1}, {2, 1}}, "m"), 3))
            .exact() == 2);
  CHECK(total_tree_weight(PartitionTable<Rational>::build(WeightSequence::finite({{0, 1}, {2, 1}}, "b"), 3)).exact() ==
        1);
  CHECK(prefix_prob(uni, {0}).exact() == Rational(1, 2));
  CHECK(prefix_prob(uni, {3}).exact() == Rational(1, 20));
  CHECK(prefix_prob(uni, {3, 1}).exact() == 0);
  auto rd = root_degree_dist(uni);
  CHECK(rd.at(3).exact() == Rational(1, 5));
  CHECK(rd.count(0) == 0);
  auto dt = dtilde_dist(uni, 2);
  REQUIRE(dt.size() == 1);
  CHECK(dt.at(3).exact() == 1);
  auto d0 = dtilde_dist(uni, 0);
  for (auto& [k, p] : rd) CHECK(d0.at(k).exact() == p.exact());
  CHECK_THROWS_AS(dtilde_dist(uni, 3), Error);
  auto one = PartitionTable<Rational>::build(WeightSequence::uniform(), 1);
  CHECK(root_degree_dist(one).at(0).exact() == 1);
  CHECK_THROWS_AS(PartitionTable<Rational>::build(WeightSequence::uniform(), 0), Error);
  TableOptions small;
  small.max_entries = 100;
  CHECK_THROWS_AS(PartitionTable<Rational>::build(WeightSequence::uniform(), 20, small), Error);
}

TEST_CASE("fringe event examples") {
  auto uni = PartitionTable<Rational>::build(WeightSequence::uniform(), 4);
  PointedTree leaf;
  leaf.center = {0};
  leaf.height = Count(0);
  CHECK(fringe_event_prob(uni, FringeEvent{leaf, {}}).exact() == Rational(1, 2));
  // cherry pointed at its left leaf: only vertex 2 of the tree 1,2,0,0
  auto cherry = extended_fringe(PlaneTree::from_degrees({2, 0, 0}), VertexRef{1}, 1);
  REQUIRE(cherry);
  CHECK(fringe_event_prob(uni, FringeEvent{*cherry, {}}).exact() == Rational(1, 20));
  CHECK(prefix_prob(uni, {2, 0, 0}).exact() == Rational(1, 20));
  CHECK(prefix_prob(uni, {0, 0, 0, 0, 0}).exact() == 0);
}

TEST_CASE("enumerate_trees") {
  CHECK(enumerate_trees(WeightSequence::uniform(), 1).size() == 1);
  CHECK(enumerate_trees(WeightSequence::uniform(), 4).size() == 5);
  CHECK(enumerate_trees(WeightSequence::finite({{0, 1}, {2, 1}}, "b"), 5).size() == 2);
  CHECK(enumerate_trees(WeightSequence::uniform(), 8).size() == 429);
  CHECK_THROWS_AS(enumerate_trees(WeightSequence::uniform(), 13), Error);
}

TEST_CASE("tree law and root degree agree with enumeration") {
  for (auto& [name, w] : rational_families())
    for (std::size_t n = 1; n <= 9; ++n) {
      CAPTURE(name);
      CAPTURE(n);
      auto tbl = PartitionTable<Rational>::build(w, n);
      auto trees = enumerate_trees(w, n);
      Rational total = 0;
      for (auto& t : trees) total += t.weight;
      if (total == 0) continue;
      CHECK(total_tree_weight(tbl).exact() == total);
      std::map<Degree, Rational> root;
      for (auto& t : trees) {
        CHECK(t.weight == tree_weight(w, t.tree.degrees()));
        CHECK(prefix_prob(tbl, t.tree.degrees()).exact() == t.weight / (n * total));
        root[t.tree.degree(VertexRef{0})] += t.weight / total;
      }
      auto rd = root_degree_dist(tbl);
      Rational sum = 0;
      for (auto& [k, p] : rd) {
        CHECK(p.exact() == root[k]);
        sum += p.exact();
      }
      CHECK(sum == 1);
    }
}

TEST_CASE("fringe events agree with enumeration") {
  auto patterns = small_patterns();
  CHECK(patterns.size() == 99);
  for (auto& [name, w] : rational_families())
    for (std::size_t n = 1; n <= 9; ++n) {
      CAPTURE(name);
      CAPTURE(n);
      auto trees = enumerate_trees(w, n);
      if (trees.empty()) continue;
      auto tbl = PartitionTable<Rational>::build(w, n);
      Rational total = 0;
      std::map<std::string, Rational> mass;
      for (auto& t : trees) {
        total += t.weight;
        auto parents = t.tree.parents();
        auto depths = t.tree.depths();
        for (std::size_t v = 0; v < n; ++v)
          for (std::size_t h = 0; h <= depths[v]; ++h) {
            auto pt = extended_fringe(t.tree, parents, VertexRef{v}, h);
            if (pt->spine.size() + flatten(*pt).tree.size() > 12) continue;
            mass[encode(*pt)] += t.weight;
          }
      }
      for (auto& [key, pt] : patterns) {
        CAPTURE(key);
        Rational expect = mass.count(key) ? mass[key] / (n * total) : Rational(0);
        CHECK(fringe_event_prob(tbl, FringeEvent{pt, {}}).exact() == expect);
      }
    }
}

TEST_CASE("threshold events agree with enumeration") {
  auto patterns = small_patterns();
  std::vector<std::pair<std::string, WeightSequence>> fams = {
      {"uniform", WeightSequence::uniform()},
      {"motzkin", WeightSequence::finite({{0, 1}, {1, 1}, {2, 1}}, "motzkin")},
      {"mixed", WeightSequence::finite({{0, 1}, {1, 2}, {3, Rational(1, 2)}}, "mixed")},
  };
  std::size_t checked = 0, unsupported = 0;
  for (auto& [name, w] : fams)
    for (std::size_t n = 2; n <= 9; ++n) {
      auto trees = enumerate_trees(w, n);
      auto tbl = PartitionTable<Rational>::build(w, n);
      Rational total = 0;
      std::vector<std::pair<PointedTree, Rational>> fr;  // full H_h for h <= 4
      for (auto& t : trees) {
        total += t.weight;
        auto parents = t.tree.parents();
        auto depths = t.tree.depths();
        for (std::size_t v = 0; v < n; ++v)
          for (std::size_t h = 1; h <= std::min<std::size_t>(4, depths[v]); ++h)
            fr.emplace_back(*extended_fringe(t.tree, parents, VertexRef{v}, h), t.weight);
      }
      for (auto& [key, shape] : patterns)
        for (std::uint32_t level = 1; level <= shape.spine.size(); ++level) {
          const auto& pair = shape.spine[level - 1].pair;
          std::vector<SpineThreshold> ths;
          for (std::uint64_t dl = 0; dl <= 1; ++dl)
            for (std::uint64_t dr = 0; dr <= 1; ++dr)
              ths.push_back({level, SpineThreshold::Kind::at_least, pair.left.value() + dl, pair.right.value() + dr, 0});
          for (std::uint64_t om = 1; om <= 3; ++om) ths.push_back({level, SpineThreshold::Kind::above, 0, 0, om});
          for (auto& th : ths) {
            FringeEvent ev{shape, {th}};
            ExactScalar got(Rational(0));
            try {
              got = fringe_event_prob(tbl, ev);
            } catch (const Error& e) {
              CHECK(e.kind() == ErrorKind::unsupported_pattern);
              ++unsupported;
              continue;
            }
            auto pat = ev.pattern();
            Rational expect = 0;
            for (auto& [pt, wt] : fr)
              if (pt.spine.size() == shape.spine.size() && matches(pt, pat) == Match::yes) expect += wt;
            expect /= n * total;
            CAPTURE(name);
            CAPTURE(n);
            CAPTURE(key);
            CAPTURE(level);
            CHECK(got.exact() == expect);
            ++checked;
          }
        }
    }
  CHECK(checked > 1000);
  CHECK(unsupported > 0);
}

TEST_CASE("two thresholds are unsupported") {
  auto tbl = PartitionTable<Rational>::build(WeightSequence::uniform(), 6);
  auto pt = extended_fringe(PlaneTree::from_degrees({1, 1, 0}), VertexRef{2}, 2);
  FringeEvent ev{*pt, {{1, SpineThreshold::Kind::at_least, 0, 0, 0}, {2, SpineThreshold::Kind::at_least, 0, 0, 0}}};
  try {
    fringe_event_prob(tbl, ev);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::unsupported_pattern);
  }
}

TEST_CASE("forest_count_prob") {
  for (auto spec : {"uniform", "binary", "motzkin"}) {
    auto law = classify(builtin({spec, {}, {}, {}}));
    CHECK(forest_count_prob(law, 3, 3).exact() == pow(*law.exact_pmf(0), 3));
    CHECK(forest_count_prob(law, 1, 2).exact() == *law.exact_pmf(0) * *law.exact_pmf(1));
    // brute force over ordered forests of l trees with total size m
    for (std::uint64_t m = 1; m <= 8; ++m)
      for (std::uint64_t l = 1; l <= m; ++l) {
        Rational expect = 0;
        std::function<void(std::uint64_t, std::uint64_t, Rational)> rec = [&](std::uint64_t trees, std::uint64_t left,
                                                                                Rational p) {
          if (trees == 0) {
            if (left == 0) expect += p;
            return;
          }
          for (std::uint64_t s = 1; s + trees - 1 <= left; ++s)
            for (auto& t : enumerate_trees(WeightSequence::uniform(), s)) {
              Rational q = p;
              for (Degree d : t.tree.degrees()) q *= *law.exact_pmf(d);
              rec(trees - 1, left - s, q);
            }
        };
        rec(l, m, Rational(1));
        CAPTURE(spec);
        CAPTURE(m);
        CAPTURE(l);
        CHECK(forest_count_prob(law, l, m).exact() == expect);
      }
  }
  auto pl = classify(WeightSequence::powerlaw(Rational(5, 2)));
  auto f = forest_count_prob(pl, 1, 2);
  CHECK(!f.is_exact());
  double expect = (pl.pmf(0) * pl.pmf(1)).convert_to<double>();
  CHECK(std::fabs(f.to_double() - expect) <= f.error_bound() + 1e-30);
  CHECK(f.error_bound() < 1e-12);
}

TEST_CASE("real and extended modes track rational values") {
  for (auto& [name, w] : rational_families()) {
    const std::size_t n = 41;
    CAPTURE(name);
    auto q = PartitionTable<Rational>::build(w, n);
    auto r = PartitionTable<Real>::build(w, n);
    auto x = PartitionTable<long double>::build(w, n);
    std::vector<std::vector<Degree>> prefixes = {{0}, {1}, {2, 0}, {1, 1, 0}, {3}, {0, 0, 0, 0}};
    for (auto& d : prefixes) {
      Rational ex = prefix_prob(q, d).exact();
      for (auto got : {prefix_prob(r, d), prefix_prob(x, d)}) {
        double err = std::fabs(got.to_double() - ex.convert_to<double>());
        CHECK(err <= got.error_bound() + 1e-300);
      }
      auto rr = prefix_prob(r, d);
      CHECK(abs(rr.value() - to_real(ex)) <= rr.error_bound() * 1.0000001 + 1e-300);
    }
  }
  // factorial weights: real mode only
  auto fac = WeightSequence::factorial(1);
  auto r = PartitionTable<Real>::build(fac, 60);
  auto rd = root_degree_dist(r);
  Real sum = 0;
  for (auto& [k, p] : rd) sum += p.value();
  CHECK(abs(sum - 1) < 1e-25);
}

TEST_CASE("engine facade") {
  for (auto mode : {ScalarMode::rational, ScalarMode::real, ScalarMode::extended}) {
    ExactEngine e(WeightSequence::uniform(), 4, mode);
    CHECK(e.n() == 4);
    CHECK(std::fabs(e.total_tree_weight().to_double() - 5) < 1e-15);
    CHECK(std::fabs(e.prefix_prob({0}).to_double() - 0.5) < 1e-15);
    CHECK(std::fabs(e.root_degree_dist().at(3).to_double() - 0.2) < 1e-15);
  }
  CHECK(parse_mode("real") == ScalarMode::real);
  CHECK(std::string(mode_name(ScalarMode::extended)) == "extended");
  CHECK_THROWS_AS(parse_mode("float"), Error);
  CHECK_THROWS_AS(ExactEngine(WeightSequence::powerlaw(Rational(5, 2)), 5, ScalarMode::rational), Error);
}

TEST_CASE("partition columns match the full table") {
  for (auto& [name, w] : rational_families()) {
    const std::size_t n = 37;
    auto full = PartitionTable<Rational>::build(w, n);
    auto cols = PartitionColumns<Rational>::build(w, n, {n - 1, n - 2, 1, 17});
    for (std::size_t j : {n, n - 1, n - 2, std::size_t(1), std::size_t(17)})
      for (std::size_t m = 0; m < n; ++m) {
        if (j == n && m != n - 1) continue;
        CHECK(cols.z(m, j) == full.z(m, j));
      }
    CHECK(prefix_prob(cols, {2, 1}).exact() == prefix_prob(full, {2, 1}).exact());
  }
  auto cols = PartitionColumns<Rational>::build(WeightSequence::uniform(), 10, {});
  CHECK_THROWS_AS(cols.z(0, 5), Error);
  CHECK(total_tree_weight(cols).exact() == 4862);
}

TEST_CASE("sample_sequence") {
  auto bin = PartitionTable<Rational>::build(WeightSequence::finite({{0, 1}, {2, 1}}, "b"), 3);
  Rng rng(7, 0);
  std::map<std::vector<Degree>, int> hits;
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    auto y = bin.n() ? sample_sequence(bin, rng) : std::vector<Degree>{};
    hits[y]++;
  }
  CHECK(hits.size() == 3);
  const double p = 1.0 / 3, sd = std::sqrt(draws * p * (1 - p));
  for (auto& [y, c] : hits) CHECK(std::fabs(c - draws * p) < 3 * sd);
  auto one = PartitionTable<Rational>::build(WeightSequence::uniform(), 1);
  CHECK(sample_sequence(one, rng) == std::vector<Degree>{0});
  auto big = PartitionTable<long double>::build(WeightSequence::uniform(), 50);
  for (int i = 0; i < 100; ++i) {
    auto y = sample_sequence(big, rng);
    std::uint64_t s = 0;
    for (auto d : y) s += d;
    CHECK(s == 49);
  }
  Rng a(3, 1), b(3, 1);
  CHECK(sample_sequence(big, a) == sample_sequence(big, b));
}

TEST_CASE("split sampler") {
  auto w = WeightSequence::finite({{0, 1}, {1, 2}, {3, Rational(1, 2)}}, "mixed");
  const std::size_t n = 6;
  auto law = classify(w);
  auto sp = SplitSampler::build(tilted_weights(law, n), n);
  auto tbl = PartitionTable<Rational>::build(w, n);
  Rng rng(11, 2);
  std::map<std::vector<Degree>, int> hits;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) hits[sp.sample(rng)]++;
  double chi2 = 0;
  std::size_t cells = 0;
  // every sequence with positive probability, enumerated by odometer
  std::vector<Degree> y(n, 0);
  std::function<void(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t left) {
    if (i == n) {
      if (left) return;
      double p = prefix_prob(tbl, y).to_double();
      if (p == 0) return;
      double e = p * draws;
      double o = hits.count(y) ? hits[y] : 0;
      chi2 += (o - e) * (o - e) / e;
      ++cells;
      return;
    }
    for (Degree d = 0; d <= left; ++d) {
      y[i] = d;
      rec(i + 1, left - d);
    }
    y[i] = 0;
  };
  rec(0, n - 1);
  for (auto& [seq, c] : hits) CHECK(prefix_prob(tbl, seq).exact() > 0);
  // chi-square with cells-1 degrees of freedom; generous 5-sigma bound
  const double df = static_cast<double>(cells - 1);
  CHECK(chi2 < df + 5 * std::sqrt(2 * df));

  // large n: sums and row consistency
  auto pl = classify(WeightSequence::powerlaw(3));
  auto big = SplitSampler::build(tilted_weights(pl, 3001), 3001);
  for (int i = 0; i < 20; ++i) {
    auto s = big.sample(rng);
    std::uint64_t sum = 0;
    for (auto d : s) sum += d;
    CHECK(sum == 3000);
  }
  auto fac = classify(WeightSequence::factorial(1));
  auto tw = tilted_weights(fac, 400);
  for (long double x : tw) CHECK(std::isfinite(x));
  auto fs = SplitSampler::build(tw, 400);
  CHECK(fs.sample(rng).size() == 400);
  CHECK_THROWS_AS(SplitSampler::build({0.0L, 1.0L}, 5), Error);
}

TEST_CASE("tilting leaves the conditioned law unchanged") {
  auto w = WeightSequence::finite({{0, 1}, {1, 2}, {3, Rational(1, 2)}}, "mixed");
  auto law = classify(w);
  const std::size_t n = 12;
  auto tw = tilted_weights(law, n);
  auto tilted = PartitionTable<long double>::from_weights(tw, n, 1e-18, true);
  auto exact = PartitionTable<Rational>::build(w, n);
  for (std::vector<Degree> d : {std::vector<Degree>{0}, {1}, {3, 0}, {1, 1, 3}})
    CHECK(std::fabs(prefix_prob(tilted, d).to_double() - prefix_prob(exact, d).to_double()) < 1e-15);
  CHECK_THROWS_AS(total_tree_weight(tilted), Error);
}
