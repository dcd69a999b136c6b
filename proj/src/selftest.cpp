#include "sgt/selftest.hpp"

#include "sgt/exact.hpp"
#include "sgt/pointed_tree.hpp"

#include <map>

namespace sgt {

namespace {

std::string family_label(const FamilySpec& f) {
  std::string s = f.name;
  if (f.alpha) s += "(alpha=" + *f.alpha + ")";
  if (f.weights) s += "(" + *f.weights + ")";
  return s;
}

std::string show(const Rational& q) { return q.str(); }

}  // namespace

std::vector<FamilySpec> selftest_families() {
  FamilySpec uniform{"uniform", {}, {}, {}};
  FamilySpec motzkin{"motzkin", {}, {}, {}};
  FamilySpec binary{"binary", {}, {}, {}};
  FamilySpec factorial{"factorial", std::string("1"), {}, {}};
  return {uniform, motzkin, binary, factorial};
}

SelftestSummary run_selftest(const std::vector<FamilySpec>& families, std::size_t n_max) {
  SelftestSummary out;
  for (const auto& spec : families) {
    const std::string label = family_label(spec);
    WeightSequence w = builtin(spec);
    auto fail = [&](std::size_t n, const std::string& check, const std::string& detail) {
      out.failures.push_back({label, n, check, detail});
    };
    auto expect = [&](bool ok, std::size_t n, const std::string& check, const std::string& detail) {
      ++out.checks;
      if (!ok) fail(n, check, detail);
    };
    for (std::size_t n = 1; n <= n_max; ++n) {
      std::vector<WeightedTree> trees;
      try {
        trees = enumerate_trees(w, n);
      } catch (const Error& e) {
        fail(n, "enumerate", e.what());
        continue;
      }
      Rational total = 0;
      for (const auto& t : trees) total += t.weight;
      if (total == 0) continue;

      auto tbl = PartitionTable<Rational>::build(w, n);
      ExactScalar tw = total_tree_weight(tbl);
      expect(tw.exact() == total, n, "total_weight", show(tw.exact()) + " vs " + show(total));

      std::map<Degree, Rational> root;
      std::map<std::string, std::pair<PointedTree, Rational>> shapes;
      for (const auto& t : trees) {
        Rational want = t.weight / (Rational(n) * total);
        Rational got = prefix_prob(tbl, t.tree.degrees()).exact();
        expect(got == want, n, "tree_law", t.tree.to_string() + ": " + show(got) + " vs " + show(want));
        root[t.tree.degree(VertexRef{0})] += t.weight / total;

        auto parents = t.tree.parents();
        auto depths = t.tree.depths();
        for (std::size_t v = 0; v < n; ++v)
          for (std::size_t k = 0; k <= depths[v]; ++k) {
            auto pt = extended_fringe(t.tree, parents, VertexRef{v}, k);
            if (!pt) {
              fail(n, "extended_fringe", t.tree.to_string() + " vertex " + std::to_string(v));
              continue;
            }
            auto key = encode(*pt);
            auto it = shapes.find(key);
            if (it == shapes.end()) it = shapes.emplace(key, std::make_pair(*pt, Rational(0))).first;
            it->second.second += t.weight;
          }
      }

      auto rd = root_degree_dist(tbl);
      for (const auto& [d, p] : root) {
        auto it = rd.find(d);
        Rational got = it == rd.end() ? Rational(0) : it->second.exact();
        expect(got == p, n, "root_degree", std::to_string(d) + ": " + show(got) + " vs " + show(p));
      }
      expect(rd.size() == root.size(), n, "root_degree_support", std::to_string(rd.size()));

      for (const auto& [key, entry] : shapes) {
        Rational want = entry.second / (Rational(n) * total);
        Rational got = fringe_event_prob(tbl, FringeEvent{entry.first, {}}).exact();
        expect(got == want, n, "fringe", key + ": " + show(got) + " vs " + show(want));
      }
    }
  }
  return out;
}

}  // namespace sgt
