#pragma once

#include "sgt/plane_tree.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace sgt {

// Non-negative count or the symbol for infinitely many.
class Count {
 public:
  Count(std::uint64_t v = 0) : v_(v) {}
  static Count infinity() {
    Count c;
    c.inf_ = true;
    return c;
  }

  bool infinite() const { return inf_; }
  std::uint64_t value() const;
  // min(count, cap) for materialization decisions.
  std::uint64_t capped(std::uint64_t cap) const { return inf_ ? cap : std::min(v_, cap); }
  bool at_least(std::uint64_t x) const { return inf_ || v_ >= x; }

  bool operator==(const Count& o) const { return inf_ == o.inf_ && (inf_ || v_ == o.v_); }
  std::string to_string() const { return inf_ ? "inf" : std::to_string(v_); }

 private:
  std::uint64_t v_ = 0;
  bool inf_ = false;
};

struct DegreePair {
  Count left;
  Count right;
  bool operator==(const DegreePair&) const = default;
  bool finite() const { return !left.infinite() && !right.infinite(); }
  // Outdegree left + right + 1 when finite.
  std::optional<std::uint64_t> degree() const;
};

// DFS outdegrees of a rooted tree in which vertices at depth >= budget keep
// their true outdegree but have no children listed.
using Subtree = std::vector<Degree>;

struct SpineRecord {
  DegreePair pair;
  std::vector<Subtree> left;   // materialized left siblings, nearest first
  std::vector<Subtree> right;  // materialized right siblings, nearest first
  bool operator==(const SpineRecord&) const = default;
};

// Tree pointed at u_0, seen from u_0 upwards along the ancestral spine.
struct PointedTree {
  Subtree center;                  // rooted at u_0
  std::vector<SpineRecord> spine;  // spine[i-1] holds u_i
  // Nullopt means fully materialized.  With window m: at most m spine records,
  // at most m siblings per side, subtrees cut below depth m.
  std::optional<std::uint32_t> window;
  // True height of u_0; may exceed spine.size() when the window cuts the spine.
  Count height;

  std::uint64_t depth_budget() const { return window ? *window : UINT64_MAX; }

  bool operator==(const PointedTree&) const = default;
};

// Number of materialized children of a vertex with outdegree d at depth depth.
inline std::uint64_t materialized_children(Degree d, std::uint64_t depth, std::uint64_t budget) {
  return depth < budget ? d : 0;
}

// One past the end of the subtree starting at position pos of a windowed encoding.
std::size_t subtree_span(const Subtree& s, std::size_t pos, std::uint64_t depth, std::uint64_t budget);
Subtree cut_subtree(const Subtree& s, std::uint64_t from_budget, std::uint64_t to_budget);
void validate_subtree(const Subtree& s, std::uint64_t budget);

// H_k(t, v); nullopt when v has height below k.
std::optional<PointedTree> extended_fringe(const PlaneTree& t, VertexRef v, std::uint64_t k);
std::optional<PointedTree> extended_fringe(const PlaneTree& t, const std::vector<std::size_t>& parents,
                                           VertexRef v, std::uint64_t k);
PointedTree pointed_fringe(const PointedTree& pt, std::uint64_t i);
// H(t, v, omega): pointed fringe at the youngest strict ancestor with outdegree > omega.
std::optional<PointedTree> truncate_at_large_ancestor(const PlaneTree& t, VertexRef v, std::uint64_t omega);
std::optional<PointedTree> truncate_at_large_ancestor(const PlaneTree& t, const std::vector<std::size_t>& parents,
                                                      VertexRef v, std::uint64_t omega);

// Restrict a (windowed or full) pointed tree to window m.
PointedTree restrict_window(const PointedTree& pt, std::uint32_t m);

struct Flattened {
  PlaneTree tree;
  VertexRef point;
};
// Forget the pointing of a fully materialized pointed tree with finite pairs.
Flattened flatten(const PointedTree& pt);

// Address in the backwards-spine tree.
struct Address {
  enum class Side { spine, left, right };
  std::uint32_t level = 0;      // 0: inside the center tree; i >= 1: at u_i
  Side side = Side::spine;      // spine: u_i itself (or a center vertex when level 0)
  std::uint32_t rank = 0;       // sibling rank for left/right, 1 = nearest
  std::vector<std::uint32_t> path;  // 1-based child ranks below the anchor

  static Address center(std::vector<std::uint32_t> path = {}) { return {0, Side::spine, 0, std::move(path)}; }
  static Address spine_vertex(std::uint32_t i) { return {i, Side::spine, 0, {}}; }
  static Address sibling(std::uint32_t i, Side side, std::uint32_t rank, std::vector<std::uint32_t> path = {}) {
    return {i, side, rank, std::move(path)};
  }
  bool operator==(const Address&) const = default;
  auto operator<=>(const Address&) const = default;
  std::string to_string() const;
};

struct Constraint {
  enum class Kind { degree, pair, absent, at_least, above };
  Kind kind = Kind::degree;
  Degree degree = 0;
  DegreePair pair;
  std::uint64_t left_min = 0;
  std::uint64_t right_min = 0;
  std::uint64_t omega = 0;

  static Constraint exact_degree(Degree d) { return {Kind::degree, d, {}, 0, 0, 0}; }
  static Constraint exact_pair(DegreePair p) { return {Kind::pair, 0, p, 0, 0, 0}; }
  static Constraint absent() { return {Kind::absent, 0, {}, 0, 0, 0}; }
  static Constraint at_least(std::uint64_t l, std::uint64_t r) { return {Kind::at_least, 0, {}, l, r, 0}; }
  static Constraint above(std::uint64_t omega) { return {Kind::above, 0, {}, 0, 0, omega}; }
};

struct WindowPattern {
  std::vector<std::pair<Address, Constraint>> constraints;

  void add(Address a, Constraint c) { constraints.emplace_back(std::move(a), c); }
  // Every materialized vertex of pt pinned to its value.  With closed_top the
  // vertex above the last spine record must be absent.
  static WindowPattern exact(const PointedTree& pt, bool closed_top = false);
};

enum class Match { yes, no, insufficient_window };

Match matches(const PointedTree& pt, const WindowPattern& pat);

// Observed value at an address: an outdegree, a spine pair, or absence of a
// spine vertex.  Nullopt when outside the materialized window.
struct Observation {
  enum class Kind { degree, pair, absent };
  Kind kind = Kind::degree;
  Degree degree = 0;
  DegreePair pair;
  std::string to_string() const;
};
std::optional<Observation> observe(const PointedTree& pt, const Address& a);

nlohmann::json to_json(const PointedTree& pt);
PointedTree pointed_from_json(const nlohmann::json& j);
// Compact canonical text encoding, suitable as a histogram key.
std::string encode(const PointedTree& pt);

}  // namespace sgt
