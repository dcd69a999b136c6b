#pragma once

#include "sgt/rng.hpp"
#include "sgt/weights.hpp"

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace sgt {

struct VertexRef {
  std::size_t index = 0;
  auto operator<=>(const VertexRef&) const = default;
};

inline constexpr std::size_t kNoParent = static_cast<std::size_t>(-1);

// Finite rooted plane tree stored as its depth-first outdegree sequence.
class PlaneTree {
 public:
  PlaneTree() : degrees_{0} {}

  static PlaneTree from_degrees(std::vector<Degree> seq);
  // Comma-separated outdegrees, e.g. "2,0,0".
  static PlaneTree parse(std::string_view csv);

  std::size_t size() const { return degrees_.size(); }
  const std::vector<Degree>& degrees() const { return degrees_; }
  Degree degree(VertexRef v) const { return degrees_[v.index]; }
  Degree max_degree() const;

  // One past the last index of the fringe subtree at v.
  std::size_t subtree_end(VertexRef v) const;
  std::vector<VertexRef> children(VertexRef v) const;
  std::vector<std::size_t> parents() const;
  std::vector<std::size_t> depths() const;

  std::string to_string() const;

  bool operator==(const PlaneTree&) const = default;

 private:
  explicit PlaneTree(std::vector<Degree> d) : degrees_(std::move(d)) {}
  friend PlaneTree fringe(const PlaneTree&, VertexRef);
  friend struct ShiftResult cycle_shift(const std::vector<Degree>&);

  std::vector<Degree> degrees_;
};

// Index of the first prefix violating the ladder condition, or size() when valid.
std::size_t first_ladder_violation(const std::vector<Degree>& seq);

std::vector<Degree> parse_degrees(std::string_view csv);
std::string format_degrees(const std::vector<Degree>& seq);

struct ShiftResult {
  PlaneTree tree;
  std::size_t shift = 0;  // tree.degrees()[i] == seq[(i + shift) % n]
};
ShiftResult cycle_shift(const std::vector<Degree>& seq);

PlaneTree fringe(const PlaneTree& t, VertexRef v);

struct ExplorationPolicy {
  enum class Kind { dfs, modified_dfs };
  Kind kind = Kind::dfs;
  Degree K = 0;
  Degree k1 = 0;
  Degree d0 = 0;

  static ExplorationPolicy dfs() { return {}; }
  static ExplorationPolicy modified_dfs(Degree K, Degree k1, Degree d0) { return {Kind::modified_dfs, K, k1, d0}; }
};

std::vector<VertexRef> explore(const PlaneTree& t, const ExplorationPolicy& policy);

VertexRef uniform_vertex(const PlaneTree& t, Rng& rng);

}  // namespace sgt
