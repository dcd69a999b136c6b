#include "sgt/plane_tree.hpp"

#include "sgt/errors.hpp"

#include <algorithm>
#include <charconv>
#include <deque>

namespace sgt {

std::size_t first_ladder_violation(const std::vector<Degree>& seq) {
  const std::size_t n = seq.size();
  long long s = 0;
  for (std::size_t l = 0; l < n; ++l) {
    s += static_cast<long long>(seq[l]) - 1;
    if (l + 1 < n && s < 0) return l;
  }
  if (s != -1) return n == 0 ? 0 : n - 1;
  return n;
}

PlaneTree PlaneTree::from_degrees(std::vector<Degree> seq) {
  if (seq.empty()) throw InvalidEncoding(0, "empty outdegree sequence");
  std::size_t bad = first_ladder_violation(seq);
  if (bad != seq.size())
    throw InvalidEncoding(bad, "outdegree sequence is not a tree encoding (violation at index " +
                                   std::to_string(bad) + ")");
  return PlaneTree(std::move(seq));
}

std::vector<Degree> parse_degrees(std::string_view csv) {
  std::vector<Degree> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t comma = csv.find(',', pos);
    if (comma == std::string_view::npos) comma = csv.size();
    std::string_view item = csv.substr(pos, comma - pos);
    while (!item.empty() && (item.front() == ' ' || item.front() == '\t')) item.remove_prefix(1);
    while (!item.empty() && (item.back() == ' ' || item.back() == '\t' || item.back() == '\r')) item.remove_suffix(1);
    Degree d = 0;
    auto res = std::from_chars(item.data(), item.data() + item.size(), d);
    if (item.empty() || res.ec != std::errc() || res.ptr != item.data() + item.size())
      throw Error(ErrorKind::validation, "malformed outdegree '" + std::string(item) + "'");
    out.push_back(d);
    pos = comma + 1;
  }
  return out;
}

std::string format_degrees(const std::vector<Degree>& seq) {
  std::string s;
  s.reserve(seq.size() * 2);
  for (std::size_t i = 0; i < seq.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(seq[i]);
  }
  return s;
}

PlaneTree PlaneTree::parse(std::string_view csv) { return from_degrees(parse_degrees(csv)); }

Degree PlaneTree::max_degree() const { return *std::max_element(degrees_.begin(), degrees_.end()); }

std::size_t PlaneTree::subtree_end(VertexRef v) const {
  std::size_t i = v.index;
  long long pending = 1;
  while (pending > 0) {
    pending += static_cast<long long>(degrees_[i]) - 1;
    ++i;
  }
  return i;
}

std::vector<VertexRef> PlaneTree::children(VertexRef v) const {
  std::vector<VertexRef> out;
  out.reserve(degrees_[v.index]);
  std::size_t c = v.index + 1;
  for (Degree i = 0; i < degrees_[v.index]; ++i) {
    out.push_back({c});
    c = subtree_end({c});
  }
  return out;
}

std::vector<std::size_t> PlaneTree::parents() const {
  std::vector<std::size_t> parent(degrees_.size(), kNoParent);
  std::vector<std::pair<std::size_t, Degree>> stack;  // (vertex, children still to attach)
  for (std::size_t i = 0; i < degrees_.size(); ++i) {
    if (!stack.empty()) {
      parent[i] = stack.back().first;
      if (--stack.back().second == 0) stack.pop_back();
    }
    if (degrees_[i] > 0) stack.emplace_back(i, degrees_[i]);
  }
  return parent;
}

std::vector<std::size_t> PlaneTree::depths() const {
  auto parent = parents();
  std::vector<std::size_t> depth(degrees_.size(), 0);
  for (std::size_t i = 1; i < degrees_.size(); ++i) depth[i] = depth[parent[i]] + 1;
  return depth;
}

std::string PlaneTree::to_string() const { return format_degrees(degrees_); }

ShiftResult cycle_shift(const std::vector<Degree>& seq) {
  const std::size_t n = seq.size();
  if (n == 0) throw Error(ErrorKind::validation, "empty sequence");
  long long s = 0, best = 0;
  std::size_t arg = 0;
  for (std::size_t i = 0; i < n; ++i) {
    s += static_cast<long long>(seq[i]) - 1;
    if (i == 0 || s < best) {
      best = s;
      arg = i;
    }
  }
  if (s != -1) throw Error(ErrorKind::validation, "sequence must sum to n-1");
  std::size_t j = (arg + 1) % n;
  std::vector<Degree> rotated(n);
  for (std::size_t i = 0; i < n; ++i) rotated[i] = seq[(i + j) % n];
  return {PlaneTree(std::move(rotated)), j};
}

PlaneTree fringe(const PlaneTree& t, VertexRef v) {
  std::size_t end = t.subtree_end(v);
  return PlaneTree(std::vector<Degree>(t.degrees_.begin() + static_cast<std::ptrdiff_t>(v.index),
                                       t.degrees_.begin() + static_cast<std::ptrdiff_t>(end)));
}

std::vector<VertexRef> explore(const PlaneTree& t, const ExplorationPolicy& policy) {
  std::vector<VertexRef> order;
  order.reserve(t.size());
  std::deque<VertexRef> queue{{0}};
  while (!queue.empty()) {
    VertexRef v = queue.front();
    queue.pop_front();
    order.push_back(v);
    auto kids = t.children(v);
    const Degree d = t.degree(v);
    if (policy.kind == ExplorationPolicy::Kind::modified_dfs && d == policy.K) {
      std::size_t lo = std::min<std::size_t>(policy.k1, d);
      std::size_t hi = std::min<std::size_t>(static_cast<std::size_t>(policy.k1) + policy.d0, d);
      for (std::size_t i = hi; i-- > lo;) queue.push_front(kids[i]);
      for (std::size_t i = 0; i < lo; ++i) queue.push_back(kids[i]);
      for (std::size_t i = hi; i < d; ++i) queue.push_back(kids[i]);
    } else {
      for (std::size_t i = d; i-- > 0;) queue.push_front(kids[i]);
    }
  }
  return order;
}

VertexRef uniform_vertex(const PlaneTree& t, Rng& rng) { return {static_cast<std::size_t>(rng.uniform_index(t.size()))}; }

}  // namespace sgt
