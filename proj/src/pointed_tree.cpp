#include "sgt/pointed_tree.hpp"

#include "sgt/errors.hpp"

#include <algorithm>
#include <functional>

namespace sgt {

std::uint64_t Count::value() const {
  if (inf_) throw Error(ErrorKind::validation, "infinite count has no finite value");
  return v_;
}

std::optional<std::uint64_t> DegreePair::degree() const {
  if (!finite()) return std::nullopt;
  return left.value() + right.value() + 1;
}

std::size_t subtree_span(const Subtree& s, std::size_t pos, std::uint64_t depth, std::uint64_t budget) {
  std::vector<std::pair<std::uint64_t, std::uint64_t>> stack;  // (children left, their depth)
  auto visit = [&](std::uint64_t dep) {
    if (pos >= s.size()) throw Error(ErrorKind::validation, "truncated subtree encoding");
    std::uint64_t c = materialized_children(s[pos], dep, budget);
    ++pos;
    if (c) stack.emplace_back(c, dep + 1);
  };
  visit(depth);
  while (!stack.empty()) {
    std::uint64_t dep = stack.back().second;
    if (--stack.back().first == 0) stack.pop_back();
    visit(dep);
  }
  return pos;
}

void validate_subtree(const Subtree& s, std::uint64_t budget) {
  if (s.empty() || subtree_span(s, 0, 0, budget) != s.size())
    throw Error(ErrorKind::validation, "malformed subtree encoding");
}

namespace {

void cut_into(const Subtree& s, std::size_t& i, std::uint64_t depth, std::uint64_t from, std::uint64_t to,
              Subtree& out) {
  Degree d = s[i++];
  out.push_back(d);
  std::uint64_t c = materialized_children(d, depth, from);
  for (std::uint64_t j = 0; j < c; ++j) {
    if (depth + 1 <= to) cut_into(s, i, depth + 1, from, to, out);
    else i = subtree_span(s, i, depth + 1, from);
  }
}

}  // namespace

Subtree cut_subtree(const Subtree& s, std::uint64_t from_budget, std::uint64_t to_budget) {
  if (to_budget >= from_budget) return s;
  Subtree out;
  std::size_t i = 0;
  cut_into(s, i, 0, from_budget, to_budget, out);
  return out;
}

std::optional<PointedTree> extended_fringe(const PlaneTree& t, const std::vector<std::size_t>& parents,
                                           VertexRef v, std::uint64_t k) {
  std::vector<std::size_t> path{v.index};
  for (std::uint64_t i = 0; i < k; ++i) {
    std::size_t p = parents[path.back()];
    if (p == kNoParent) return std::nullopt;
    path.push_back(p);
  }
  PointedTree pt;
  pt.center = fringe(t, v).degrees();
  pt.height = k;
  pt.spine.reserve(k);
  for (std::uint64_t i = 1; i <= k; ++i) {
    std::size_t cur = path[i - 1], p = path[i];
    auto kids = t.children({p});
    std::size_t pos = 0;
    while (kids[pos].index != cur) ++pos;
    SpineRecord rec;
    rec.pair = {Count(pos), Count(kids.size() - pos - 1)};
    for (std::size_t j = pos; j-- > 0;) rec.left.push_back(fringe(t, kids[j]).degrees());
    for (std::size_t j = pos + 1; j < kids.size(); ++j) rec.right.push_back(fringe(t, kids[j]).degrees());
    pt.spine.push_back(std::move(rec));
  }
  return pt;
}

std::optional<PointedTree> extended_fringe(const PlaneTree& t, VertexRef v, std::uint64_t k) {
  return extended_fringe(t, t.parents(), v, k);
}

PointedTree pointed_fringe(const PointedTree& pt, std::uint64_t i) {
  if (i > pt.spine.size())
    throw Error(ErrorKind::validation, "spine index " + std::to_string(i) + " beyond spine length " +
                                           std::to_string(pt.spine.size()));
  PointedTree out;
  out.center = pt.center;
  out.spine.assign(pt.spine.begin(), pt.spine.begin() + static_cast<std::ptrdiff_t>(i));
  out.window = pt.window;
  out.height = i;
  return out;
}

std::optional<PointedTree> truncate_at_large_ancestor(const PlaneTree& t, const std::vector<std::size_t>& parents,
                                                      VertexRef v, std::uint64_t omega) {
  std::size_t cur = parents[v.index];
  std::uint64_t k = 1;
  while (cur != kNoParent) {
    if (t.degree({cur}) > omega) return extended_fringe(t, parents, v, k);
    cur = parents[cur];
    ++k;
  }
  return std::nullopt;
}

std::optional<PointedTree> truncate_at_large_ancestor(const PlaneTree& t, VertexRef v, std::uint64_t omega) {
  return truncate_at_large_ancestor(t, t.parents(), v, omega);
}

PointedTree restrict_window(const PointedTree& pt, std::uint32_t m) {
  if (pt.window && *pt.window < m) throw Error(ErrorKind::insufficient_window, "cannot enlarge a window");
  const std::uint64_t from = pt.depth_budget();
  PointedTree out;
  out.window = m;
  out.height = pt.height;
  out.center = cut_subtree(pt.center, from, m);
  std::size_t records = std::min<std::size_t>(pt.spine.size(), m);
  for (std::size_t i = 0; i < records; ++i) {
    const SpineRecord& r = pt.spine[i];
    SpineRecord rec;
    rec.pair = r.pair;
    for (std::size_t j = 0; j < std::min<std::size_t>(r.left.size(), m); ++j)
      rec.left.push_back(cut_subtree(r.left[j], from, m));
    for (std::size_t j = 0; j < std::min<std::size_t>(r.right.size(), m); ++j)
      rec.right.push_back(cut_subtree(r.right[j], from, m));
    out.spine.push_back(std::move(rec));
  }
  return out;
}

Flattened flatten(const PointedTree& pt) {
  if (pt.window) throw Error(ErrorKind::validation, "cannot flatten a windowed pointed tree");
  std::vector<Degree> seq;
  std::size_t point = 0;
  std::function<void(std::size_t)> emit = [&](std::size_t level) {
    if (level == 0) {
      point = seq.size();
      seq.insert(seq.end(), pt.center.begin(), pt.center.end());
      return;
    }
    const SpineRecord& r = pt.spine[level - 1];
    auto d = r.pair.degree();
    if (!d) throw Error(ErrorKind::validation, "cannot flatten an infinite spine pair");
    seq.push_back(static_cast<Degree>(*d));
    for (std::size_t j = r.left.size(); j-- > 0;) seq.insert(seq.end(), r.left[j].begin(), r.left[j].end());
    emit(level - 1);
    for (const Subtree& s : r.right) seq.insert(seq.end(), s.begin(), s.end());
  };
  emit(pt.spine.size());
  return {PlaneTree::from_degrees(std::move(seq)), {point}};
}

std::string Address::to_string() const {
  std::string s;
  if (level == 0) s = "c";
  else if (side == Side::spine) s = "u" + std::to_string(level);
  else s = "u" + std::to_string(level) + (side == Side::left ? "L" : "R") + std::to_string(rank);
  for (std::size_t i = 0; i < path.size(); ++i) s += (i == 0 ? "/" : ".") + std::to_string(path[i]);
  return s;
}

std::string Observation::to_string() const {
  switch (kind) {
    case Kind::degree: return std::to_string(degree);
    case Kind::pair: return "(" + pair.left.to_string() + "," + pair.right.to_string() + ")";
    case Kind::absent: return "*";
  }
  return "?";
}

std::optional<Observation> observe(const PointedTree& pt, const Address& a) {
  const std::uint64_t budget = pt.depth_budget();
  const Subtree* anchor = nullptr;
  Observation none;  // nonexistent vertex: outdegree 0
  if (a.level >= 1) {
    bool beyond = !pt.height.infinite() && a.level > pt.height.value();
    if (beyond) {
      if (a.side == Address::Side::spine) return Observation{Observation::Kind::absent, 0, {}};
      return none;
    }
    if (a.level > pt.spine.size()) return std::nullopt;
    const SpineRecord& rec = pt.spine[a.level - 1];
    if (a.side == Address::Side::spine) {
      if (!a.path.empty()) throw Error(ErrorKind::validation, "spine addresses carry no child path");
      return Observation{Observation::Kind::pair, 0, rec.pair};
    }
    if (a.rank == 0) throw Error(ErrorKind::validation, "sibling ranks start at 1");
    const Count& count = a.side == Address::Side::left ? rec.pair.left : rec.pair.right;
    const auto& mats = a.side == Address::Side::left ? rec.left : rec.right;
    if (a.rank <= mats.size()) anchor = &mats[a.rank - 1];
    else if (count.at_least(a.rank)) return std::nullopt;
    else return none;
  } else {
    if (a.side != Address::Side::spine) throw Error(ErrorKind::validation, "center addresses have no side");
    anchor = &pt.center;
  }
  std::size_t pos = 0;
  std::uint64_t depth = 0;
  for (std::uint32_t c : a.path) {
    if (c == 0) throw Error(ErrorKind::validation, "child ranks start at 1");
    Degree d = (*anchor)[pos];
    if (c > d) return none;
    if (depth >= budget) return std::nullopt;
    std::size_t child = pos + 1;
    for (std::uint32_t j = 1; j < c; ++j) child = subtree_span(*anchor, child, depth + 1, budget);
    pos = child;
    ++depth;
  }
  return Observation{Observation::Kind::degree, (*anchor)[pos], {}};
}

namespace {

bool satisfied(const Observation& o, const Constraint& c) {
  using K = Constraint::Kind;
  using O = Observation::Kind;
  switch (c.kind) {
    case K::degree:
      if (o.kind == O::pair) {
        auto d = o.pair.degree();
        return d && *d == c.degree;
      }
      return o.kind == O::absent ? c.degree == 0 : o.degree == c.degree;
    case K::pair: return o.kind == O::pair && o.pair == c.pair;
    case K::absent: return o.kind == O::absent;
    case K::at_least: return o.kind == O::pair && o.pair.left.at_least(c.left_min) && o.pair.right.at_least(c.right_min);
    case K::above: {
      if (o.kind != O::pair) return false;
      auto d = o.pair.degree();
      return !d || *d > c.omega;
    }
  }
  return false;
}

void pin_subtree(const Subtree& s, std::uint64_t budget, const Address& base, WindowPattern& pat) {
  std::size_t i = 0;
  std::function<void(std::uint64_t, std::vector<std::uint32_t>&)> walk = [&](std::uint64_t depth,
                                                                              std::vector<std::uint32_t>& path) {
    Address a = base;
    a.path = path;
    Degree d = s[i++];
    pat.add(std::move(a), Constraint::exact_degree(d));
    std::uint64_t c = materialized_children(d, depth, budget);
    for (std::uint32_t j = 1; j <= c; ++j) {
      path.push_back(j);
      walk(depth + 1, path);
      path.pop_back();
    }
  };
  std::vector<std::uint32_t> path;
  walk(0, path);
}

}  // namespace

WindowPattern WindowPattern::exact(const PointedTree& pt, bool closed_top) {
  WindowPattern pat;
  const std::uint64_t budget = pt.depth_budget();
  pin_subtree(pt.center, budget, Address::center(), pat);
  for (std::uint32_t i = 1; i <= pt.spine.size(); ++i) {
    const SpineRecord& r = pt.spine[i - 1];
    pat.add(Address::spine_vertex(i), Constraint::exact_pair(r.pair));
    for (std::uint32_t j = 0; j < r.left.size(); ++j)
      pin_subtree(r.left[j], budget, Address::sibling(i, Address::Side::left, j + 1), pat);
    for (std::uint32_t j = 0; j < r.right.size(); ++j)
      pin_subtree(r.right[j], budget, Address::sibling(i, Address::Side::right, j + 1), pat);
  }
  if (closed_top) pat.add(Address::spine_vertex(static_cast<std::uint32_t>(pt.spine.size() + 1)), Constraint::absent());
  return pat;
}

Match matches(const PointedTree& pt, const WindowPattern& pat) {
  bool unknown = false;
  for (const auto& [addr, c] : pat.constraints) {
    auto o = observe(pt, addr);
    if (!o) {
      unknown = true;
      continue;
    }
    if (!satisfied(*o, c)) return Match::no;
  }
  return unknown ? Match::insufficient_window : Match::yes;
}

namespace {

nlohmann::json count_json(const Count& c) {
  if (c.infinite()) return "inf";
  return c.value();
}

Count count_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() != "inf") throw Error(ErrorKind::validation, "count must be an integer or \"inf\"");
    return Count::infinity();
  }
  if (!j.is_number_unsigned()) throw Error(ErrorKind::validation, "count must be an integer or \"inf\"");
  return Count(j.get<std::uint64_t>());
}

}  // namespace

nlohmann::json to_json(const PointedTree& pt) {
  nlohmann::json j;
  j["center"] = format_degrees(pt.center);
  j["window"] = pt.window ? nlohmann::json(*pt.window) : nlohmann::json("inf");
  j["height"] = count_json(pt.height);
  nlohmann::json spine = nlohmann::json::array();
  for (const SpineRecord& r : pt.spine) {
    nlohmann::json rec;
    rec["left"] = count_json(r.pair.left);
    rec["right"] = count_json(r.pair.right);
    nlohmann::json kids = nlohmann::json::array();
    for (std::size_t i = r.left.size(); i-- > 0;) kids.push_back(format_degrees(r.left[i]));
    for (const Subtree& s : r.right) kids.push_back(format_degrees(s));
    rec["children"] = std::move(kids);
    spine.push_back(std::move(rec));
  }
  j["spine"] = std::move(spine);
  return j;
}

PointedTree pointed_from_json(const nlohmann::json& j) {
  try {
    PointedTree pt;
    const auto& w = j.at("window");
    if (w.is_string()) {
      if (w.get<std::string>() != "inf") throw Error(ErrorKind::validation, "window must be an integer or \"inf\"");
    } else {
      pt.window = w.get<std::uint32_t>();
    }
    const std::uint64_t budget = pt.depth_budget();
    pt.center = parse_degrees(j.at("center").get<std::string>());
    validate_subtree(pt.center, budget);
    for (const auto& rec : j.at("spine")) {
      SpineRecord r;
      r.pair = {count_from_json(rec.at("left")), count_from_json(rec.at("right"))};
      std::vector<Subtree> kids;
      for (const auto& c : rec.at("children")) {
        kids.push_back(parse_degrees(c.get<std::string>()));
        validate_subtree(kids.back(), budget);
      }
      const std::uint64_t cap = pt.window ? *pt.window : UINT64_MAX;
      std::size_t nl = r.pair.left.capped(cap), nr = r.pair.right.capped(cap);
      if (kids.size() != nl + nr) throw Error(ErrorKind::validation, "spine record has the wrong number of children");
      for (std::size_t i = nl; i-- > 0;) r.left.push_back(kids[i]);
      for (std::size_t i = nl; i < kids.size(); ++i) r.right.push_back(kids[i]);
      pt.spine.push_back(std::move(r));
    }
    pt.height = j.contains("height") ? count_from_json(j.at("height")) : Count(pt.spine.size());
    return pt;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::validation, std::string("malformed pointed tree: ") + e.what());
  }
}

std::string encode(const PointedTree& pt) {
  std::string s = format_degrees(pt.center);
  for (const SpineRecord& r : pt.spine) {
    s += '|';
    s += r.pair.left.to_string();
    s += ':';
    s += r.pair.right.to_string();
    for (std::size_t i = r.left.size(); i-- > 0;) s += "<" + format_degrees(r.left[i]);
    for (const Subtree& t : r.right) s += ">" + format_degrees(t);
  }
  if (!pt.height.infinite() && pt.height.value() != pt.spine.size()) s += "^" + pt.height.to_string();
  return s;
}

}  // namespace sgt
