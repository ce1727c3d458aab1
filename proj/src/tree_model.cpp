#include "martinlab/tree_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <deque>
#include <map>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace martinlab {

using nlohmann::json;

namespace {
constexpr double kRowSumTol = 1e-12;
}

const char* errc_name(Errc c) {
  switch (c) {
    case Errc::NotATree: return "NotATree";
    case Errc::ProbabilitySum: return "ProbabilitySum";
    case Errc::NonPositiveEdge: return "NonPositiveEdge";
    case Errc::UnknownVertex: return "UnknownVertex";
    case Errc::NotAdjacent: return "NotAdjacent";
    case Errc::NonCoreSupport: return "NonCoreSupport";
    case Errc::RecurrentWalk: return "RecurrentWalk";
    case Errc::NotConverged: return "NotConverged";
    case Errc::MaxIterExceeded: return "MaxIterExceeded";
    case Errc::DegenerateCylinder: return "DegenerateCylinder";
    case Errc::BadAntichain: return "BadAntichain";
    case Errc::MissingValue: return "MissingValue";
    case Errc::VertexOutsideHull: return "VertexOutsideHull";
    case Errc::NotIntegrable: return "NotIntegrable";
    case Errc::InvalidMeasure: return "InvalidMeasure";
    case Errc::BadInput: return "BadInput";
    case Errc::Internal: return "Internal";
  }
  return "Unknown";
}

bool Hull::contains(int v) const {
  return std::binary_search(vertices.begin(), vertices.end(), v);
}

std::optional<int> TreeSpec::find_vertex(const std::string& name) const {
  for (int v = 0; v < vertex_count(); ++v) {
    if (names_[v] == name) return v;
  }
  return std::nullopt;
}

std::optional<int> TreeSpec::find_tail(const std::string& id) const {
  for (int t = 0; t < static_cast<int>(tails_.size()); ++t) {
    if (tails_[t].id == id) return t;
  }
  return std::nullopt;
}

double TreeSpec::p(int x, int y) const { return edge_p_[edge_index(x, y)]; }

int TreeSpec::edge_index(int x, int y) const {
  if (x < 0 || x >= vertex_count() || y < 0 || y >= vertex_count()) {
    throw Error(Errc::UnknownVertex, "core vertex index out of range");
  }
  const auto& nb = adj_[x];
  auto it = std::lower_bound(nb.begin(), nb.end(), y);
  if (it == nb.end() || *it != y) {
    throw Error(Errc::NotAdjacent,
                names_[x] + " and " + names_[y] + " are not adjacent");
  }
  return edge_ix_[x][static_cast<int>(it - nb.begin())];
}

VertexAddress TreeSpec::parse_vertex(const std::string& token) const {
  if (auto v = find_vertex(token)) return VertexAddress::core_vertex(*v);
  auto at = token.rfind('@');
  if (at != std::string::npos) {
    std::string id = token.substr(0, at);
    std::string num = token.substr(at + 1);
    if (auto t = find_tail(id)) {
      int depth = 0;
      auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), depth);
      if (ec == std::errc() && ptr == num.data() + num.size() && depth >= 1) {
        return VertexAddress::tail_vertex(*t, depth);
      }
      throw Error(Errc::BadInput, "bad tail depth in '" + token + "' (want id@n with n >= 1)");
    }
  }
  throw Error(Errc::UnknownVertex, "no vertex or tail address named '" + token + "'");
}

std::string TreeSpec::format_vertex(const VertexAddress& a) const {
  if (a.is_core()) return names_[a.core];
  return tails_[a.tail].id + "@" + std::to_string(a.depth);
}

void TreeSpec::check_address(const VertexAddress& a) const {
  if (a.is_core()) {
    if (a.core < 0 || a.core >= vertex_count()) {
      throw Error(Errc::UnknownVertex, "core vertex index out of range");
    }
  } else {
    if (a.tail < 0 || a.tail >= static_cast<int>(tails_.size()) || a.depth < 1) {
      throw Error(Errc::UnknownVertex, "tail address out of range");
    }
  }
}

int TreeSpec::lca(int x, int y) const {
  while (x != y) {
    if (depth_[x] < depth_[y]) std::swap(x, y);
    x = parent_[x];
  }
  return x;
}

std::vector<int> TreeSpec::core_geodesic(int x, int y) const {
  int m = lca(x, y);
  std::vector<int> up;
  for (int v = x; v != m; v = parent_[v]) up.push_back(v);
  up.push_back(m);
  std::vector<int> down;
  for (int v = y; v != m; v = parent_[v]) down.push_back(v);
  up.insert(up.end(), down.rbegin(), down.rend());
  return up;
}

int TreeSpec::step_toward(int from, int target) const {
  if (from == target) throw Error(Errc::Internal, "step_toward with equal endpoints");
  return core_geodesic(from, target)[1];
}

std::vector<VertexAddress> TreeSpec::geodesic(VertexAddress x, VertexAddress y) const {
  check_address(x);
  check_address(y);
  // Same-tail addresses lie on one canonical ray: the path is monotone in depth.
  if (!x.is_core() && !y.is_core() && x.tail == y.tail) {
    std::vector<VertexAddress> path;
    int step = x.depth <= y.depth ? 1 : -1;
    for (int d = x.depth;; d += step) {
      path.push_back(VertexAddress::tail_vertex(x.tail, d));
      if (d == y.depth) break;
    }
    return path;
  }
  std::vector<VertexAddress> head;  // x down to its attach (exclusive)
  int cx = x.is_core() ? x.core : tails_[x.tail].attach;
  if (!x.is_core()) {
    for (int d = x.depth; d >= 1; --d) head.push_back(VertexAddress::tail_vertex(x.tail, d));
  }
  int cy = y.is_core() ? y.core : tails_[y.tail].attach;
  for (int v : core_geodesic(cx, cy)) head.push_back(VertexAddress::core_vertex(v));
  if (!y.is_core()) {
    for (int d = 1; d <= y.depth; ++d) head.push_back(VertexAddress::tail_vertex(y.tail, d));
  }
  return head;
}

VertexAddress TreeSpec::confluent(VertexAddress x, VertexAddress y, VertexAddress z) const {
  auto gx = geodesic(z, x);
  auto gy = geodesic(z, y);
  size_t i = 0;
  while (i < gx.size() && i < gy.size() && gx[i] == gy[i]) ++i;
  return gx[i - 1];
}

bool TreeSpec::core_branch_infinite(int from, int to) const {
  // The branch hanging at `to` away from `from` is infinite exactly when it
  // carries at least one tail somewhere (the core itself is finite).
  std::deque<int> queue{to};
  std::vector<char> seen(vertex_count(), 0);
  seen[from] = seen[to] = 1;
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    if (!tails_at_[v].empty()) return true;
    for (int n : adj_[v]) {
      if (!seen[n]) {
        seen[n] = 1;
        queue.push_back(n);
      }
    }
  }
  return false;
}

bool TreeSpec::subtree_infinite(VertexAddress x, VertexAddress y) const {
  check_address(x);
  check_address(y);
  if (x.is_core() && y.is_core()) {
    // Adjacency required; edge_index throws otherwise.
    (void)edge_index(x.core, y.core);
    return core_branch_infinite(x.core, y.core);
  }
  if (x.is_core() && !y.is_core()) {
    if (tails_[y.tail].attach != x.core || y.depth != 1) {
      throw Error(Errc::NotAdjacent, "tail vertex not adjacent to given core vertex");
    }
    return true;  // every tail branch is infinite
  }
  if (!x.is_core() && !y.is_core()) {
    if (x.tail != y.tail || std::abs(x.depth - y.depth) != 1) {
      throw Error(Errc::NotAdjacent, "tail addresses not adjacent");
    }
    if (y.depth > x.depth) return true;  // deeper into the tail
  } else {
    // x in a tail, y core: must be the attach edge.
    if (tails_[x.tail].attach != y.core || x.depth != 1) {
      throw Error(Errc::NotAdjacent, "tail vertex not adjacent to given core vertex");
    }
  }
  // Toward the core from inside tail t: the branch is everything except the
  // subtree below x. That is infinite iff some other tail exists, or this
  // tail branches (sibling subtrees at or below y are then infinite).
  int t = x.tail;
  if (tails_.size() >= 2) return true;
  return tails_[t].interior_children() >= 2;
}

Hull TreeSpec::hull(const std::vector<int>& generators) const {
  std::set<int> verts{root_};
  for (int g : generators) {
    if (g < 0 || g >= vertex_count()) {
      throw Error(Errc::UnknownVertex, "hull generator index out of range");
    }
    for (int v = g; v != root_; v = parent_[v]) verts.insert(v);
  }
  Hull h;
  h.vertices.assign(verts.begin(), verts.end());
  for (int v : h.vertices) {
    if (v != root_) h.edges.emplace_back(v, parent_[v]);
  }
  for (int v : h.vertices) {
    for (int n : adj_[v]) {
      if (!verts.count(n)) {
        ExitEdge e;
        e.vertex = v;
        e.core_to = n;
        e.infinite = core_branch_infinite(v, n);
        h.exits.push_back(e);
      }
    }
    for (int t : tails_at_[v]) {
      ExitEdge e;
      e.vertex = v;
      e.tail = t;
      e.multiplicity = tails_[t].entry_count();
      e.infinite = true;
      h.exits.push_back(e);
    }
  }
  return h;
}

int TreeSpec::end_count_capped() const {
  int ends = 0;
  for (const auto& t : tails_) {
    ends += t.interior_children() >= 2 ? 2 : 1;
    if (ends >= 2) return 2;
  }
  return ends;
}

// ---------------------------------------------------------------------------
// Parsing and validation
// ---------------------------------------------------------------------------

namespace {

struct Builder {
  std::vector<ValidationIssue> issues;

  void add(Errc code, std::string msg) { issues.push_back({code, std::move(msg)}); }

  static bool get_number(const json& j, const char* key, double& out) {
    if (!j.contains(key) || !j[key].is_number()) return false;
    out = j[key].get<double>();
    return true;
  }
};

}  // namespace

std::pair<std::optional<TreeSpec>, std::vector<ValidationIssue>> TreeSpec::validate(
    const json& doc) {
  Builder b;
  TreeSpec spec;

  if (!doc.is_object()) {
    b.add(Errc::BadInput, "tree description must be a JSON object");
    return {std::nullopt, b.issues};
  }
  if (!doc.contains("root") || !doc["root"].is_string()) {
    b.add(Errc::BadInput, "missing string field 'root'");
    return {std::nullopt, b.issues};
  }
  const std::string root_name = doc["root"].get<std::string>();

  std::map<std::string, int> index;
  auto intern = [&](const std::string& name) {
    auto it = index.find(name);
    if (it != index.end()) return it->second;
    int v = static_cast<int>(spec.names_.size());
    index.emplace(name, v);
    spec.names_.push_back(name);
    return v;
  };
  intern(root_name);
  spec.root_ = 0;

  struct RawEdge {
    int a, b;
    double pab, pba;
  };
  std::vector<RawEdge> raw;
  std::set<std::pair<int, int>> seen_edges;
  if (doc.contains("edges")) {
    if (!doc["edges"].is_array()) {
      b.add(Errc::BadInput, "'edges' must be an array");
      return {std::nullopt, b.issues};
    }
    int i = 0;
    for (const auto& e : doc["edges"]) {
      std::string where = "edges[" + std::to_string(i++) + "]";
      if (!e.is_object() || !e.contains("a") || !e.contains("b") ||
          !e["a"].is_string() || !e["b"].is_string()) {
        b.add(Errc::BadInput, where + ": need string fields 'a' and 'b'");
        continue;
      }
      double pab = 0, pba = 0;
      if (!Builder::get_number(e, "p_ab", pab) || !Builder::get_number(e, "p_ba", pba)) {
        b.add(Errc::BadInput, where + ": need numeric fields 'p_ab' and 'p_ba'");
        continue;
      }
      int a = intern(e["a"].get<std::string>());
      int bb = intern(e["b"].get<std::string>());
      if (a == bb) {
        b.add(Errc::NotATree, where + ": self-loop at '" + spec.names_[a] + "'");
        continue;
      }
      auto key = std::minmax(a, bb);
      if (!seen_edges.insert({key.first, key.second}).second) {
        b.add(Errc::NotATree, where + ": duplicate edge");
        continue;
      }
      if (!(pab > 0.0) || pab > 1.0 || !(pba > 0.0) || pba > 1.0) {
        b.add(Errc::NonPositiveEdge, where + ": edge probabilities must lie in (0,1]");
        continue;
      }
      raw.push_back({a, bb, pab, pba});
    }
  }

  int n = spec.vertex_count();
  if (static_cast<int>(raw.size()) != n - 1) {
    b.add(Errc::NotATree, "core has " + std::to_string(raw.size()) + " edges but " +
                              std::to_string(n) + " vertices; a tree needs n-1");
  }

  spec.adj_.assign(n, {});
  for (const auto& e : raw) {
    spec.adj_[e.a].push_back(e.b);
    spec.adj_[e.b].push_back(e.a);
  }
  for (auto& nb : spec.adj_) std::sort(nb.begin(), nb.end());

  // Connectivity check (combined with the edge count this certifies a tree).
  {
    std::vector<char> seen(n, 0);
    std::deque<int> queue{spec.root_};
    seen[spec.root_] = 1;
    int reached = 1;
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      for (int m : spec.adj_[v]) {
        if (!seen[m]) {
          seen[m] = 1;
          ++reached;
          queue.push_back(m);
        }
      }
    }
    if (reached != n) {
      b.add(Errc::NotATree, "core is not connected from the root");
    }
  }
  if (!b.issues.empty()) return {std::nullopt, b.issues};

  // Directed edge tables, adjacency-slot aligned.
  spec.edge_ix_.assign(n, {});
  for (int v = 0; v < n; ++v) spec.edge_ix_[v].assign(spec.adj_[v].size(), -1);
  auto p_lookup = [&](int x, int y) -> double {
    for (const auto& e : raw) {
      if (e.a == x && e.b == y) return e.pab;
      if (e.b == x && e.a == y) return e.pba;
    }
    return 0.0;
  };
  for (int v = 0; v < n; ++v) {
    for (size_t s = 0; s < spec.adj_[v].size(); ++s) {
      int w = spec.adj_[v][s];
      spec.edge_ix_[v][s] = static_cast<int>(spec.edge_from_.size());
      spec.edge_from_.push_back(v);
      spec.edge_to_.push_back(w);
      spec.edge_p_.push_back(p_lookup(v, w));
    }
  }
  spec.reverse_.assign(spec.edge_from_.size(), -1);
  for (int e = 0; e < spec.directed_edge_count(); ++e) {
    spec.reverse_[e] = spec.edge_index(spec.edge_to_[e], spec.edge_from_[e]);
  }

  // Rooted arrays.
  spec.parent_.assign(n, -1);
  spec.depth_.assign(n, 0);
  {
    std::deque<int> queue{spec.root_};
    std::vector<char> seen(n, 0);
    seen[spec.root_] = 1;
    spec.parent_[spec.root_] = spec.root_;
    while (!queue.empty()) {
      int v = queue.front();
      queue.pop_front();
      for (int m : spec.adj_[v]) {
        if (!seen[m]) {
          seen[m] = 1;
          spec.parent_[m] = v;
          spec.depth_[m] = spec.depth_[v] + 1;
          queue.push_back(m);
        }
      }
    }
  }

  // Tails.
  spec.tails_at_.assign(n, {});
  if (doc.contains("tails")) {
    if (!doc["tails"].is_array()) {
      b.add(Errc::BadInput, "'tails' must be an array");
      return {std::nullopt, b.issues};
    }
    std::set<std::string> ids;
    int i = 0;
    for (const auto& tj : doc["tails"]) {
      std::string where = "tails[" + std::to_string(i++) + "]";
      TailSpec t;
      if (!tj.is_object() || !tj.contains("id") || !tj["id"].is_string() ||
          !tj.contains("attach") || !tj["attach"].is_string() ||
          !tj.contains("kind") || !tj["kind"].is_string()) {
        b.add(Errc::BadInput, where + ": need string fields 'id', 'attach', 'kind'");
        continue;
      }
      t.id = tj["id"].get<std::string>();
      if (t.id.empty() || !ids.insert(t.id).second) {
        b.add(Errc::BadInput, where + ": tail ids must be nonempty and unique");
        continue;
      }
      if (index.count(t.id)) {
        b.add(Errc::BadInput, where + ": tail id collides with a core vertex name");
        continue;
      }
      auto it = index.find(tj["attach"].get<std::string>());
      if (it == index.end()) {
        b.add(Errc::UnknownVertex, where + ": unknown attach vertex '" +
                                       tj["attach"].get<std::string>() + "'");
        continue;
      }
      t.attach = it->second;
      std::string kind = tj["kind"].get<std::string>();
      if (!Builder::get_number(tj, "entry_p", t.entry_p) || !(t.entry_p > 0.0) ||
          t.entry_p > 1.0) {
        b.add(Errc::NonPositiveEdge, where + ": 'entry_p' must lie in (0,1]");
        continue;
      }
      if (kind == "ray") {
        t.kind = TailKind::Ray;
        if (!Builder::get_number(tj, "forward", t.forward) ||
            !Builder::get_number(tj, "back", t.back)) {
          b.add(Errc::BadInput, where + ": ray tails need 'forward' and 'back'");
          continue;
        }
        if (!(t.forward > 0.0) || t.forward >= 1.0 || !(t.back > 0.0) || t.back >= 1.0) {
          b.add(Errc::NonPositiveEdge, where + ": ray step probabilities must lie in (0,1)");
          continue;
        }
        if (std::abs(t.forward + t.back - 1.0) > kRowSumTol) {
          b.add(Errc::ProbabilitySum, where + ": forward + back must equal 1");
          continue;
        }
      } else if (kind == "homogeneous") {
        t.kind = TailKind::Homogeneous;
        if (!tj.contains("branching") || !tj["branching"].is_number_integer() ||
            tj["branching"].get<int>() < 1) {
          b.add(Errc::BadInput, where + ": homogeneous tails need integer 'branching' >= 1");
          continue;
        }
        t.branching = tj["branching"].get<int>();
        if (!Builder::get_number(tj, "child_p", t.child_p) ||
            !Builder::get_number(tj, "back_p", t.back_p)) {
          b.add(Errc::BadInput, where + ": homogeneous tails need 'child_p' and 'back_p'");
          continue;
        }
        if (!(t.child_p > 0.0) || t.child_p >= 1.0 || !(t.back_p > 0.0) || t.back_p >= 1.0) {
          b.add(Errc::NonPositiveEdge, where + ": tail step probabilities must lie in (0,1)");
          continue;
        }
        if (std::abs(t.back_p + t.branching * t.child_p - 1.0) > kRowSumTol) {
          b.add(Errc::ProbabilitySum, where + ": back_p + branching*child_p must equal 1");
          continue;
        }
      } else {
        b.add(Errc::BadInput, where + ": 'kind' must be \"ray\" or \"homogeneous\"");
        continue;
      }
      int ix = static_cast<int>(spec.tails_.size());
      spec.tails_.push_back(t);
      spec.tails_at_[t.attach].push_back(ix);
    }
  }

  // Row sums at core vertices.
  for (int v = 0; v < n; ++v) {
    double sum = 0.0;
    for (size_t s = 0; s < spec.adj_[v].size(); ++s) sum += spec.edge_p_[spec.edge_ix_[v][s]];
    for (int t : spec.tails_at_[v]) sum += spec.tails_[t].entry_total();
    if (std::abs(sum - 1.0) > kRowSumTol) {
      std::ostringstream os;
      os.precision(17);
      os << "transition row at '" << spec.names_[v] << "' sums to " << sum << ", not 1";
      b.add(Errc::ProbabilitySum, os.str());
    }
  }

  if (!b.issues.empty()) return {std::nullopt, b.issues};
  return {std::move(spec), {}};
}

TreeSpec TreeSpec::from_json(const json& doc) {
  auto [spec, issues] = validate(doc);
  if (!spec) {
    std::string msg;
    for (const auto& i : issues) {
      if (!msg.empty()) msg += "; ";
      msg += i.message;
    }
    throw Error(issues.empty() ? Errc::BadInput : issues.front().code, msg);
  }
  return std::move(*spec);
}

}  // namespace martinlab
