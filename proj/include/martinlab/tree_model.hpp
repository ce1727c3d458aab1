#pragma once

// Finite description of an infinite tree with nearest-neighbour transition
// probabilities: a finite core tree plus self-similar infinite tails hanging
// off core vertices. All geometry (geodesics, confluents, hulls) is computed
// on demand from this finite data.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "martinlab/errors.hpp"

namespace martinlab {

enum class TailKind { Ray, Homogeneous };

struct TailSpec {
  std::string id;
  int attach = -1;  // core vertex the tail hangs from
  TailKind kind = TailKind::Ray;
  // Probability from the attach vertex to each first-level tail vertex.
  double entry_p = 0.0;
  // Ray parameters: away-from-core / toward-core step probabilities.
  double forward = 0.0;
  double back = 0.0;
  // Homogeneous parameters: every tail vertex has `branching` children,
  // each reached with child_p, and steps back with back_p.
  int branching = 1;
  double child_p = 0.0;
  double back_p = 0.0;

  // Number of first-level tail vertices below the attach vertex.
  int entry_count() const { return kind == TailKind::Homogeneous ? branching : 1; }
  double entry_total() const { return entry_p * static_cast<double>(entry_count()); }
  // Interior step structure (identical at every tail vertex).
  int interior_children() const { return kind == TailKind::Homogeneous ? branching : 1; }
  double step_back() const { return kind == TailKind::Homogeneous ? back_p : back; }
  double step_forward_each() const { return kind == TailKind::Homogeneous ? child_p : forward; }
  double step_forward_total() const { return step_forward_each() * interior_children(); }
};

// Address of a vertex: either a core vertex, or the depth-n vertex on the
// canonical ray of a tail (every tail carries one distinguished ray; by the
// symmetry of homogeneous tails this loses nothing for the quantities here).
struct VertexAddress {
  int core = -1;   // core vertex index, or -1
  int tail = -1;   // tail index, or -1
  int depth = 0;   // >= 1 for tail vertices

  static VertexAddress core_vertex(int v) { return {v, -1, 0}; }
  static VertexAddress tail_vertex(int t, int d) { return {-1, t, d}; }
  bool is_core() const { return tail < 0; }
  friend bool operator==(const VertexAddress&, const VertexAddress&) = default;
};

// One edge leaving the hull: either toward a core vertex outside the hull or
// into a tail. Tail exits carry the whole entry bundle (multiplicity =
// number of first-level children, all equivalent by symmetry).
struct ExitEdge {
  int vertex = -1;    // hull vertex the edge leaves from
  int core_to = -1;   // core neighbour outside the hull, or -1
  int tail = -1;      // tail index, or -1
  int multiplicity = 1;
  bool infinite = false;  // does the branch beyond contain infinitely many vertices
};

// Geodesically closed finite set of core vertices: union of the geodesics
// from the root to each generator (in a tree that union is already closed).
struct Hull {
  std::vector<int> vertices;                 // sorted core indices
  std::vector<std::pair<int, int>> edges;    // induced core edges (child, parent-toward-root)
  std::vector<ExitEdge> exits;

  bool contains(int v) const;
};

class TreeSpec {
 public:
  // Parses and fully validates; throws Error(BadInput) carrying all issues.
  static TreeSpec from_json(const nlohmann::json& doc);
  // Non-throwing variant: returns the description when valid plus all diagnostics.
  static std::pair<std::optional<TreeSpec>, std::vector<ValidationIssue>> validate(
      const nlohmann::json& doc);

  int root() const { return root_; }
  int vertex_count() const { return static_cast<int>(names_.size()); }
  const std::string& vertex_name(int v) const { return names_[v]; }
  std::optional<int> find_vertex(const std::string& name) const;

  const std::vector<TailSpec>& tails() const { return tails_; }
  const TailSpec& tail(int t) const { return tails_[t]; }
  std::optional<int> find_tail(const std::string& id) const;
  const std::vector<int>& tails_at(int v) const { return tails_at_[v]; }

  const std::vector<int>& neighbors(int v) const { return adj_[v]; }
  double p(int x, int y) const;          // one-step probability along a core edge
  int edge_index(int x, int y) const;    // directed core edge id; throws NotAdjacent
  int directed_edge_count() const { return static_cast<int>(edge_from_.size()); }
  std::pair<int, int> edge_vertices(int e) const { return {edge_from_[e], edge_to_[e]}; }
  int reverse_edge(int e) const { return reverse_[e]; }

  // Address handling. parse_vertex accepts a core vertex name or "tail@depth".
  VertexAddress parse_vertex(const std::string& token) const;
  std::string format_vertex(const VertexAddress& a) const;
  void check_address(const VertexAddress& a) const;  // throws UnknownVertex

  // Geometry.
  std::vector<VertexAddress> geodesic(VertexAddress x, VertexAddress y) const;
  VertexAddress confluent(VertexAddress x, VertexAddress y, VertexAddress z) const;
  bool subtree_infinite(VertexAddress x, VertexAddress y) const;  // branch beyond y, seen from adjacent x
  Hull hull(const std::vector<int>& generators) const;            // always includes the root

  // Core helpers used across modules.
  std::vector<int> core_geodesic(int x, int y) const;
  bool core_branch_infinite(int from, int to) const;  // core branch at `to` away from `from`
  int step_toward(int from, int target) const;        // first core step from `from` toward `target`
  // Number of topological ends, capped at 2 (enough to distinguish 0/1/many).
  int end_count_capped() const;

 private:
  int root_ = 0;
  std::vector<std::string> names_;
  std::vector<std::vector<int>> adj_;
  std::vector<int> edge_from_, edge_to_, reverse_;
  std::vector<double> edge_p_;
  std::vector<std::vector<int>> edge_ix_;  // dense lookup [from][slot aligned with adj_]
  std::vector<TailSpec> tails_;
  std::vector<std::vector<int>> tails_at_;
  std::vector<int> parent_, depth_;  // rooted at root_

  int lca(int x, int y) const;
};

}  // namespace martinlab
