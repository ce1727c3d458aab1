#pragma once

// Harmonic (exit) measures of boundary cylinders, computed in closed form
// from directed-edge hitting probabilities via last-passage decomposition,
// plus the unit flow they induce and harmonic extensions of cylinder
// functions.

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "martinlab/hitting_solver.hpp"
#include "martinlab/tree_model.hpp"

namespace martinlab {

// nu_x of the set of ends through the directed edge (v -> n), where n is a
// core neighbour of v or the first vertex of a tail at v. Return
// probabilities within the solver's one-threshold are snapped to 1, so
// recurrent-side cylinders carry exactly zero mass.
double branch_measure(const TreeSpec& t, const EdgeF& ef, VertexAddress x,
                      VertexAddress v, VertexAddress n);

// nu_x of the cylinder of ends through core vertex w, seen from reference o.
// Requires w != o.
double cylinder_measure(const TreeSpec& t, const EdgeF& ef, VertexAddress x, int w, int o);

// nu_x of all ends entering tail tt. x must be a core vertex.
double tail_measure(const TreeSpec& t, const EdgeF& ef, int x, int tt);

// Unit flow out of o: every core edge oriented away from o plus every tail
// entry bundle carries the harmonic measure of the ends beyond it.
struct FluxEdge {
  int from = -1, to = -1;  // core edge oriented away from o
  bool infinite = false;
  double flow = 0.0;
};
struct FluxTail {
  int vertex = -1, tail = -1;
  double flow = 0.0;  // whole entry bundle
};
struct FluxReport {
  std::vector<FluxEdge> edges;
  std::vector<FluxTail> tails;
  // Kirchhoff defect per core vertex (at o: |1 - outflow|).
  std::vector<double> conservation;
  double max_conservation_defect = 0.0;
};
FluxReport flux(const TreeSpec& t, const EdgeF& ef, int o);

// Finitely supported boundary function: constant on the cylinder at each cut
// vertex, `fallback` elsewhere. Cut vertices must be core, distinct from the
// reference, and pairwise incomparable seen from it.
struct CylinderFunction {
  std::vector<std::pair<int, double>> cut;  // (core vertex, value)
  double fallback = 0.0;

  static CylinderFunction from_json(const TreeSpec& t, const nlohmann::json& doc);
};

void validate_antichain(const TreeSpec& t, const CylinderFunction& fn, int o);

// Harmonic extension h(x) = integral of the cylinder function against nu_x.
std::vector<double> harmonic_extension(const TreeSpec& t, const EdgeF& ef,
                                       const CylinderFunction& fn,
                                       std::span<const VertexAddress> query, int o);

// Largest one-step mean deviation |h(x) - sum_y p(x,y) h(y)| over the given
// core vertices; tail neighbours are evaluated by the closed-form measures.
double harmonicity_residual(const TreeSpec& t, const EdgeF& ef, const CylinderFunction& fn,
                            std::span<const int> vertices, int o);

}  // namespace martinlab
