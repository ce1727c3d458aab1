#pragma once

// Martin kernel k_o(x,y) = F(x,y)/F(o,y) and its boundary limits. On a tree
// the limit along any end is determined by the confluent with the reference,
// so boundary kernels restricted to a hull are finite profiles indexed by
// the hull's exit directions.

#include <vector>

#include "martinlab/harmonic_measure.hpp"
#include "martinlab/hitting_solver.hpp"
#include "martinlab/tree_model.hpp"

namespace martinlab {

// All ends leaving the hull at one vertex: the kernel seen from hull vertices
// is constant over them, and the class carries their total harmonic measure.
struct DirectionClass {
  int exit_vertex = -1;
  std::vector<ExitEdge> exits;       // all hull exits at this vertex
  bool has_infinite_branch = false;  // true for every emitted class
  double cylinder_mass = 0.0;        // nu_o of the union of exit cylinders
  std::vector<int> hull_vertices;    // sorted, same order as profile
  std::vector<double> profile;       // k_o(x, xi) for x in hull, xi any end in the class

  double profile_at(int hull_vertex) const;  // throws VertexOutsideHull
};

double kernel_vertex(const TreeSpec& t, const EdgeF& ef, VertexAddress o, VertexAddress x,
                     VertexAddress y);

// sup over y of k_o(x, y); attained toward x and equal to 1/F(o,x).
double kernel_sup(const TreeSpec& t, const EdgeF& ef, VertexAddress o, VertexAddress x);

// One class per hull vertex that has at least one infinite exit branch.
std::vector<DirectionClass> direction_classes(const TreeSpec& t, const EdgeF& ef,
                                              const Hull& hull, int o);

double kernel_boundary(const DirectionClass& cls, int hull_vertex);

}  // namespace martinlab
