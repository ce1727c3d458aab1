#pragma once

// Minimal nonnegative solution of the one-step equations for directed-edge
// hitting probabilities F(x->y), found by monotone fixed-point iteration
// from zero. Tail unknowns are self-similar: one f_down per tail plus an
// up-the-tail chain computed on demand.

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "martinlab/tree_model.hpp"

namespace martinlab {

struct TailF {
  double f_down = 0.0;      // tail vertex -> its parent (depth independent)
  double f_up_entry = 0.0;  // attach vertex -> a fixed first-level tail vertex
  double f_up_limit = 0.0;  // deep-tail limit of the up-edge values
};

struct EdgeF {
  std::vector<double> edge_f;  // by directed core edge index
  std::vector<TailF> tails;
  double residual = 0.0;  // sup-norm fixed-point defect of the returned iterate
  long iterations = 0;
  bool converged = false;
  double tol = 1e-12;

  // Values this close to 1 are treated as exactly 1 by recurrence predicates.
  double one_threshold() const { return 10.0 * tol; }
  bool effectively_one(double f) const { return f >= 1.0 - one_threshold(); }
};

// Called every 100 iterations with the current iterate (core edges, then one
// f_down per tail); lets tests observe monotone convergence.
using IterationObserver = std::function<void(long iter, std::span<const double>)>;

EdgeF solve_hitting(const TreeSpec& t, double tol = 1e-12, long max_iter = 1000000,
                    const IterationObserver& observer = {});

// F(x_n -> x_{n+1}) along the canonical ray of tail tt; n = 0 is the attach
// vertex. Computed by the forward recursion, no state.
double tail_up(const TreeSpec& t, const EdgeF& ef, int tt, int n);

// Hitting probability between arbitrary addresses: product of directed
// one-step F values along the geodesic. f_between(x, x) = 1.
double f_between(const TreeSpec& t, const EdgeF& ef, VertexAddress x, VertexAddress y);

// Return probability U(x,x) and the transience verdict. The verdict is
// recomputed at every core vertex and must agree (hard assertion).
struct ReturnProbability {
  double value = 0.0;
  bool transient = false;
};
ReturnProbability return_probability(const TreeSpec& t, const EdgeF& ef, int x);
bool is_transient(const TreeSpec& t, const EdgeF& ef);
void require_transient(const TreeSpec& t, const EdgeF& ef);  // throws RecurrentWalk
void require_converged(const EdgeF& ef);                     // throws NotConverged

// One entry per direction a walker can leave through and return from:
// both orientations of every core edge, each tail outward, and each tail
// head looking back at the rest of the tree.
struct BranchEntry {
  std::string label;
  int from_core = -1;  // core vertex the direction leaves from (-1: inside tail)
  int core_to = -1;    // core neighbour, or -1
  int tail = -1;       // tail index, or -1
  bool inward = false; // tail-head looking back toward the core
  bool infinite = false;
  double f_return = 0.0;  // probability of coming back through the cut edge
  bool recurrent = false; // infinite branch with f_return effectively 1
};

struct BranchReport {
  std::vector<BranchEntry> entries;
  bool all_infinite_transient = true;
};

BranchReport branch_scan(const TreeSpec& t, const EdgeF& ef);

}  // namespace martinlab
