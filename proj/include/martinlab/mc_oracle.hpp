#pragma once

// Monte Carlo cross-checks: simulate the walk on the finitely described
// infinite tree (tail positions tracked as depth plus shared canonical-ray
// prefix, which is exact by tail symmetry) and estimate hitting
// probabilities and cylinder masses. Per-trial RNG streams are derived from
// (seed, trial index), so runs shard and reproduce deterministically.

#include <cstdint>
#include <span>

#include "martinlab/tree_model.hpp"

namespace martinlab {

struct WalkConfig {
  long trials = 100000;
  long horizon = 10000;
  std::uint64_t seed = 1;
  int depth = 30;        // one-sided excursion depth that decides a cylinder trial
  long first_trial = 0;  // stream offset, for sharding
};

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
  long trials_used = 0;
  long censored = 0;  // trials whose outcome the horizon left undecided
  long hits = 0;      // decided-positive count
  long decided = 0;   // denominator behind `value`
};

// Fraction of trials from x that hit y within the horizon. Censored trials
// count as misses, so the value is a lower bound for the true probability.
Estimate estimate_f(const TreeSpec& t, VertexAddress x, VertexAddress y,
                    const WalkConfig& cfg);

// nu_x of the cylinder of ends through core vertex w (reference o), decided
// per trial once the walk runs `depth` deep on one side of the cut edge
// without switching sides; undecided trials are excluded and reported.
Estimate estimate_cylinder(const TreeSpec& t, VertexAddress x, int w, int o,
                           const WalkConfig& cfg);

// Exact pooling of shard results (sums the integer counts).
Estimate pool(std::span<const Estimate> shards);

}  // namespace martinlab
