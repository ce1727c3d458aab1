#include "martinlab/mc_oracle.hpp"

#include <cmath>
#include <deque>
#include <vector>

namespace martinlab {

namespace {

struct SplitMix64 {
  std::uint64_t s;
  std::uint64_t next() {
    s += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
};

struct Xoshiro256SS {
  std::uint64_t s[4];

  static Xoshiro256SS seeded(std::uint64_t seed, std::uint64_t trial) {
    SplitMix64 sm{seed ^ (0x9E3779B97F4A7C15ULL * (trial + 1))};
    Xoshiro256SS x;
    for (auto& w : x.s) w = sm.next();
    return x;
  }

  static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  std::uint64_t next() {
    std::uint64_t result = rotl(s[1] * 5, 7) * 9;
    std::uint64_t t = s[1] << 17;
    s[2] ^= s[0];
    s[3] ^= s[1];
    s[1] ^= s[2];
    s[0] ^= s[3];
    s[2] ^= t;
    s[3] = rotl(s[3], 45);
    return result;
  }

  double unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
};

// Walker position: on the core, or inside a tail at depth `depth` sharing a
// prefix of length `canon` with the canonical ray.
struct WalkState {
  int core = -1;
  int tail = -1;
  int depth = 0;
  int canon = 0;
};

struct CoreMove {
  double cum;
  int kind;  // 0: core step, 1: canonical tail entry, 2: sibling tail entry
  int target;
};

struct Simulator {
  const TreeSpec& t;
  std::vector<std::vector<CoreMove>> rows;

  explicit Simulator(const TreeSpec& tree) : t(tree) {
    rows.resize(t.vertex_count());
    for (int v = 0; v < t.vertex_count(); ++v) {
      double cum = 0.0;
      for (int n : t.neighbors(v)) {
        cum += t.p(v, n);
        rows[v].push_back({cum, 0, n});
      }
      for (int tt : t.tails_at(v)) {
        const TailSpec& ts = t.tail(tt);
        cum += ts.entry_p;
        rows[v].push_back({cum, 1, tt});
        if (ts.entry_count() > 1) {
          cum += ts.entry_p * (ts.entry_count() - 1);
          rows[v].push_back({cum, 2, tt});
        }
      }
      rows[v].back().cum = 1.0;  // guard against roundoff in the last slot
    }
  }

  WalkState start(const VertexAddress& a) const {
    WalkState s;
    if (a.is_core()) {
      s.core = a.core;
    } else {
      s.tail = a.tail;
      s.depth = a.depth;
      s.canon = a.depth;  // addresses live on the canonical ray
    }
    return s;
  }

  void step(WalkState& s, double u) const {
    if (s.core >= 0) {
      const auto& row = rows[s.core];
      size_t i = 0;
      while (i + 1 < row.size() && u >= row[i].cum) ++i;
      const CoreMove& mv = row[i];
      if (mv.kind == 0) {
        s.core = mv.target;
      } else {
        s.core = -1;
        s.tail = mv.target;
        s.depth = 1;
        s.canon = mv.kind == 1 ? 1 : 0;
      }
      return;
    }
    const TailSpec& ts = t.tail(s.tail);
    if (u < ts.step_back()) {
      if (s.depth == 1) {
        s.core = ts.attach;
        s.tail = -1;
        s.depth = s.canon = 0;
      } else {
        --s.depth;
        s.canon = std::min(s.canon, s.depth);
      }
      return;
    }
    // Forward move: when on the canonical ray, the first child slot stays on it.
    bool stay_canonical = false;
    if (s.canon == s.depth) {
      double rel = u - ts.step_back();
      stay_canonical = rel < ts.step_forward_each();
    }
    ++s.depth;
    if (stay_canonical) ++s.canon;
  }
};

Estimate finalize(long trials, long hits, long decided, long censored) {
  Estimate e;
  e.trials_used = trials;
  e.hits = hits;
  e.decided = decided;
  e.censored = censored;
  if (decided > 0) {
    e.value = static_cast<double>(hits) / static_cast<double>(decided);
    e.std_error = std::sqrt(e.value * (1.0 - e.value) / static_cast<double>(decided));
  } else {
    e.std_error = 1.0;
  }
  return e;
}

}  // namespace

Estimate estimate_f(const TreeSpec& t, VertexAddress x, VertexAddress y,
                    const WalkConfig& cfg) {
  t.check_address(x);
  t.check_address(y);
  Simulator sim(t);
  auto hit_target = [&](const WalkState& s) {
    if (y.is_core()) return s.core == y.core;
    return s.tail == y.tail && s.depth == y.depth && s.canon == s.depth;
  };
  long hits = 0;
  for (long i = 0; i < cfg.trials; ++i) {
    auto rng = Xoshiro256SS::seeded(cfg.seed, static_cast<std::uint64_t>(cfg.first_trial + i));
    WalkState s = sim.start(x);
    bool hit = hit_target(s);
    for (long step = 0; !hit && step < cfg.horizon; ++step) {
      sim.step(s, rng.unit());
      hit = hit_target(s);
    }
    if (hit) ++hits;
  }
  return finalize(cfg.trials, hits, cfg.trials, cfg.trials - hits);
}

Estimate estimate_cylinder(const TreeSpec& t, VertexAddress x, int w, int o,
                           const WalkConfig& cfg) {
  t.check_address(x);
  if (w == o) throw Error(Errc::BadInput, "cylinder root must differ from the reference");
  int v = t.step_toward(w, o);
  Simulator sim(t);

  // Signed distance to w: positive on w's side of the cut edge (v,w).
  std::vector<int> dist(t.vertex_count(), 0);
  std::vector<char> in_side(t.vertex_count(), 0);
  {
    std::deque<int> queue{w};
    std::vector<char> seen(t.vertex_count(), 0);
    seen[w] = 1;
    while (!queue.empty()) {
      int c = queue.front();
      queue.pop_front();
      for (int n : t.neighbors(c)) {
        if (!seen[n]) {
          seen[n] = 1;
          dist[n] = dist[c] + 1;
          queue.push_back(n);
        }
      }
    }
    std::deque<int> side{w};
    std::vector<char> seen2(t.vertex_count(), 0);
    seen2[w] = seen2[v] = 1;
    in_side[w] = 1;
    while (!side.empty()) {
      int c = side.front();
      side.pop_front();
      for (int n : t.neighbors(c)) {
        if (!seen2[n]) {
          seen2[n] = 1;
          in_side[n] = 1;
          side.push_back(n);
        }
      }
    }
  }
  auto position = [&](const WalkState& s, bool& in, int& d) {
    int c = s.core >= 0 ? s.core : t.tail(s.tail).attach;
    in = in_side[c];
    d = dist[c] + (s.core >= 0 ? 0 : s.depth);
  };

  long hits = 0, decided = 0;
  for (long i = 0; i < cfg.trials; ++i) {
    auto rng = Xoshiro256SS::seeded(cfg.seed, static_cast<std::uint64_t>(cfg.first_trial + i));
    WalkState s = sim.start(x);
    bool side = false;
    int d = 0;
    position(s, side, d);
    int max_d = d;
    bool done = false;
    for (long step = 0; step < cfg.horizon; ++step) {
      if (max_d >= cfg.depth) {
        ++decided;
        if (side) ++hits;
        done = true;
        break;
      }
      sim.step(s, rng.unit());
      bool side2 = false;
      position(s, side2, d);
      if (side2 != side) {
        side = side2;
        max_d = d;
      } else {
        max_d = std::max(max_d, d);
      }
    }
    if (!done && max_d >= cfg.depth) {
      ++decided;
      if (side) ++hits;
    }
  }
  return finalize(cfg.trials, hits, decided, cfg.trials - decided);
}

Estimate pool(std::span<const Estimate> shards) {
  long trials = 0, hits = 0, decided = 0, censored = 0;
  for (const Estimate& e : shards) {
    trials += e.trials_used;
    hits += e.hits;
    decided += e.decided;
    censored += e.censored;
  }
  return finalize(trials, hits, decided, censored);
}

}  // namespace martinlab
