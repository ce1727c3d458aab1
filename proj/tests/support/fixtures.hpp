#pragma once

// Shared test fixtures: two reference trees with exact values derived by
// hand from the one-step equations (frozen below), unrolled descriptions of
// the same infinite trees with bigger cores, and randomized transient specs.

#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "martinlab/tree_model.hpp"

namespace fixtures {

using nlohmann::json;

inline martinlab::TreeSpec make(const json& j) { return martinlab::TreeSpec::from_json(j); }

// ---------------------------------------------------------------------------
// Reference tree 1 "t3": simple random walk on the 3-regular tree, described
// as a star core {o,a,b,c} with a branching-2 homogeneous tail at each leaf.
//
// Hand-derived: every directed edge and every tail unknown solves
// f = 1/3 + (2/3) f^2, so F = 1/2 throughout; U(x,x) = 1/2 (transient);
// per-edge far-side mass a = (1-1/2)/(1-1/4) = 2/3; each root cylinder has
// nu_o = (1/2)(2/3) = 1/3; tail up-chain is constant 1/2.
// ---------------------------------------------------------------------------
inline json t3() {
  const double th = 1.0 / 3.0;
  json tails = json::array();
  for (std::string v : {"a", "b", "c"}) {
    tails.push_back({{"id", "t" + v},
                     {"attach", v},
                     {"kind", "homogeneous"},
                     {"entry_p", th},
                     {"branching", 2},
                     {"child_p", th},
                     {"back_p", th}});
  }
  return json{{"root", "o"},
              {"edges",
               {{{"a", "o"}, {"b", "a"}, {"p_ab", th}, {"p_ba", th}},
                {{"a", "o"}, {"b", "b"}, {"p_ab", th}, {"p_ba", th}},
                {{"a", "o"}, {"b", "c"}, {"p_ab", th}, {"p_ba", th}}}},
              {"tails", tails}};
}

inline constexpr double kT3EdgeF = 0.5;
inline constexpr double kT3Return = 0.5;
inline constexpr double kT3SideMass = 2.0 / 3.0;      // far-side mass of any edge
inline constexpr double kT3RootCylinder = 1.0 / 3.0;  // nu_o of each root cylinder
inline constexpr double kT3UpLimit = 0.5;
// Harmonic extension of the indicator of the cylinder at a:
// h(o) = 1/3, h(a) = 2/3, h(b) = h(c) = 1/6.
inline constexpr double kT3IndicatorAtA = 2.0 / 3.0;
inline constexpr double kT3IndicatorAtB = 1.0 / 6.0;
// Kernel profile of the direction class at a: {o:1, a:2, b:1/2, c:1/2}.
inline constexpr double kT3ProfileAtA = 2.0;
inline constexpr double kT3ProfileSibling = 0.5;

// ---------------------------------------------------------------------------
// Reference tree 2 "t4_line": a grafted half-line. Core o - r1 - r2, a
// branching-3 homogeneous tail at o and a critical symmetric ray at r2.
//
// Hand-derived minimal solution:
//   f_down(h) = 1/3, f_down(ray) = 1,
//   F(o->r1) = 1/3, F(r1->o) = 1, F(r1->r2) = 3/5, F(r2->r1) = 1,
//   U(o,o) = 1/2 (transient), u0(h) = 3/7, up-chain limit g(h) = 1/3,
//   per-child cylinder mass at o = 1/3 (class mass 1), ray cylinder mass 0.
// For mu = delta_r1 - delta_r2 the class at o has residual 0 and the class
// at r2 has residual (F(r1,r2) - 1)/F(o,r2) = -2: weak holds, strong fails.
// ---------------------------------------------------------------------------
inline json t4_line() {
  return json{
      {"root", "o"},
      {"edges",
       {{{"a", "o"}, {"b", "r1"}, {"p_ab", 0.25}, {"p_ba", 0.5}},
        {{"a", "r1"}, {"b", "r2"}, {"p_ab", 0.5}, {"p_ba", 0.5}}}},
      {"tails",
       {{{"id", "h"},
         {"attach", "o"},
         {"kind", "homogeneous"},
         {"entry_p", 0.25},
         {"branching", 3},
         {"child_p", 0.25},
         {"back_p", 0.25}},
        {{"id", "ray"},
         {"attach", "r2"},
         {"kind", "ray"},
         {"entry_p", 0.5},
         {"forward", 0.5},
         {"back", 0.5}}}}};
}

inline constexpr double kT4FDownH = 1.0 / 3.0;
inline constexpr double kT4FDownRay = 1.0;
inline constexpr double kT4FOtoR1 = 1.0 / 3.0;
inline constexpr double kT4FR1toO = 1.0;
inline constexpr double kT4FR1toR2 = 0.6;
inline constexpr double kT4FR2toR1 = 1.0;
inline constexpr double kT4Return = 0.5;
inline constexpr double kT4U0 = 3.0 / 7.0;
inline constexpr double kT4UpLimit = 1.0 / 3.0;
inline constexpr double kT4PerChildMass = 1.0 / 3.0;
inline constexpr double kT4LineResidual = -2.0;
// Kernel of the class at r2 evaluated at r1: F(r1,r2)/F(o,r2) = 3.
inline constexpr double kT4BoundaryKernelAtR1 = 3.0;

// Measure file for mu = delta_r1 - delta_r2 (reference o).
inline json t4_example_measure() {
  return json{{"reference", "o"}, {"weights", {{"r1", 1.0}, {"r2", -1.0}}}};
}

// ---------------------------------------------------------------------------
// Unrolled descriptions of the same two infinite trees with radius-3 cores,
// for tests that need measure support away from the original core.
// ---------------------------------------------------------------------------
inline json t3_unrolled() {
  const double th = 1.0 / 3.0;
  json edges = json::array();
  json tails = json::array();
  std::vector<std::string> level1 = {"a", "b", "c"};
  for (const auto& v : level1) {
    edges.push_back({{"a", "o"}, {"b", v}, {"p_ab", th}, {"p_ba", th}});
  }
  std::vector<std::string> level2, level3;
  for (const auto& v : level1) {
    for (int k = 0; k < 2; ++k) {
      std::string c = v + std::to_string(k);
      level2.push_back(c);
      edges.push_back({{"a", v}, {"b", c}, {"p_ab", th}, {"p_ba", th}});
    }
  }
  for (const auto& v : level2) {
    for (int k = 0; k < 2; ++k) {
      std::string c = v + std::to_string(k);
      level3.push_back(c);
      edges.push_back({{"a", v}, {"b", c}, {"p_ab", th}, {"p_ba", th}});
    }
  }
  for (const auto& v : level3) {
    tails.push_back({{"id", "t" + v},
                     {"attach", v},
                     {"kind", "homogeneous"},
                     {"entry_p", th},
                     {"branching", 2},
                     {"child_p", th},
                     {"back_p", th}});
  }
  return json{{"root", "o"}, {"edges", edges}, {"tails", tails}};
}

inline json t4_unrolled() {
  json edges = json::array();
  json tails = json::array();
  edges.push_back({{"a", "o"}, {"b", "r1"}, {"p_ab", 0.25}, {"p_ba", 0.5}});
  edges.push_back({{"a", "r1"}, {"b", "r2"}, {"p_ab", 0.5}, {"p_ba", 0.5}});
  edges.push_back({{"a", "r2"}, {"b", "r3"}, {"p_ab", 0.5}, {"p_ba", 0.5}});
  tails.push_back({{"id", "ray"},
                   {"attach", "r3"},
                   {"kind", "ray"},
                   {"entry_p", 0.5},
                   {"forward", 0.5},
                   {"back", 0.5}});
  for (std::string v : {"h1", "h2", "h3"}) {
    edges.push_back({{"a", "o"}, {"b", v}, {"p_ab", 0.25}, {"p_ba", 0.25}});
    tails.push_back({{"id", "t" + v},
                     {"attach", v},
                     {"kind", "homogeneous"},
                     {"entry_p", 0.25},
                     {"branching", 3},
                     {"child_p", 0.25},
                     {"back_p", 0.25}});
  }
  return json{{"root", "o"}, {"edges", edges}, {"tails", tails}};
}

// Single-vertex core with one ray: recurrent when fwd <= 1/2, transient
// otherwise; always exactly one end.
inline json pure_ray(double fwd) {
  return json{{"root", "o"},
              {"edges", json::array()},
              {"tails",
               {{{"id", "ray"},
                 {"attach", "o"},
                 {"kind", "ray"},
                 {"entry_p", 1.0},
                 {"forward", fwd},
                 {"back", 1.0 - fwd}}}}};
}

// t3 with an extra pendant core leaf at a (and a's row rebalanced): the
// leaf's branch is finite, everything stays transient.
inline json t3_pendant() {
  json j = t3();
  j["edges"].push_back({{"a", "a"}, {"b", "leaf"}, {"p_ab", 0.25}, {"p_ba", 1.0}});
  for (auto& e : j["edges"]) {
    if (e["b"] == "a") e["p_ba"] = 0.25;  // a -> o
  }
  for (auto& t : j["tails"]) {
    if (t["attach"] == "a") t["entry_p"] = 0.25;  // a -> each tail child
  }
  return j;
}

// ---------------------------------------------------------------------------
// Randomized specs. Always transient: at least one homogeneous tail is
// forced supercritical (children outweigh the back step).
// ---------------------------------------------------------------------------
inline json random_transient(std::mt19937_64& rng, int max_core = 7) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> core_n(2, max_core);
  int n = core_n(rng);
  std::vector<std::string> names;
  for (int v = 0; v < n; ++v) names.push_back("v" + std::to_string(v));

  // Random tree shape: attach vertex i to a uniformly chosen earlier vertex.
  std::vector<std::pair<int, int>> shape;
  for (int v = 1; v < n; ++v) {
    std::uniform_int_distribution<int> pick(0, v - 1);
    shape.emplace_back(pick(rng), v);
  }

  // Tails: one forced supercritical homogeneous tail at a random vertex,
  // then a few optional extras of either kind.
  struct RawTail {
    int attach;
    bool hom;
    int b;
    double back;
  };
  std::vector<RawTail> raw_tails;
  std::uniform_int_distribution<int> pick_vertex(0, n - 1);
  std::uniform_int_distribution<int> pick_b(2, 3);
  raw_tails.push_back({pick_vertex(rng), true, pick_b(rng), 0.15 + 0.3 * unit(rng)});
  int extras = static_cast<int>(unit(rng) * 3);
  for (int k = 0; k < extras; ++k) {
    bool hom = unit(rng) < 0.5;
    double back = hom ? 0.2 + 0.6 * unit(rng) : 0.3 + 0.4 * unit(rng);
    raw_tails.push_back({pick_vertex(rng), hom, pick_b(rng), back});
  }

  // Row weights: every incident edge and tail bundle gets a positive share.
  std::vector<std::vector<double>> weight(n);  // aligned with move lists below
  std::vector<std::vector<int>> core_moves(n);
  std::vector<std::vector<int>> tail_moves(n);
  for (int v = 0; v < n; ++v) (void)v;
  for (size_t e = 0; e < shape.size(); ++e) {
    core_moves[shape[e].first].push_back(static_cast<int>(e));
    core_moves[shape[e].second].push_back(static_cast<int>(e));
  }
  for (size_t tt = 0; tt < raw_tails.size(); ++tt) {
    tail_moves[raw_tails[tt].attach].push_back(static_cast<int>(tt));
  }

  std::vector<double> p_ab(shape.size()), p_ba(shape.size());
  std::vector<double> entry(raw_tails.size());
  for (int v = 0; v < n; ++v) {
    size_t slots = core_moves[v].size() + tail_moves[v].size();
    std::vector<double> w(slots);
    double total = 0.0;
    for (auto& x : w) {
      x = 0.2 + unit(rng);
      total += x;
    }
    size_t i = 0;
    for (int e : core_moves[v]) {
      double share = w[i++] / total;
      if (shape[e].first == v) {
        p_ab[e] = share;
      } else {
        p_ba[e] = share;
      }
    }
    for (int tt : tail_moves[v]) entry[tt] = w[i++] / total;
  }

  json edges = json::array();
  for (size_t e = 0; e < shape.size(); ++e) {
    edges.push_back({{"a", names[shape[e].first]},
                     {"b", names[shape[e].second]},
                     {"p_ab", p_ab[e]},
                     {"p_ba", p_ba[e]}});
  }
  json tails = json::array();
  for (size_t tt = 0; tt < raw_tails.size(); ++tt) {
    const RawTail& rt = raw_tails[tt];
    if (rt.hom) {
      tails.push_back({{"id", "tail" + std::to_string(tt)},
                       {"attach", names[rt.attach]},
                       {"kind", "homogeneous"},
                       {"entry_p", entry[tt] / rt.b},
                       {"branching", rt.b},
                       {"child_p", (1.0 - rt.back) / rt.b},
                       {"back_p", rt.back}});
    } else {
      tails.push_back({{"id", "tail" + std::to_string(tt)},
                       {"attach", names[rt.attach]},
                       {"kind", "ray"},
                       {"entry_p", entry[tt]},
                       {"forward", 1.0 - rt.back},
                       {"back", rt.back}});
    }
  }
  return json{{"root", names[0]}, {"edges", edges}, {"tails", tails}};
}

// Random measure supported on up to max_support core vertices of t.
inline json random_measure(std::mt19937_64& rng, const martinlab::TreeSpec& t,
                           int max_support, const std::string& reference) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> count(1, max_support);
  std::uniform_int_distribution<int> pick(0, t.vertex_count() - 1);
  json weights = json::object();
  int k = count(rng);
  for (int i = 0; i < k; ++i) {
    double w = 2.0 * unit(rng) - 1.0;
    if (w == 0.0) w = 0.5;
    weights[t.vertex_name(pick(rng))] = w;
  }
  return json{{"reference", reference}, {"weights", weights}};
}

}  // namespace fixtures
