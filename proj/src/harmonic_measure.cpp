#include "martinlab/harmonic_measure.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <nlohmann/json.hpp>

namespace martinlab {

namespace {

// Mass a = nu_n(ends beyond the directed edge v -> n), derived by splitting a
// trajectory from n at its last visit to n: a = (1 - F(n->v)) / (1 - F(n->v) F(v->n)).
// Snapping: if the branch beyond n is recurrent (F(n->v) effectively 1) the
// cylinder carries no mass at all.
double edge_side_mass(const TreeSpec& t, const EdgeF& ef, const VertexAddress& v,
                      const VertexAddress& n) {
  double f_back = f_between(t, ef, n, v);
  if (ef.effectively_one(f_back)) return 0.0;
  double f_in = f_between(t, ef, v, n);
  double denom = 1.0 - f_back * f_in;
  if (!(denom > 0.0)) {
    throw Error(Errc::DegenerateCylinder, "cylinder mass 0/0: both branches recurrent");
  }
  return (1.0 - f_back) / denom;
}

bool on_side_of(const TreeSpec& t, const VertexAddress& x, const VertexAddress& v,
                const VertexAddress& n) {
  if (x == n) return true;
  auto path = t.geodesic(x, v);
  return std::find(path.begin(), path.end(), n) != path.end();
}

}  // namespace

double branch_measure(const TreeSpec& t, const EdgeF& ef, VertexAddress x,
                      VertexAddress v, VertexAddress n) {
  require_converged(ef);
  require_transient(t, ef);
  double a = edge_side_mass(t, ef, v, n);
  // An uncharged branch is uncharged seen from everywhere; the inside-view
  // formula below would otherwise leave the iteration gap of F(x,n) behind.
  if (a == 0.0) return 0.0;
  if (on_side_of(t, x, v, n)) {
    return 1.0 - f_between(t, ef, x, n) * (1.0 - a);
  }
  return f_between(t, ef, x, n) * a;
}

double cylinder_measure(const TreeSpec& t, const EdgeF& ef, VertexAddress x, int w, int o) {
  if (w == o) {
    throw Error(Errc::BadInput, "cylinder root must differ from the reference vertex");
  }
  int v = t.step_toward(w, o);  // also validates the indices
  return branch_measure(t, ef, x, VertexAddress::core_vertex(v), VertexAddress::core_vertex(w));
}

double tail_measure(const TreeSpec& t, const EdgeF& ef, int x, int tt) {
  const TailSpec& ts = t.tail(tt);
  // All entry branches carry the same mass seen from any core vertex.
  double per_child = branch_measure(t, ef, VertexAddress::core_vertex(x),
                                    VertexAddress::core_vertex(ts.attach),
                                    VertexAddress::tail_vertex(tt, 1));
  return per_child * ts.entry_count();
}

FluxReport flux(const TreeSpec& t, const EdgeF& ef, int o) {
  require_converged(ef);
  require_transient(t, ef);
  FluxReport r;
  std::vector<double> inflow(t.vertex_count(), 0.0);
  std::vector<double> outflow(t.vertex_count(), 0.0);
  inflow[o] = 1.0;
  VertexAddress oa = VertexAddress::core_vertex(o);
  for (int e = 0; e < t.directed_edge_count(); ++e) {
    auto [x, y] = t.edge_vertices(e);
    // Keep only the orientation pointing away from o.
    if (y == o) continue;
    if (t.step_toward(y, o) != x) continue;
    FluxEdge fe;
    fe.from = x;
    fe.to = y;
    fe.infinite = t.core_branch_infinite(x, y);
    fe.flow = branch_measure(t, ef, oa, VertexAddress::core_vertex(x),
                             VertexAddress::core_vertex(y));
    outflow[x] += fe.flow;
    inflow[y] += fe.flow;
    r.edges.push_back(fe);
  }
  for (int tt = 0; tt < static_cast<int>(t.tails().size()); ++tt) {
    FluxTail ft;
    ft.vertex = t.tail(tt).attach;
    ft.tail = tt;
    ft.flow = tail_measure(t, ef, o, tt);
    outflow[ft.vertex] += ft.flow;
    r.tails.push_back(ft);
  }
  r.conservation.resize(t.vertex_count());
  for (int v = 0; v < t.vertex_count(); ++v) {
    r.conservation[v] = std::abs(inflow[v] - outflow[v]);
    r.max_conservation_defect = std::max(r.max_conservation_defect, r.conservation[v]);
  }
  return r;
}

CylinderFunction CylinderFunction::from_json(const TreeSpec& t, const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("cut") || !doc["cut"].is_array()) {
    throw Error(Errc::BadInput, "cylinder function needs an array field 'cut'");
  }
  CylinderFunction fn;
  if (doc.contains("default")) {
    if (!doc["default"].is_number()) {
      throw Error(Errc::BadInput, "'default' must be a number");
    }
    fn.fallback = doc["default"].get<double>();
  }
  for (const auto& item : doc["cut"]) {
    if (!item.is_object() || !item.contains("vertex") || !item["vertex"].is_string() ||
        !item.contains("value") || !item["value"].is_number()) {
      throw Error(Errc::BadInput, "each cut entry needs string 'vertex' and numeric 'value'");
    }
    auto v = t.find_vertex(item["vertex"].get<std::string>());
    if (!v) {
      throw Error(Errc::UnknownVertex,
                  "unknown cut vertex '" + item["vertex"].get<std::string>() + "'");
    }
    fn.cut.emplace_back(*v, item["value"].get<double>());
  }
  return fn;
}

void validate_antichain(const TreeSpec& t, const CylinderFunction& fn, int o) {
  std::set<int> seen;
  for (const auto& [w, value] : fn.cut) {
    (void)value;
    if (w == o) {
      throw Error(Errc::BadAntichain, "cut contains the reference vertex");
    }
    if (!seen.insert(w).second) {
      throw Error(Errc::BadAntichain, "cut vertex '" + t.vertex_name(w) + "' repeated");
    }
  }
  for (const auto& [w1, v1] : fn.cut) {
    (void)v1;
    for (const auto& [w2, v2] : fn.cut) {
      (void)v2;
      if (w1 == w2) continue;
      auto path = t.core_geodesic(o, w2);
      if (std::find(path.begin(), path.end(), w1) != path.end()) {
        throw Error(Errc::BadAntichain, "cut vertex '" + t.vertex_name(w1) +
                                            "' lies between the reference and '" +
                                            t.vertex_name(w2) + "'");
      }
    }
  }
}

std::vector<double> harmonic_extension(const TreeSpec& t, const EdgeF& ef,
                                       const CylinderFunction& fn,
                                       std::span<const VertexAddress> query, int o) {
  require_converged(ef);
  require_transient(t, ef);
  validate_antichain(t, fn, o);
  std::vector<double> out;
  out.reserve(query.size());
  for (const VertexAddress& x : query) {
    double h = 0.0;
    double covered = 0.0;
    for (const auto& [w, value] : fn.cut) {
      double m = cylinder_measure(t, ef, x, w, o);
      h += value * m;
      covered += m;
    }
    h += fn.fallback * (1.0 - covered);
    out.push_back(h);
  }
  return out;
}

double harmonicity_residual(const TreeSpec& t, const EdgeF& ef, const CylinderFunction& fn,
                            std::span<const int> vertices, int o) {
  double worst = 0.0;
  auto h_at = [&](VertexAddress x) {
    std::vector<VertexAddress> q{x};
    return harmonic_extension(t, ef, fn, q, o)[0];
  };
  for (int x : vertices) {
    double mean = 0.0;
    for (int y : t.neighbors(x)) {
      mean += t.p(x, y) * h_at(VertexAddress::core_vertex(y));
    }
    for (int tt : t.tails_at(x)) {
      mean += t.tail(tt).entry_total() * h_at(VertexAddress::tail_vertex(tt, 1));
    }
    worst = std::max(worst, std::abs(h_at(VertexAddress::core_vertex(x)) - mean));
  }
  return worst;
}

}  // namespace martinlab
