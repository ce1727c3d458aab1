#include "martinlab/martin_kernel.hpp"

#include <algorithm>

namespace martinlab {

double kernel_vertex(const TreeSpec& t, const EdgeF& ef, VertexAddress o, VertexAddress x,
                     VertexAddress y) {
  require_converged(ef);
  require_transient(t, ef);
  return f_between(t, ef, x, y) / f_between(t, ef, o, y);
}

double kernel_sup(const TreeSpec& t, const EdgeF& ef, VertexAddress o, VertexAddress x) {
  require_converged(ef);
  require_transient(t, ef);
  return 1.0 / f_between(t, ef, o, x);
}

double DirectionClass::profile_at(int hull_vertex) const {
  auto it = std::lower_bound(hull_vertices.begin(), hull_vertices.end(), hull_vertex);
  if (it == hull_vertices.end() || *it != hull_vertex) {
    throw Error(Errc::VertexOutsideHull, "kernel profile only covers the hull");
  }
  return profile[static_cast<size_t>(it - hull_vertices.begin())];
}

double kernel_boundary(const DirectionClass& cls, int hull_vertex) {
  return cls.profile_at(hull_vertex);
}

std::vector<DirectionClass> direction_classes(const TreeSpec& t, const EdgeF& ef,
                                              const Hull& hull, int o) {
  require_converged(ef);
  require_transient(t, ef);
  VertexAddress oa = VertexAddress::core_vertex(o);
  std::vector<DirectionClass> classes;
  for (int v : hull.vertices) {
    DirectionClass cls;
    cls.exit_vertex = v;
    for (const ExitEdge& e : hull.exits) {
      if (e.vertex != v) continue;
      cls.exits.push_back(e);
      cls.has_infinite_branch = cls.has_infinite_branch || e.infinite;
      if (e.tail >= 0) {
        cls.cylinder_mass += tail_measure(t, ef, o, e.tail);
      } else {
        cls.cylinder_mass += branch_measure(t, ef, oa, VertexAddress::core_vertex(v),
                                            VertexAddress::core_vertex(e.core_to));
      }
    }
    if (!cls.has_infinite_branch) continue;  // no ends leave here
    // The kernel toward any end beyond v, evaluated at hull vertex x, only
    // sees the confluent of x and v with respect to o.
    VertexAddress va = VertexAddress::core_vertex(v);
    cls.hull_vertices = hull.vertices;
    cls.profile.reserve(hull.vertices.size());
    for (int x : hull.vertices) {
      VertexAddress m = t.confluent(VertexAddress::core_vertex(x), va, oa);
      cls.profile.push_back(f_between(t, ef, VertexAddress::core_vertex(x), m) /
                            f_between(t, ef, oa, m));
    }
    classes.push_back(std::move(cls));
  }
  return classes;
}

}  // namespace martinlab
