#include "martinlab/hitting_solver.hpp"

#include <algorithm>
#include <cmath>

namespace martinlab {

namespace {

// Minimal nonnegative root of q_fwd*f^2 - f + q_back = 0, written to avoid
// cancellation. This is the closed-form seed for a tail's f_down.
double tail_down_root(double q_back, double q_fwd) {
  double disc = std::max(0.0, 1.0 - 4.0 * q_fwd * q_back);
  return std::min(1.0, 2.0 * q_back / (1.0 + std::sqrt(disc)));
}

struct EdgeTerm {
  double weight;  // p(x,z) or a tail's total entry probability
  int unknown;    // index into the iterate vector
};

}  // namespace

EdgeF solve_hitting(const TreeSpec& t, double tol, long max_iter,
                    const IterationObserver& observer) {
  const int ne = t.directed_edge_count();
  const int nt = static_cast<int>(t.tails().size());

  // Unknown layout: directed core edges first, then one f_down per tail.
  std::vector<double> cur(ne + nt, 0.0), next(ne + nt, 0.0);
  std::vector<double> base(ne + nt, 0.0);
  std::vector<std::vector<EdgeTerm>> terms(ne);

  for (int e = 0; e < ne; ++e) {
    auto [x, y] = t.edge_vertices(e);
    base[e] = t.p(x, y);
    for (int z : t.neighbors(x)) {
      if (z == y) continue;
      terms[e].push_back({t.p(x, z), t.edge_index(z, x)});
    }
    for (int tt : t.tails_at(x)) {
      terms[e].push_back({t.tail(tt).entry_total(), ne + tt});
    }
  }
  for (int tt = 0; tt < nt; ++tt) {
    const TailSpec& ts = t.tail(tt);
    base[ne + tt] = ts.step_back();
    // Seeded with the exact minimal root; the iteration keeps it fixed.
    cur[ne + tt] = tail_down_root(ts.step_back(), ts.step_forward_total());
  }

  auto apply = [&](const std::vector<double>& v, std::vector<double>& out) {
    for (int e = 0; e < ne; ++e) {
      double s = 0.0;
      for (const EdgeTerm& term : terms[e]) s += term.weight * v[term.unknown];
      out[e] = std::min(1.0, base[e] + s * v[e]);
    }
    for (int tt = 0; tt < nt; ++tt) {
      double q_fwd = t.tail(tt).step_forward_total();
      out[ne + tt] = std::min(1.0, base[ne + tt] + q_fwd * v[ne + tt] * v[ne + tt]);
    }
  };

  EdgeF ef;
  ef.tol = tol;
  long iter = 0;
  double delta = 0.0;
  for (; iter < max_iter; ++iter) {
    if (observer && iter % 100 == 0) observer(iter, std::span<const double>(cur));
    apply(cur, next);
    delta = 0.0;
    for (size_t i = 0; i < cur.size(); ++i) delta = std::max(delta, std::abs(next[i] - cur[i]));
    cur.swap(next);
    if (delta < tol) {
      ef.converged = true;
      ++iter;
      break;
    }
  }
  ef.iterations = iter;

  // Report the defect of the iterate actually returned.
  apply(cur, next);
  for (size_t i = 0; i < cur.size(); ++i) {
    ef.residual = std::max(ef.residual, std::abs(next[i] - cur[i]));
  }

  ef.edge_f.assign(cur.begin(), cur.begin() + ne);
  ef.tails.resize(nt);
  for (int tt = 0; tt < nt; ++tt) {
    const TailSpec& ts = t.tail(tt);
    TailF& tf = ef.tails[tt];
    tf.f_down = cur[ne + tt];

    // F(attach -> fixed first-level child): entry_p / (1 - S) where S sums the
    // return contributions of every other move out of the attach vertex.
    double s = 0.0;
    for (int z : t.neighbors(ts.attach)) s += t.p(ts.attach, z) * ef.edge_f[t.edge_index(z, ts.attach)];
    for (int ot : t.tails_at(ts.attach)) {
      if (ot == tt) {
        s += (ts.entry_count() - 1) * ts.entry_p * cur[ne + ot];
      } else {
        s += t.tail(ot).entry_total() * cur[ne + ot];
      }
    }
    tf.f_up_entry = std::min(1.0, ts.entry_p / (1.0 - s));

    // Deep-tail limit: minimal root of B u^2 - (1 - C) u + fwd = 0 with
    // B the back step, fwd one child step, C the sidestep-and-return weight.
    double b = ts.step_back();
    double fwd = ts.step_forward_each();
    double c = (ts.interior_children() - 1) * fwd * tf.f_down;
    double disc = std::max(0.0, (1.0 - c) * (1.0 - c) - 4.0 * b * fwd);
    tf.f_up_limit = std::min(1.0, 2.0 * fwd / ((1.0 - c) + std::sqrt(disc)));
  }
  return ef;
}

double tail_up(const TreeSpec& t, const EdgeF& ef, int tt, int n) {
  const TailSpec& ts = t.tail(tt);
  const TailF& tf = ef.tails[tt];
  double u = tf.f_up_entry;
  double b = ts.step_back();
  double fwd = ts.step_forward_each();
  double c = (ts.interior_children() - 1) * fwd * tf.f_down;
  for (int k = 0; k < n; ++k) u = std::min(1.0, fwd / (1.0 - b * u - c));
  return u;
}

namespace {

double step_f(const TreeSpec& t, const EdgeF& ef, const VertexAddress& a,
              const VertexAddress& b) {
  if (a.is_core() && b.is_core()) return ef.edge_f[t.edge_index(a.core, b.core)];
  if (a.is_core()) return tail_up(t, ef, b.tail, 0);
  if (b.is_core()) return ef.tails[a.tail].f_down;
  if (b.depth > a.depth) return tail_up(t, ef, a.tail, a.depth);
  return ef.tails[a.tail].f_down;
}

}  // namespace

double f_between(const TreeSpec& t, const EdgeF& ef, VertexAddress x, VertexAddress y) {
  require_converged(ef);
  auto path = t.geodesic(x, y);
  double f = 1.0;
  for (size_t i = 0; i + 1 < path.size(); ++i) f *= step_f(t, ef, path[i], path[i + 1]);
  return f;
}

ReturnProbability return_probability(const TreeSpec& t, const EdgeF& ef, int x) {
  require_converged(ef);
  double u = 0.0;
  for (int z : t.neighbors(x)) u += t.p(x, z) * ef.edge_f[t.edge_index(z, x)];
  for (int tt : t.tails_at(x)) u += t.tail(tt).entry_total() * ef.tails[tt].f_down;
  ReturnProbability r;
  r.value = std::min(1.0, u);
  r.transient = !ef.effectively_one(r.value);
  return r;
}

bool is_transient(const TreeSpec& t, const EdgeF& ef) {
  bool verdict = return_probability(t, ef, t.root()).transient;
  for (int v = 0; v < t.vertex_count(); ++v) {
    if (return_probability(t, ef, v).transient != verdict) {
      throw Error(Errc::Internal,
                  "transience verdict differs across vertices; the description sits on "
                  "the critical boundary at working precision");
    }
  }
  return verdict;
}

void require_transient(const TreeSpec& t, const EdgeF& ef) {
  if (!is_transient(t, ef)) {
    throw Error(Errc::RecurrentWalk, "walk is recurrent; boundary objects are degenerate");
  }
}

void require_converged(const EdgeF& ef) {
  if (!ef.converged) {
    throw Error(Errc::NotConverged, "hitting solve did not converge; rerun with a larger "
                                    "iteration budget or looser tolerance");
  }
}

BranchReport branch_scan(const TreeSpec& t, const EdgeF& ef) {
  require_converged(ef);
  require_transient(t, ef);
  BranchReport report;
  for (int e = 0; e < t.directed_edge_count(); ++e) {
    auto [x, y] = t.edge_vertices(e);
    BranchEntry be;
    be.label = t.vertex_name(x) + "->" + t.vertex_name(y);
    be.from_core = x;
    be.core_to = y;
    be.infinite = t.core_branch_infinite(x, y);
    be.f_return = ef.edge_f[t.reverse_edge(e)];
    be.recurrent = be.infinite && ef.effectively_one(be.f_return);
    report.entries.push_back(std::move(be));
  }
  for (int tt = 0; tt < static_cast<int>(t.tails().size()); ++tt) {
    const TailSpec& ts = t.tail(tt);
    BranchEntry out;
    out.label = t.vertex_name(ts.attach) + "->" + ts.id + " (into tail)";
    out.from_core = ts.attach;
    out.tail = tt;
    out.infinite = true;
    out.f_return = ef.tails[tt].f_down;
    out.recurrent = ef.effectively_one(out.f_return);
    report.entries.push_back(std::move(out));

    BranchEntry in;
    in.label = ts.id + "@1->" + t.vertex_name(ts.attach);
    in.tail = tt;
    in.inward = true;
    in.infinite = t.subtree_infinite(VertexAddress::tail_vertex(tt, 1),
                                     VertexAddress::core_vertex(ts.attach));
    in.f_return = ef.tails[tt].f_up_entry;
    in.recurrent = in.infinite && ef.effectively_one(in.f_return);
    report.entries.push_back(std::move(in));
  }
  for (const auto& e : report.entries) {
    if (e.recurrent) report.all_infinite_transient = false;
  }
  return report;
}

}  // namespace martinlab
