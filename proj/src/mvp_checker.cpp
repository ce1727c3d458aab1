#include "martinlab/mvp_checker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

namespace martinlab {

using nlohmann::json;

double SignedMeasure::total_mass() const {
  double s = 0.0;
  for (const auto& [v, w] : weights) s += w;
  return s;
}

double SignedMeasure::total_variation() const {
  double s = 0.0;
  for (const auto& [v, w] : weights) s += std::abs(w);
  return s;
}

std::vector<int> SignedMeasure::support() const {
  std::vector<int> s;
  s.reserve(weights.size());
  for (const auto& [v, w] : weights) s.push_back(v);
  return s;
}

double GeometricTailMeasure::total_mass() const {
  return base.total_mass() + head / (1.0 - ratio);
}

double GeometricTailMeasure::total_variation() const {
  return base.total_variation() + std::abs(head) / (1.0 - std::abs(ratio));
}

GeometricTailMeasure MeasureFile::as_tail_measure() const {
  if (!tail) throw Error(Errc::InvalidMeasure, "measure has no tail part");
  GeometricTailMeasure gm;
  gm.base = base;
  gm.tail = tail->tail;
  gm.ratio = tail->ratio;
  gm.head = tail->head;
  return gm;
}

MeasureFile MeasureFile::from_json(const TreeSpec& t, const json& doc) {
  if (!doc.is_object()) throw Error(Errc::BadInput, "measure must be a JSON object");
  if (!doc.contains("reference") || !doc["reference"].is_string()) {
    throw Error(Errc::BadInput, "measure needs a string field 'reference'");
  }
  MeasureFile m;
  auto ref = t.find_vertex(doc["reference"].get<std::string>());
  if (!ref) {
    throw Error(Errc::UnknownVertex,
                "unknown reference vertex '" + doc["reference"].get<std::string>() + "'");
  }
  m.reference = *ref;
  if (doc.contains("weights")) {
    if (!doc["weights"].is_object()) throw Error(Errc::BadInput, "'weights' must be an object");
    for (const auto& [key, val] : doc["weights"].items()) {
      if (!val.is_number()) throw Error(Errc::BadInput, "weight at '" + key + "' must be numeric");
      auto v = t.find_vertex(key);
      if (!v) {
        // Distinguish a tail address (unsupported support) from a typo.
        try {
          (void)t.parse_vertex(key);
          throw Error(Errc::NonCoreSupport,
                      "measure weight at tail address '" + key + "'; support must be core");
        } catch (const Error& e) {
          if (e.code() == Errc::NonCoreSupport) throw;
          throw Error(Errc::UnknownVertex, "unknown support vertex '" + key + "'");
        }
      }
      double w = val.get<double>();
      if (w != 0.0) m.base.weights.emplace_back(*v, w);
    }
    std::sort(m.base.weights.begin(), m.base.weights.end());
  }
  if (doc.contains("tail")) {
    const auto& tp = doc["tail"];
    if (!tp.is_object() || !tp.contains("id") || !tp["id"].is_string() ||
        !tp.contains("ratio") || !tp["ratio"].is_number() || !tp.contains("head") ||
        !tp["head"].is_number()) {
      throw Error(Errc::BadInput, "tail part needs 'id' (string), 'ratio' and 'head' (numbers)");
    }
    auto tt = t.find_tail(tp["id"].get<std::string>());
    if (!tt) {
      throw Error(Errc::UnknownVertex, "unknown tail '" + tp["id"].get<std::string>() + "'");
    }
    MeasureFile::TailPart part;
    part.tail = *tt;
    part.ratio = tp["ratio"].get<double>();
    part.head = tp["head"].get<double>();
    if (!(std::abs(part.ratio) < 1.0)) {
      throw Error(Errc::InvalidMeasure, "tail ratio must satisfy |ratio| < 1");
    }
    m.tail = part;
  }
  if (m.base.weights.empty() && (!m.tail || m.tail->head == 0.0)) {
    throw Error(Errc::InvalidMeasure, "measure has empty support");
  }
  return m;
}

double l_value(const SignedMeasure& mu, const std::function<double(int)>& h, int o) {
  double s = 0.0;
  for (const auto& [v, w] : mu.weights) s += w * h(v);
  return s - mu.total_mass() * h(o);
}

double l_value(const SignedMeasure& mu, const std::map<int, double>& h, int o) {
  auto lookup = [&](int v) -> double {
    auto it = h.find(v);
    if (it == h.end()) {
      throw Error(Errc::MissingValue,
                  "no function value at vertex index " + std::to_string(v));
    }
    return it->second;
  };
  return l_value(mu, std::function<double(int)>(lookup), o);
}

namespace {

void require_core_support(const SignedMeasure& mu) {
  if (mu.weights.empty()) {
    throw Error(Errc::InvalidMeasure, "measure has empty support");
  }
}

std::vector<int> hull_generators(const SignedMeasure& mu, int o) {
  std::vector<int> gens = mu.support();
  gens.push_back(o);
  return gens;
}

}  // namespace

MvpVerdict classify_mvp(const TreeSpec& t, const EdgeF& ef, const SignedMeasure& mu, int o,
                        double tol) {
  require_converged(ef);
  require_transient(t, ef);
  require_core_support(mu);

  MvpVerdict verdict;
  verdict.tol = tol;
  Hull h = t.hull(hull_generators(mu, o));
  auto classes = direction_classes(t, ef, h, o);
  double tv = mu.total_variation();
  double mass_total = mu.total_mass();

  for (const auto& cls : classes) {
    ClassResidual cr;
    cr.exit_vertex = cls.exit_vertex;
    cr.label = "ends at " + t.vertex_name(cls.exit_vertex);
    cr.mass = cls.cylinder_mass;
    double res = -mass_total;  // profile at o is 1
    double max_prof = 0.0;
    for (double p : cls.profile) max_prof = std::max(max_prof, std::abs(p));
    for (const auto& [v, w] : mu.weights) res += w * cls.profile_at(v);
    cr.residual = res;
    cr.threshold = tol * tv * max_prof;
    cr.pass = std::abs(res) <= cr.threshold;
    cr.counts_for_weak = cr.mass > kMassCutoff;
    if (cr.counts_for_weak && !cr.pass) verdict.weak = false;
    if (!cr.pass) verdict.strong = false;
    verdict.classes.push_back(std::move(cr));
  }
  if (t.end_count_capped() < 2) {
    verdict.warnings.push_back(
        "tree has a single end: one boundary direction, the distinction between weak and "
        "strong is vacuous");
  }
  return verdict;
}

CylinderMvpReport cylinder_mvp(const TreeSpec& t, const EdgeF& ef, const SignedMeasure& mu,
                               int o, double tol) {
  require_converged(ef);
  require_transient(t, ef);
  require_core_support(mu);

  CylinderMvpReport report;
  Hull h = t.hull(hull_generators(mu, o));
  double tv = mu.total_variation();
  double mass_total = mu.total_mass();
  VertexAddress oa = VertexAddress::core_vertex(o);

  // Evaluation points: the support plus the reference.
  std::vector<int> points = mu.support();
  if (!std::count(points.begin(), points.end(), o)) points.push_back(o);

  auto run_check = [&](const std::string& label,
                       const std::function<double(VertexAddress)>& nu) {
    double nu_o = nu(oa);
    double res = -mass_total * nu_o;
    double scale = std::abs(nu_o);
    for (const auto& [v, w] : mu.weights) {
      double val = nu(VertexAddress::core_vertex(v));
      scale = std::max(scale, std::abs(val));
      res += w * val;
    }
    CylinderCheck c;
    c.label = label;
    c.residual = res;
    c.threshold = tol * tv * scale;
    c.pass = std::abs(res) <= c.threshold;
    if (!c.pass) report.pass = false;
    report.checks.push_back(std::move(c));
  };

  for (int w : h.vertices) {
    if (w == o) continue;
    run_check("cylinder at " + t.vertex_name(w),
              [&](VertexAddress x) { return cylinder_measure(t, ef, x, w, o); });
  }
  for (const ExitEdge& e : h.exits) {
    VertexAddress v = VertexAddress::core_vertex(e.vertex);
    VertexAddress n = e.tail >= 0 ? VertexAddress::tail_vertex(e.tail, 1)
                                  : VertexAddress::core_vertex(e.core_to);
    std::string label =
        "exit " + t.vertex_name(e.vertex) + "->" +
        (e.tail >= 0 ? t.tail(e.tail).id + "@1" : t.vertex_name(e.core_to));
    run_check(label, [&](VertexAddress x) { return branch_measure(t, ef, x, v, n); });
  }
  return report;
}

EquivalenceReport weak_strong_equivalence(const TreeSpec& t, const EdgeF& ef, int o) {
  require_converged(ef);
  EquivalenceReport r;
  r.scan = branch_scan(t, ef);  // checks transience
  r.branches_transient = r.scan.all_infinite_transient;

  VertexAddress oa = VertexAddress::core_vertex(o);

  // Independent route: positivity of the harmonic measure of every infinite
  // direction away from the reference.
  r.boundary_charged = true;
  for (int e = 0; e < t.directed_edge_count(); ++e) {
    auto [x, y] = t.edge_vertices(e);
    if (y == o || t.step_toward(y, o) != x) continue;  // keep away-orientation
    if (!t.core_branch_infinite(x, y)) continue;
    double m = cylinder_measure(t, ef, oa, y, o);
    if (!(m > kMassCutoff)) r.boundary_charged = false;
  }
  for (int tt = 0; tt < static_cast<int>(t.tails().size()); ++tt) {
    if (!(tail_measure(t, ef, o, tt) > kMassCutoff)) r.boundary_charged = false;
  }

  // Third route: strict positivity of the unit flow out of o.
  FluxReport fr = flux(t, ef, o);
  if (fr.max_conservation_defect > 1e-9) {
    throw Error(Errc::Internal, "unit flow violates conservation beyond tolerance");
  }
  r.flux_positive = true;
  for (const FluxEdge& fe : fr.edges) {
    if (fe.infinite && !(fe.flow > kMassCutoff)) r.flux_positive = false;
  }
  for (const FluxTail& ft : fr.tails) {
    if (!(ft.flow > kMassCutoff)) r.flux_positive = false;
  }

  if (r.branches_transient != r.boundary_charged ||
      r.branches_transient != r.flux_positive) {
    throw Error(Errc::Internal, "equivalence conditions disagree; this is a bug");
  }
  r.equivalent = r.branches_transient;

  for (const BranchEntry& be : r.scan.entries) {
    if (!be.recurrent) continue;
    EquivalenceWitness w;
    w.label = be.label;
    w.f_return = be.f_return;
    VertexAddress v, n;
    if (be.tail >= 0 && !be.inward) {
      v = VertexAddress::core_vertex(t.tail(be.tail).attach);
      n = VertexAddress::tail_vertex(be.tail, 1);
    } else if (be.tail >= 0) {
      v = VertexAddress::tail_vertex(be.tail, 1);
      n = VertexAddress::core_vertex(t.tail(be.tail).attach);
    } else {
      v = VertexAddress::core_vertex(be.from_core);
      n = VertexAddress::core_vertex(be.core_to);
    }
    w.mass = branch_measure(t, ef, oa, v, n);
    r.witnesses.push_back(std::move(w));
  }

  r.two_or_more_ends = t.end_count_capped() >= 2;
  if (!r.two_or_more_ends) {
    r.warnings.push_back(
        "tree has a single end: the boundary is one point and the uniqueness statement "
        "is not claimed");
  }
  return r;
}

bool tail_integrability(const TreeSpec& t, const EdgeF& ef, const GeometricTailMeasure& gm) {
  require_converged(ef);
  if (gm.head == 0.0) return true;  // finite support
  if (gm.tail < 0 || gm.tail >= static_cast<int>(t.tails().size())) {
    throw Error(Errc::UnknownVertex, "tail index out of range");
  }
  double g = ef.tails[gm.tail].f_up_limit;
  // 1/F(o, x_n) grows like g^-n, so the series converges iff |ratio| < g.
  // The relative margin keeps the verdict stable against last-ulp noise in g.
  return std::abs(gm.ratio) < g * (1.0 - 1e-9);
}

namespace {

// sum_{n>=1} head ratio^(n-1) / F(o, x_n) along the canonical ray of the
// measure's tail. The up-chain factors vary near the head, so sum terms
// until they reach the deep-tail limit, then close the geometric remainder.
double ray_kernel_series(const TreeSpec& t, const EdgeF& ef, const GeometricTailMeasure& gm,
                         int o) {
  const TailSpec& ts = t.tail(gm.tail);
  const TailF& tf = ef.tails[gm.tail];
  double g = tf.f_up_limit;
  double b = ts.step_back();
  double fwd = ts.step_forward_each();
  double c = (ts.interior_children() - 1) * fwd * tf.f_down;

  double u = tf.f_up_entry;  // u_{n-1} at the top of the loop
  double fn = f_between(t, ef, VertexAddress::core_vertex(o),
                        VertexAddress::core_vertex(ts.attach));
  double pw = gm.head;  // head * ratio^(n-1)
  double sum = 0.0;
  double term = 0.0;
  const double stable = 64.0 * std::numeric_limits<double>::epsilon() * std::max(g, 0.5);
  const long cap = 2000000;
  for (long n = 1; n <= cap; ++n) {
    fn *= u;
    term = pw / fn;
    sum += term;
    if (n >= 8 && std::abs(u - g) <= stable) {
      double rho = gm.ratio / g;
      sum += term * rho / (1.0 - rho);
      return sum;
    }
    if (std::abs(term) <= 1e-17 * (1.0 + std::abs(sum))) return sum;
    pw *= gm.ratio;
    u = fwd / (1.0 - b * u - c);
  }
  // Critical-rate corner (up factors approach 1 only algebraically while the
  // ratio is extreme): close with the asymptotic geometric remainder.
  double rho = gm.ratio / u;
  sum += term * rho / (1.0 - rho);
  return sum;
}

}  // namespace

TailWeakVerdict tail_weak_mvp(const TreeSpec& t, const EdgeF& ef,
                              const GeometricTailMeasure& gm, int o, double tol) {
  require_converged(ef);
  require_transient(t, ef);
  if (!tail_integrability(t, ef, gm)) {
    throw Error(Errc::NotIntegrable,
                "geometric tail outruns the kernel decay; residuals diverge");
  }

  TailWeakVerdict verdict;
  verdict.tol = tol;
  const TailSpec& ts = t.tail(gm.tail);
  const TailF& tf = ef.tails[gm.tail];
  VertexAddress oa = VertexAddress::core_vertex(o);

  std::vector<int> gens = gm.base.support();
  gens.push_back(o);
  gens.push_back(ts.attach);
  Hull h = t.hull(gens);
  auto classes = direction_classes(t, ef, h, o);

  double tv = gm.total_variation();
  double mass_total = gm.total_mass();

  for (const auto& cls : classes) {
    double core_part = -mass_total;
    double max_prof = 0.0;
    for (double p : cls.profile) max_prof = std::max(max_prof, std::abs(p));
    for (const auto& [v, w] : gm.base.weights) core_part += w * cls.profile_at(v);
    double prof_attach = cls.profile_at(ts.attach);
    // Ends that leave the hull anywhere but through the measure's own ray see
    // the ray weights through the kernel f_down^n * profile(attach): an exact
    // geometric sum.
    double geometric_part =
        gm.head * tf.f_down * prof_attach / (1.0 - gm.ratio * tf.f_down);

    if (cls.exit_vertex != ts.attach) {
      ClassResidual cr;
      cr.exit_vertex = cls.exit_vertex;
      cr.label = "ends at " + t.vertex_name(cls.exit_vertex);
      cr.mass = cls.cylinder_mass;
      cr.residual = core_part + geometric_part;
      cr.threshold = tol * tv * max_prof;
      cr.pass = std::abs(cr.residual) <= cr.threshold;
      cr.counts_for_weak = cr.mass > kMassCutoff;
      if (cr.counts_for_weak && !cr.pass) verdict.weak = false;
      verdict.classes.push_back(std::move(cr));
      continue;
    }

    // The class at the attach vertex splits: the entry bundle following the
    // canonical ray sees the series kernel, everything else at this vertex
    // (sibling entries, other tails, core exits) the geometric one.
    double canon_mass = branch_measure(t, ef, oa, VertexAddress::core_vertex(ts.attach),
                                       VertexAddress::tail_vertex(gm.tail, 1));
    ClassResidual ray;
    ray.exit_vertex = cls.exit_vertex;
    ray.label = "ends along " + ts.id;
    ray.ray_direction = true;
    ray.mass = canon_mass;
    ray.residual = core_part + ray_kernel_series(t, ef, gm, o);
    ray.threshold = tol * tv * max_prof;
    ray.pass = std::abs(ray.residual) <= ray.threshold;
    ray.counts_for_weak = ray.mass > kMassCutoff;
    if (ray.counts_for_weak && !ray.pass) verdict.weak = false;
    verdict.classes.push_back(std::move(ray));

    bool side_infinite = ts.entry_count() >= 2;
    for (const ExitEdge& e : cls.exits) {
      if (e.tail == gm.tail) continue;
      side_infinite = side_infinite || e.infinite;
    }
    if (side_infinite) {
      ClassResidual side;
      side.exit_vertex = cls.exit_vertex;
      side.label = "ends at " + t.vertex_name(cls.exit_vertex) + " off " + ts.id;
      side.mass = cls.cylinder_mass - canon_mass;
      side.residual = core_part + geometric_part;
      side.threshold = tol * tv * max_prof;
      side.pass = std::abs(side.residual) <= side.threshold;
      side.counts_for_weak = side.mass > kMassCutoff;
      if (side.counts_for_weak && !side.pass) verdict.weak = false;
      verdict.classes.push_back(std::move(side));
    }
  }
  if (t.end_count_capped() < 2) {
    verdict.warnings.push_back(
        "tree has a single end: one boundary direction, the weak verdict is vacuous");
  }
  return verdict;
}

}  // namespace martinlab
