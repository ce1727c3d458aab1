// Command line front end: loads tree/measure/function descriptions, runs the
// requested computation, and emits a Report as text or canonical JSON.
// Exit codes: 0 success (or verdict true), 1 verdict false, 2 bad input,
// 3 non-convergence.

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "martinlab/harmonic_measure.hpp"
#include "martinlab/hitting_solver.hpp"
#include "martinlab/martin_kernel.hpp"
#include "martinlab/mc_oracle.hpp"
#include "martinlab/mvp_checker.hpp"
#include "martinlab/report.hpp"
#include "martinlab/tree_model.hpp"

namespace {

using martinlab::Errc;
using martinlab::Error;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitVerdictFalse = 1;
constexpr int kExitInvalidInput = 2;
constexpr int kExitNotConverged = 3;

int exit_code_for(Errc code) {
  switch (code) {
    case Errc::NotConverged:
    case Errc::MaxIterExceeded:
      return kExitNotConverged;
    default:
      return kExitInvalidInput;
  }
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::BadInput, "cannot open '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

json parse_file(const std::string& path) {
  try {
    return json::parse(slurp(path));
  } catch (const json::exception& e) {
    throw Error(Errc::BadInput, "malformed JSON in '" + path + "': " + e.what());
  }
}

struct Options {
  std::string tree_path;
  std::string measure_path;
  std::string function_path;
  std::string format = "text";
  double tol = 1e-8;
  double solver_tol = 1e-12;
  long max_iter = 1000000;
  std::string mode = "both";
  std::string ref;
  std::string from;
  std::string sup_at;
  std::string estimate = "f";
  std::string to;
  std::string at;
  std::uint64_t seed = 1;
  long trials = 100000;
  long horizon = 10000;
  int depth = 30;
  long first_trial = 0;
  bool check = false;
  bool show_flux = false;
  std::vector<std::string> positionals;
};

struct LoadedTree {
  json doc;
  martinlab::TreeSpec spec;
  std::string path;
};

LoadedTree load_tree(const Options& opt) {
  if (opt.tree_path.empty()) throw Error(Errc::BadInput, "--tree is required");
  LoadedTree lt;
  lt.path = opt.tree_path;
  lt.doc = parse_file(opt.tree_path);
  lt.spec = martinlab::TreeSpec::from_json(lt.doc);
  return lt;
}

void note_input(martinlab::Report& rep, const std::string& role, const std::string& path) {
  json entry;
  entry["path"] = path;
  entry["digest"] = martinlab::digest_hex(slurp(path));
  rep.inputs[role] = entry;
}

void note_tolerances(martinlab::Report& rep, const Options& opt) {
  rep.tolerances["tol"] = opt.tol;
  rep.tolerances["solver_tol"] = opt.solver_tol;
  rep.tolerances["one_threshold"] = 10.0 * opt.solver_tol;
  rep.tolerances["mass_cutoff"] = martinlab::kMassCutoff;
}

void note_solver(martinlab::Report& rep, const martinlab::EdgeF& ef) {
  rep.solver["iterations"] = ef.iterations;
  rep.solver["residual"] = ef.residual;
  rep.solver["converged"] = ef.converged;
}

int resolve_ref(const martinlab::TreeSpec& t, const std::string& name) {
  if (name.empty()) return t.root();
  auto v = t.find_vertex(name);
  if (!v) throw Error(Errc::UnknownVertex, "unknown reference vertex '" + name + "'");
  return *v;
}

martinlab::EdgeF solve_for(const Options& opt, const martinlab::TreeSpec& t) {
  return martinlab::solve_hitting(t, opt.solver_tol, opt.max_iter);
}

// ---------------------------------------------------------------------------

void cmd_validate(const Options& opt, martinlab::Report& rep) {
  if (opt.tree_path.empty()) throw Error(Errc::BadInput, "--tree is required");
  note_input(rep, "tree", opt.tree_path);
  auto doc = parse_file(opt.tree_path);
  auto [spec, issues] = martinlab::TreeSpec::validate(doc);
  rep.results["valid"] = spec.has_value();
  json issue_list = json::array();
  for (const auto& i : issues) {
    issue_list.push_back({{"code", martinlab::errc_name(i.code)}, {"message", i.message}});
  }
  rep.results["issues"] = issue_list;
  if (spec) {
    rep.results["vertices"] = spec->vertex_count();
    rep.results["directed_edges"] = spec->directed_edge_count();
    rep.results["tails"] = static_cast<int>(spec->tails().size());
    rep.results["ends"] =
        spec->end_count_capped() >= 2 ? json("2+") : json(spec->end_count_capped());
  } else {
    rep.status = "invalid_input";
    rep.exit_code = kExitInvalidInput;
  }
}

void cmd_solve(const Options& opt, martinlab::Report& rep) {
  LoadedTree lt = load_tree(opt);
  note_input(rep, "tree", opt.tree_path);
  auto ef = solve_for(opt, lt.spec);
  note_solver(rep, ef);
  json edges = json::array();
  for (int e = 0; e < lt.spec.directed_edge_count(); ++e) {
    auto [x, y] = lt.spec.edge_vertices(e);
    edges.push_back({{"from", lt.spec.vertex_name(x)},
                     {"to", lt.spec.vertex_name(y)},
                     {"f", ef.edge_f[e]}});
  }
  rep.results["edges"] = edges;
  json tails = json::array();
  for (size_t tt = 0; tt < lt.spec.tails().size(); ++tt) {
    tails.push_back({{"id", lt.spec.tail(static_cast<int>(tt)).id},
                     {"f_down", ef.tails[tt].f_down},
                     {"f_up_entry", ef.tails[tt].f_up_entry},
                     {"f_up_limit", ef.tails[tt].f_up_limit}});
  }
  rep.results["tails"] = tails;
  if (!ef.converged) {
    rep.status = "not_converged";
    rep.exit_code = kExitNotConverged;
    return;
  }
  auto rp = martinlab::return_probability(lt.spec, ef, lt.spec.root());
  rep.results["return_probability"] = rp.value;
  rep.results["transient"] = martinlab::is_transient(lt.spec, ef);
}

void cmd_kernel(const Options& opt, martinlab::Report& rep) {
  LoadedTree lt = load_tree(opt);
  note_input(rep, "tree", opt.tree_path);
  auto ef = solve_for(opt, lt.spec);
  note_solver(rep, ef);
  int o = resolve_ref(lt.spec, opt.ref);
  auto oa = martinlab::VertexAddress::core_vertex(o);
  rep.results["reference"] = lt.spec.vertex_name(o);
  if (!opt.sup_at.empty()) {
    auto x = lt.spec.parse_vertex(opt.sup_at);
    rep.results["x"] = lt.spec.format_vertex(x);
    rep.results["sup"] = martinlab::kernel_sup(lt.spec, ef, oa, x);
    return;
  }
  if (opt.positionals.size() != 2) {
    throw Error(Errc::BadInput, "kernel needs two vertex arguments, or --sup X");
  }
  auto x = lt.spec.parse_vertex(opt.positionals[0]);
  auto y = lt.spec.parse_vertex(opt.positionals[1]);
  rep.results["x"] = lt.spec.format_vertex(x);
  rep.results["y"] = lt.spec.format_vertex(y);
  rep.results["value"] = martinlab::kernel_vertex(lt.spec, ef, oa, x, y);
}

void cmd_cylinder(const Options& opt, martinlab::Report& rep) {
  LoadedTree lt = load_tree(opt);
  note_input(rep, "tree", opt.tree_path);
  auto ef = solve_for(opt, lt.spec);
  note_solver(rep, ef);
  int o = resolve_ref(lt.spec, opt.ref);
  rep.results["reference"] = lt.spec.vertex_name(o);
  if (opt.show_flux) {
    auto fr = martinlab::flux(lt.spec, ef, o);
    json edges = json::array();
    for (const auto& fe : fr.edges) {
      edges.push_back({{"from", lt.spec.vertex_name(fe.from)},
                       {"to", lt.spec.vertex_name(fe.to)},
                       {"infinite", fe.infinite},
                       {"flow", fe.flow}});
    }
    json tails = json::array();
    for (const auto& ft : fr.tails) {
      tails.push_back({{"vertex", lt.spec.vertex_name(ft.vertex)},
                       {"tail", lt.spec.tail(ft.tail).id},
                       {"flow", ft.flow}});
    }
    rep.results["flux"] = {{"edges", edges},
                           {"tails", tails},
                           {"max_conservation_defect", fr.max_conservation_defect}};
    return;
  }
  if (opt.positionals.size() != 1) {
    throw Error(Errc::BadInput, "cylinder needs one core vertex argument (or --flux)");
  }
  auto w = lt.spec.find_vertex(opt.positionals[0]);
  if (!w) throw Error(Errc::UnknownVertex, "unknown vertex '" + opt.positionals[0] + "'");
  martinlab::VertexAddress from = opt.from.empty() ? martinlab::VertexAddress::core_vertex(o)
                                                   : lt.spec.parse_vertex(opt.from);
  rep.results["from"] = lt.spec.format_vertex(from);
  rep.results["vertex"] = opt.positionals[0];
  rep.results["value"] = martinlab::cylinder_measure(lt.spec, ef, from, *w, o);
}

void cmd_extension(const Options& opt, martinlab::Report& rep) {
  LoadedTree lt = load_tree(opt);
  note_input(rep, "tree", opt.tree_path);
  if (opt.function_path.empty()) throw Error(Errc::BadInput, "--function is required");
  note_input(rep, "function", opt.function_path);
  auto fn = martinlab::CylinderFunction::from_json(lt.spec, parse_file(opt.function_path));
  auto ef = solve_for(opt, lt.spec);
  note_solver(rep, ef);
  int o = resolve_ref(lt.spec, opt.ref);
  rep.results["reference"] = lt.spec.vertex_name(o);
  std::vector<martinlab::VertexAddress> query;
  for (const auto& token : opt.positionals) query.push_back(lt.spec.parse_vertex(token));
  auto values = martinlab::harmonic_extension(lt.spec, ef, fn, query, o);
  json out = json::array();
  for (size_t i = 0; i < query.size(); ++i) {
    out.push_back({{"vertex", lt.spec.format_vertex(query[i])}, {"value", values[i]}});
  }
  rep.results["values"] = out;
  if (opt.check) {
    std::vector<int> all(static_cast<size_t>(lt.spec.vertex_count()));
    for (int v = 0; v < lt.spec.vertex_count(); ++v) all[static_cast<size_t>(v)] = v;
    rep.results["harmonicity_residual"] =
        martinlab::harmonicity_residual(lt.spec, ef, fn, all, o);
  }
}

json class_to_json(const martinlab::TreeSpec& t, const martinlab::ClassResidual& cr) {
  json j;
  j["exit_vertex"] = t.vertex_name(cr.exit_vertex);
  j["label"] = cr.label;
  j["ray_direction"] = cr.ray_direction;
  j["mass"] = cr.mass;
  j["residual"] = cr.residual;
  j["threshold"] = cr.threshold;
  j["pass"] = cr.pass;
  j["counts_for_weak"] = cr.counts_for_weak;
  return j;
}

void cmd_mvp(const Options& opt, martinlab::Report& rep) {
  LoadedTree lt = load_tree(opt);
  note_input(rep, "tree", opt.tree_path);
  if (opt.measure_path.empty()) throw Error(Errc::BadInput, "--measure is required");
  note_input(rep, "measure", opt.measure_path);
  auto mf = martinlab::MeasureFile::from_json(lt.spec, parse_file(opt.measure_path));
  auto ef = solve_for(opt, lt.spec);
  note_solver(rep, ef);
  int o = mf.reference;
  rep.results["reference"] = lt.spec.vertex_name(o);
  rep.results["mode"] = opt.mode;

  bool verdict = false;
  if (mf.has_tail()) {
    if (opt.mode == "strong" || opt.mode == "cylinder") {
      throw Error(Errc::BadInput,
                  "measures with a geometric tail support only the weak verdict");
    }
    auto gm = mf.as_tail_measure();
    rep.results["integrable"] = martinlab::tail_integrability(lt.spec, ef, gm);
    auto tv = martinlab::tail_weak_mvp(lt.spec, ef, gm, o, opt.tol);
    rep.results["weak"] = tv.weak;
    json classes = json::array();
    for (const auto& cr : tv.classes) classes.push_back(class_to_json(lt.spec, cr));
    rep.results["classes"] = classes;
    for (const auto& w : tv.warnings) rep.warnings.push_back(w);
    if (opt.mode == "both") {
      rep.warnings.push_back("strong verdict not claimed for geometric tail measures");
    }
    verdict = tv.weak;
  } else if (opt.mode == "cylinder") {
    auto cm = martinlab::cylinder_mvp(lt.spec, ef, mf.base, o, opt.tol);
    rep.results["cylinder_pass"] = cm.pass;
    json checks = json::array();
    for (const auto& c : cm.checks) {
      checks.push_back({{"label", c.label},
                        {"residual", c.residual},
                        {"threshold", c.threshold},
                        {"pass", c.pass}});
    }
    rep.results["checks"] = checks;
    verdict = cm.pass;
  } else {
    auto mv = martinlab::classify_mvp(lt.spec, ef, mf.base, o, opt.tol);
    rep.results["weak"] = mv.weak;
    rep.results["strong"] = mv.strong;
    json classes = json::array();
    for (const auto& cr : mv.classes) classes.push_back(class_to_json(lt.spec, cr));
    rep.results["classes"] = classes;
    for (const auto& w : mv.warnings) rep.warnings.push_back(w);
    if (opt.mode == "weak") {
      verdict = mv.weak;
    } else if (opt.mode == "strong") {
      verdict = mv.strong;
    } else if (opt.mode == "both") {
      verdict = mv.weak && mv.strong;
    } else {
      throw Error(Errc::BadInput, "unknown mode '" + opt.mode + "'");
    }
  }
  if (!verdict) {
    rep.status = "verdict_false";
    rep.exit_code = kExitVerdictFalse;
  }
}

void cmd_trees1(const Options& opt, martinlab::Report& rep) {
  LoadedTree lt = load_tree(opt);
  note_input(rep, "tree", opt.tree_path);
  auto ef = solve_for(opt, lt.spec);
  note_solver(rep, ef);
  int o = resolve_ref(lt.spec, opt.ref);
  rep.results["reference"] = lt.spec.vertex_name(o);
  auto eq = martinlab::weak_strong_equivalence(lt.spec, ef, o);
  rep.results["equivalent"] = eq.equivalent;
  rep.results["branches_transient"] = eq.branches_transient;
  rep.results["boundary_charged"] = eq.boundary_charged;
  rep.results["flux_positive"] = eq.flux_positive;
  rep.results["two_or_more_ends"] = eq.two_or_more_ends;
  json branches = json::array();
  for (const auto& be : eq.scan.entries) {
    branches.push_back({{"label", be.label},
                        {"infinite", be.infinite},
                        {"f_return", be.f_return},
                        {"recurrent", be.recurrent}});
  }
  rep.results["branches"] = branches;
  json witnesses = json::array();
  for (const auto& w : eq.witnesses) {
    witnesses.push_back({{"label", w.label}, {"f_return", w.f_return}, {"mass", w.mass}});
  }
  rep.results["witnesses"] = witnesses;
  for (const auto& w : eq.warnings) rep.warnings.push_back(w);
  if (!eq.equivalent) {
    rep.status = "verdict_false";
    rep.exit_code = kExitVerdictFalse;
  }
}

void cmd_simulate(const Options& opt, martinlab::Report& rep) {
  LoadedTree lt = load_tree(opt);
  note_input(rep, "tree", opt.tree_path);
  martinlab::WalkConfig cfg;
  cfg.trials = opt.trials;
  cfg.horizon = opt.horizon;
  cfg.seed = opt.seed;
  cfg.depth = opt.depth;
  cfg.first_trial = opt.first_trial;
  rep.results["trials"] = cfg.trials;
  rep.results["horizon"] = cfg.horizon;
  rep.results["seed"] = cfg.seed;

  martinlab::Estimate est;
  if (opt.estimate == "f") {
    if (opt.from.empty() || opt.to.empty()) {
      throw Error(Errc::BadInput, "simulate --estimate f needs --from and --to");
    }
    auto x = lt.spec.parse_vertex(opt.from);
    auto y = lt.spec.parse_vertex(opt.to);
    rep.results["from"] = lt.spec.format_vertex(x);
    rep.results["to"] = lt.spec.format_vertex(y);
    est = martinlab::estimate_f(lt.spec, x, y, cfg);
  } else if (opt.estimate == "cylinder") {
    if (opt.at.empty()) throw Error(Errc::BadInput, "simulate --estimate cylinder needs --at");
    int o = resolve_ref(lt.spec, opt.ref);
    auto w = lt.spec.find_vertex(opt.at);
    if (!w) throw Error(Errc::UnknownVertex, "unknown vertex '" + opt.at + "'");
    martinlab::VertexAddress x = opt.from.empty() ? martinlab::VertexAddress::core_vertex(o)
                                                  : lt.spec.parse_vertex(opt.from);
    rep.results["from"] = lt.spec.format_vertex(x);
    rep.results["vertex"] = opt.at;
    rep.results["reference"] = lt.spec.vertex_name(o);
    rep.results["decision_depth"] = cfg.depth;
    est = martinlab::estimate_cylinder(lt.spec, x, *w, o, cfg);
  } else {
    throw Error(Errc::BadInput, "--estimate must be 'f' or 'cylinder'");
  }
  rep.results["value"] = est.value;
  rep.results["std_error"] = est.std_error;
  rep.results["trials_used"] = est.trials_used;
  rep.results["censored"] = est.censored;
  rep.results["hits"] = est.hits;
  rep.results["decided"] = est.decided;
}

}  // namespace

namespace martinlab {

Report run(const std::vector<std::string>& args) {
  Report rep;
  {
    std::string joined;
    for (const auto& a : args) {
      if (!joined.empty()) joined += ' ';
      joined += a;
    }
    rep.command = joined;
  }

  CLI::App app{"boundary theory of transient walks on finitely described trees"};
  app.require_subcommand(1);
  Options opt;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--tree", opt.tree_path, "tree description (JSON)");
    sub->add_option("--format", opt.format, "text or json")
        ->check(CLI::IsMember({"text", "json"}));
    sub->add_option("--tol", opt.tol, "verdict tolerance");
    sub->add_option("--solver-tol", opt.solver_tol, "fixed-point tolerance");
    sub->add_option("--max-iter", opt.max_iter, "fixed-point iteration budget");
    return sub;
  };

  auto* validate = add_common(app.add_subcommand("validate", "check a tree description"));
  auto* solve = add_common(app.add_subcommand("solve", "directed-edge hitting probabilities"));
  auto* kernel = add_common(app.add_subcommand("kernel", "Martin kernel values"));
  kernel->add_option("vertices", opt.positionals, "x y");
  kernel->add_option("--ref", opt.ref, "reference vertex (default: root)");
  kernel->add_option("--sup", opt.sup_at, "sup of k(x, .) for this vertex");
  auto* cylinder = add_common(app.add_subcommand("cylinder", "harmonic measure of a cylinder"));
  cylinder->add_option("vertex", opt.positionals, "cylinder root w");
  cylinder->add_option("--ref", opt.ref, "reference vertex (default: root)");
  cylinder->add_option("--from", opt.from, "evaluation vertex (default: reference)");
  cylinder->add_flag("--flux", opt.show_flux, "report the unit flow instead");
  auto* extension = add_common(app.add_subcommand("extension", "harmonic extension of a cylinder function"));
  extension->add_option("vertices", opt.positionals, "query vertices");
  extension->add_option("--function", opt.function_path, "cylinder function (JSON)");
  extension->add_option("--ref", opt.ref, "reference vertex (default: root)");
  extension->add_flag("--check", opt.check, "report the worst one-step mean deviation");
  auto* mvp = add_common(app.add_subcommand("mvp", "mean value property verdicts"));
  mvp->add_option("--measure", opt.measure_path, "signed measure (JSON)");
  mvp->add_option("--mode", opt.mode, "weak | strong | both | cylinder")
      ->check(CLI::IsMember({"weak", "strong", "both", "cylinder"}));
  auto* trees1 = add_common(app.add_subcommand(
      "trees1", "equivalence of the weak and strong verdicts on this tree"));
  trees1->add_option("--ref", opt.ref, "reference vertex (default: root)");
  auto* simulate = add_common(app.add_subcommand("simulate", "Monte Carlo estimates"));
  simulate->add_option("--estimate", opt.estimate, "f | cylinder");
  simulate->add_option("--from", opt.from, "start vertex");
  simulate->add_option("--to", opt.to, "target vertex (estimate f)");
  simulate->add_option("--at", opt.at, "cylinder root (estimate cylinder)");
  simulate->add_option("--ref", opt.ref, "reference vertex (default: root)");
  simulate->add_option("--seed", opt.seed, "RNG seed");
  simulate->add_option("--trials", opt.trials, "number of trials");
  simulate->add_option("--horizon", opt.horizon, "steps per trial");
  simulate->add_option("--depth", opt.depth, "cylinder decision depth");
  simulate->add_option("--first-trial", opt.first_trial, "stream offset for sharding");

  std::vector<std::string> cli_args(args.begin(), args.end());
  try {
    std::reverse(cli_args.begin(), cli_args.end());
    app.parse(cli_args);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {  // --help
      std::ostringstream os;
      os << app.help();
      rep.results["help"] = os.str();
      return rep;
    }
    rep.status = "invalid_input";
    rep.exit_code = kExitInvalidInput;
    rep.warnings.push_back(std::string("argument error: ") + e.what());
    return rep;
  }

  note_tolerances(rep, opt);
  try {
    if (validate->parsed()) cmd_validate(opt, rep);
    if (solve->parsed()) cmd_solve(opt, rep);
    if (kernel->parsed()) cmd_kernel(opt, rep);
    if (cylinder->parsed()) cmd_cylinder(opt, rep);
    if (extension->parsed()) cmd_extension(opt, rep);
    if (mvp->parsed()) cmd_mvp(opt, rep);
    if (trees1->parsed()) cmd_trees1(opt, rep);
    if (simulate->parsed()) cmd_simulate(opt, rep);
  } catch (const Error& e) {
    rep.exit_code = exit_code_for(e.code());
    rep.status = rep.exit_code == kExitNotConverged ? "not_converged" : "invalid_input";
    rep.results["error"] = {{"code", martinlab::errc_name(e.code())}, {"message", e.what()}};
  }
  (void)kExitOk;
  return rep;
}

}  // namespace martinlab

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string format = "text";
  for (size_t i = 0; i + 1 < args.size(); ++i) {
    if (args[i] == "--format") format = args[i + 1];
  }
  martinlab::Report rep = martinlab::run(args);
  if (format == "json") {
    std::cout << rep.to_json().dump(2) << "\n";
  } else {
    std::cout << rep.render_text();
  }
  return rep.exit_code;
}
