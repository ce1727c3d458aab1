#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>

#include <nlohmann/json.hpp>

#include "support/fixtures.hpp"
#include "support/oracles.hpp"

// End-to-end tests of the martinlab binary: every subcommand, the exit-code
// contract (0 ok / 1 verdict false / 2 bad input / 3 not converged), report
// schema conformance, and byte-level reproducibility.

using nlohmann::json;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  std::string cmd = std::string(MARTINLAB_CLI_PATH) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  CliResult r;
  char buf[4096];
  size_t n = 0;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  int rc = pclose(pipe);
  r.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  return r;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

// One temp workspace with all the input files the tests share.
struct Workspace {
  std::string dir;
  std::string t3, t4, ray, bad_tree, not_json;
  std::string measure_balanced, measure_example, measure_tail, fn_indicator;

  Workspace() {
    char tmpl[] = "/tmp/martinlab_cli_XXXXXX";
    if (!mkdtemp(tmpl)) throw std::runtime_error("mkdtemp failed");
    dir = tmpl;
    t3 = dir + "/t3.json";
    write_file(t3, fixtures::t3().dump(2));
    t4 = dir + "/t4.json";
    write_file(t4, fixtures::t4_line().dump(2));
    ray = dir + "/ray.json";
    write_file(ray, fixtures::pure_ray(0.5).dump(2));

    json doctored = fixtures::t3();
    doctored["edges"][0]["p_ab"] = 0.9;
    bad_tree = dir + "/bad_tree.json";
    write_file(bad_tree, doctored.dump(2));

    not_json = dir + "/not_json.txt";
    write_file(not_json, "{ this is not json");

    // One-step redistribution at the root of t3: satisfies both verdicts.
    const double th = 1.0 / 3.0;
    measure_balanced = dir + "/measure_balanced.json";
    write_file(measure_balanced,
               json{{"reference", "o"},
                    {"weights", {{"a", th}, {"b", th}, {"c", th}, {"o", -1.0}}}}
                   .dump(2));

    measure_example = dir + "/measure_example.json";
    write_file(measure_example, fixtures::t4_example_measure().dump(2));

    measure_tail = dir + "/measure_tail.json";
    write_file(measure_tail,
               json{{"reference", "o"},
                    {"weights", {{"r1", 0.5}}},
                    {"tail", {{"id", "h"}, {"ratio", 0.25}, {"head", 1.0}}}}
                   .dump(2));

    fn_indicator = dir + "/fn_indicator.json";
    write_file(fn_indicator,
               json{{"cut", json::array({{{"vertex", "a"}, {"value", 1.0}}})},
                    {"default", 0.0}}
                   .dump(2));
  }
};

const Workspace& ws() {
  static Workspace w;
  return w;
}

const json& report_schema() {
  static json schema = [] {
    std::ifstream in(std::string(MARTINLAB_SOURCE_DIR) + "/schemas/report.schema.json");
    if (!in) throw std::runtime_error("schema file missing");
    return json::parse(in);
  }();
  return schema;
}

// Runs with --format json, checks the exit code, and validates the report
// against the published schema before handing it back.
json run_json(const std::string& args, int expect_code) {
  CliResult r = run_cli(args + " --format json");
  CHECK_MESSAGE(r.code == expect_code, args, " -> ", r.out);
  json j = json::parse(r.out, nullptr, false);
  REQUIRE_MESSAGE(!j.is_discarded(), r.out);
  std::string why;
  CHECK_MESSAGE(oracles::schema_check(report_schema(), j, &why), why);
  return j;
}

}  // namespace

TEST_CASE("bad invocations exit with code 2") {
  CliResult none = run_cli("");
  CHECK(none.code == 2);
  CHECK(none.out.find("argument error") != std::string::npos);

  CliResult unknown = run_cli("frobnicate --tree " + ws().t3);
  CHECK(unknown.code == 2);

  json no_tree = run_json("solve", 2);
  CHECK(no_tree["status"] == "invalid_input");
  CHECK(no_tree["results"]["error"]["message"].get<std::string>().find("--tree") !=
        std::string::npos);

  json missing = run_json("solve --tree " + ws().dir + "/absent.json", 2);
  CHECK(missing["results"]["error"]["code"] == "BadInput");

  json garbage = run_json("validate --tree " + ws().not_json, 2);
  CHECK(garbage["results"]["error"]["code"] == "BadInput");
  CHECK(garbage["results"]["error"]["message"].get<std::string>().find("malformed JSON") !=
        std::string::npos);
}

TEST_CASE("help is reachable and lists the subcommands") {
  CliResult help = run_cli("--help");
  CHECK(help.code == 0);
  for (const char* name :
       {"validate", "solve", "kernel", "cylinder", "extension", "mvp", "trees1", "simulate"}) {
    CHECK_MESSAGE(help.out.find(name) != std::string::npos, name);
  }
}

TEST_CASE("validate reports shape and issues") {
  json ok = run_json("validate --tree " + ws().t3, 0);
  CHECK(ok["status"] == "ok");
  CHECK(ok["results"]["valid"] == true);
  CHECK(ok["results"]["vertices"] == 4);
  CHECK(ok["results"]["directed_edges"] == 6);
  CHECK(ok["results"]["tails"] == 3);
  CHECK(ok["results"]["ends"] == "2+");
  CHECK(ok["results"]["issues"].empty());
  CHECK(ok["inputs"]["tree"]["digest"].get<std::string>().size() == 16);

  json one_end = run_json("validate --tree " + ws().ray, 0);
  CHECK(one_end["results"]["ends"] == 1);

  json bad = run_json("validate --tree " + ws().bad_tree, 2);
  CHECK(bad["status"] == "invalid_input");
  CHECK(bad["results"]["valid"] == false);
  REQUIRE(!bad["results"]["issues"].empty());
  CHECK(bad["results"]["issues"][0]["code"] == "ProbabilitySum");
}

TEST_CASE("solve prints the hitting system and repeats byte for byte") {
  std::string args = "solve --tree " + ws().t3;
  json j = run_json(args, 0);
  CHECK(j["solver"]["converged"] == true);
  CHECK(j["results"]["transient"] == true);
  CHECK(j["results"]["return_probability"].get<double>() ==
        doctest::Approx(fixtures::kT3Return).epsilon(1e-9));
  bool saw_oa = false;
  for (const auto& e : j["results"]["edges"]) {
    if (e["from"] == "o" && e["to"] == "a") {
      saw_oa = true;
      CHECK(e["f"].get<double>() == doctest::Approx(fixtures::kT3EdgeF).epsilon(1e-9));
    }
  }
  CHECK(saw_oa);
  REQUIRE(j["results"]["tails"].size() == 3);
  CHECK(j["results"]["tails"][0]["f_down"].get<double>() == doctest::Approx(0.5).epsilon(1e-9));

  CliResult once = run_cli(args + " --format json");
  CliResult again = run_cli(args + " --format json");
  CHECK(once.out == again.out);  // reports are deterministic bytes

  // A recurrent description still solves (the ray seed is exact); the
  // report just says so.
  json rec = run_json("solve --tree " + ws().ray, 0);
  CHECK(rec["results"]["transient"] == false);
  CHECK(rec["results"]["return_probability"].get<double>() == doctest::Approx(1.0).epsilon(1e-9));

  json starved = run_json("solve --tree " + ws().t3 + " --max-iter 3", 3);
  CHECK(starved["status"] == "not_converged");
  CHECK(starved["solver"]["converged"] == false);
}

TEST_CASE("kernel values and sups match the frozen constants") {
  json v = run_json("kernel --tree " + ws().t4 + " r1 r2", 0);
  CHECK(v["results"]["value"].get<double>() ==
        doctest::Approx(fixtures::kT4BoundaryKernelAtR1).epsilon(1e-9));

  json sup = run_json("kernel --tree " + ws().t4 + " --sup r1", 0);
  CHECK(sup["results"]["sup"].get<double>() == doctest::Approx(3.0).epsilon(1e-9));

  CliResult text = run_cli("validate --tree " + ws().t3);
  CHECK(text.code == 0);
  CHECK(text.out.find("status: ok (exit 0)") != std::string::npos);
  CHECK(text.out.find("vertices: 4") != std::string::npos);
  CHECK(text.out.find("ends: \"2+\"") != std::string::npos);

  json arity = run_json("kernel --tree " + ws().t3 + " a", 2);
  CHECK(arity["results"]["error"]["code"] == "BadInput");

  json unknown = run_json("kernel --tree " + ws().t3 + " a zzz", 2);
  CHECK(unknown["results"]["error"]["code"] == "UnknownVertex");

  json recurrent = run_json("kernel --tree " + ws().ray + " o o", 2);
  CHECK(recurrent["results"]["error"]["code"] == "RecurrentWalk");

  json starved = run_json("kernel --tree " + ws().t4 + " r1 r2 --max-iter 3", 3);
  CHECK(starved["status"] == "not_converged");
}

TEST_CASE("cylinder masses and flux through the front end") {
  json from_root = run_json("cylinder --tree " + ws().t3 + " a", 0);
  CHECK(from_root["results"]["value"].get<double>() ==
        doctest::Approx(fixtures::kT3RootCylinder).epsilon(1e-9));

  json from_b = run_json("cylinder --tree " + ws().t3 + " a --from b", 0);
  CHECK(from_b["results"]["value"].get<double>() ==
        doctest::Approx(fixtures::kT3IndicatorAtB).epsilon(1e-9));

  // Directions beyond r1 carry no harmonic mass at all.
  json snapped = run_json("cylinder --tree " + ws().t4 + " r1", 0);
  CHECK(snapped["results"]["value"].get<double>() == 0.0);

  json flux = run_json("cylinder --tree " + ws().t3 + " --flux", 0);
  CHECK(flux["results"]["flux"]["max_conservation_defect"].get<double>() <= 1e-9);
  REQUIRE(flux["results"]["flux"]["tails"].size() == 3);
  for (const auto& t : flux["results"]["flux"]["tails"]) {
    CHECK(t["flow"].get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  }
  // Every core edge of the star points into an infinite branch of mass 1/3.
  for (const auto& e : flux["results"]["flux"]["edges"]) {
    CHECK(e["infinite"] == true);
    CHECK(e["flow"].get<double>() == doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  }
}

TEST_CASE("extension evaluates cylinder functions harmonically") {
  json j = run_json("extension --tree " + ws().t3 + " --function " + ws().fn_indicator +
                        " o a ta@1 --check",
                    0);
  REQUIRE(j["results"]["values"].size() == 3);
  CHECK(j["results"]["values"][0]["value"].get<double>() ==
        doctest::Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(j["results"]["values"][1]["value"].get<double>() ==
        doctest::Approx(fixtures::kT3IndicatorAtA).epsilon(1e-9));
  CHECK(j["results"]["values"][2]["value"].get<double>() ==
        doctest::Approx(5.0 / 6.0).epsilon(1e-9));
  CHECK(j["results"]["harmonicity_residual"].get<double>() <= 1e-10);

  json no_fn = run_json("extension --tree " + ws().t3 + " o", 2);
  CHECK(no_fn["results"]["error"]["message"].get<std::string>().find("--function") !=
        std::string::npos);
}

TEST_CASE("mvp verdicts and exit codes") {
  json both = run_json(
      "mvp --tree " + ws().t3 + " --measure " + ws().measure_balanced + " --mode both", 0);
  CHECK(both["status"] == "ok");
  CHECK(both["results"]["weak"] == true);
  CHECK(both["results"]["strong"] == true);

  json example = run_json(
      "mvp --tree " + ws().t4 + " --measure " + ws().measure_example + " --mode both", 1);
  CHECK(example["status"] == "verdict_false");
  CHECK(example["results"]["weak"] == true);
  CHECK(example["results"]["strong"] == false);
  bool saw_failing_class = false;
  for (const auto& c : example["results"]["classes"]) {
    if (c["label"] == "ends at r2") {
      saw_failing_class = true;
      CHECK(c["pass"] == false);
      CHECK(c["counts_for_weak"] == false);
      CHECK(c["mass"].get<double>() == 0.0);
      CHECK(c["residual"].get<double>() ==
            doctest::Approx(fixtures::kT4LineResidual).epsilon(1e-9));
    }
  }
  CHECK(saw_failing_class);

  json weak_only = run_json(
      "mvp --tree " + ws().t4 + " --measure " + ws().measure_example + " --mode weak", 0);
  CHECK(weak_only["status"] == "ok");

  json cyl = run_json(
      "mvp --tree " + ws().t4 + " --measure " + ws().measure_example + " --mode cylinder", 0);
  CHECK(cyl["results"]["cylinder_pass"] == true);
  CHECK(!cyl["results"]["checks"].empty());

  // The tail-carried measure is integrable but not balanced, so the verdict
  // is an honest false, exercising the exit-1 path with ray classes present.
  json tail = run_json(
      "mvp --tree " + ws().t4 + " --measure " + ws().measure_tail + " --mode weak", 1);
  CHECK(tail["status"] == "verdict_false");
  CHECK(tail["results"]["integrable"] == true);
  CHECK(tail["results"]["weak"] == false);
  CHECK(tail["results"]["classes"].size() == 3);

  json tail_strong = run_json(
      "mvp --tree " + ws().t4 + " --measure " + ws().measure_tail + " --mode strong", 2);
  CHECK(tail_strong["results"]["error"]["message"].get<std::string>().find("weak verdict") !=
        std::string::npos);

  json no_measure = run_json("mvp --tree " + ws().t3, 2);
  CHECK(no_measure["results"]["error"]["message"].get<std::string>().find("--measure") !=
        std::string::npos);
}

TEST_CASE("trees1 splits the two reference trees") {
  json yes = run_json("trees1 --tree " + ws().t3, 0);
  CHECK(yes["results"]["equivalent"] == true);
  CHECK(yes["results"]["branches_transient"] == true);
  CHECK(yes["results"]["boundary_charged"] == true);
  CHECK(yes["results"]["flux_positive"] == true);
  CHECK(yes["results"]["two_or_more_ends"] == true);
  CHECK(yes["results"]["witnesses"].empty());
  CHECK(yes["results"]["branches"].size() == 12);

  json no = run_json("trees1 --tree " + ws().t4, 1);
  CHECK(no["status"] == "verdict_false");
  CHECK(no["results"]["equivalent"] == false);
  REQUIRE(no["results"]["witnesses"].size() == 3);
  for (const auto& w : no["results"]["witnesses"]) {
    CHECK(w["f_return"].get<double>() >= 1.0 - 1e-9);
    CHECK(w["mass"].get<double>() == 0.0);
  }
}

TEST_CASE("simulate estimates, shards, and reproduces bytes") {
  std::string base = "simulate --tree " + ws().t3 +
                     " --estimate f --from o --to a --horizon 400 --seed 7";
  std::string full_args = base + " --trials 20000";
  json full = run_json(full_args, 0);
  double value = full["results"]["value"].get<double>();
  double se = full["results"]["std_error"].get<double>();
  CHECK(std::abs(value - fixtures::kT3EdgeF) <= 4.0 * se + 1e-3);

  CliResult once = run_cli(full_args + " --format json");
  CliResult again = run_cli(full_args + " --format json");
  CHECK(once.out == again.out);  // same seed, same bytes

  json lo = run_json(base + " --trials 10000", 0);
  json hi = run_json(base + " --trials 10000 --first-trial 10000", 0);
  CHECK(lo["results"]["hits"].get<long>() + hi["results"]["hits"].get<long>() ==
        full["results"]["hits"].get<long>());

  json cyl = run_json("simulate --tree " + ws().t3 +
                          " --estimate cylinder --at a --trials 8000 --horizon 3000"
                          " --depth 25 --seed 11",
                      0);
  CHECK(cyl["results"]["decided"].get<long>() >= 8000 * 98 / 100);
  CHECK(std::abs(cyl["results"]["value"].get<double>() - fixtures::kT3RootCylinder) <=
        4.0 * cyl["results"]["std_error"].get<double>() + 2e-3);

  json missing_to = run_json("simulate --tree " + ws().t3 + " --estimate f --from o", 2);
  CHECK(missing_to["results"]["error"]["code"] == "BadInput");

  json bad_kind = run_json("simulate --tree " + ws().t3 + " --estimate density", 2);
  CHECK(bad_kind["results"]["error"]["code"] == "BadInput");
}
