#pragma once

// Structured result of one CLI invocation: inputs (with content digests),
// the tolerances in force, solver stats, and the subcommand's results.
// Serialization is deterministic (sorted keys, shortest round-trip floats),
// so identical inputs and seed give byte-identical reports.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace martinlab {

struct Report {
  std::string command;
  nlohmann::json inputs = nlohmann::json::object();
  nlohmann::json tolerances = nlohmann::json::object();
  nlohmann::json solver = nlohmann::json::object();
  nlohmann::json results = nlohmann::json::object();
  std::vector<std::string> warnings;
  std::string status = "ok";  // ok | verdict_false | invalid_input | not_converged
  int exit_code = 0;

  nlohmann::json to_json() const;
  static Report from_json(const nlohmann::json& j);
  std::string render_text() const;
};

// FNV-1a 64-bit content hash, reported as 16 hex digits.
std::uint64_t fnv1a64(std::string_view data);
std::string digest_hex(std::string_view data);

}  // namespace martinlab
