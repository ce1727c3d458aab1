#include "martinlab/report.hpp"

#include <sstream>

#include "martinlab/errors.hpp"

namespace martinlab {

using nlohmann::json;

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string digest_hex(std::string_view data) {
  static const char* hex = "0123456789abcdef";
  std::uint64_t h = fnv1a64(data);
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

json Report::to_json() const {
  json j;
  j["command"] = command;
  j["inputs"] = inputs;
  j["tolerances"] = tolerances;
  j["solver"] = solver;
  j["results"] = results;
  j["warnings"] = warnings;
  j["status"] = status;
  j["exit_code"] = exit_code;
  return j;
}

Report Report::from_json(const json& j) {
  if (!j.is_object()) throw Error(Errc::BadInput, "report must be a JSON object");
  Report r;
  r.command = j.value("command", std::string());
  r.inputs = j.value("inputs", json::object());
  r.tolerances = j.value("tolerances", json::object());
  r.solver = j.value("solver", json::object());
  r.results = j.value("results", json::object());
  if (j.contains("warnings")) {
    for (const auto& w : j["warnings"]) r.warnings.push_back(w.get<std::string>());
  }
  r.status = j.value("status", std::string("ok"));
  r.exit_code = j.value("exit_code", 0);
  return r;
}

namespace {

void render_value(std::ostringstream& os, const json& v, int indent) {
  std::string pad(static_cast<size_t>(indent), ' ');
  if (v.is_object()) {
    for (const auto& [key, val] : v.items()) {
      if (val.is_object() || val.is_array()) {
        os << pad << key << ":\n";
        render_value(os, val, indent + 2);
      } else {
        os << pad << key << ": " << val.dump() << "\n";
      }
    }
  } else if (v.is_array()) {
    for (const auto& item : v) {
      if (item.is_object() || item.is_array()) {
        os << pad << "-\n";
        render_value(os, item, indent + 2);
      } else {
        os << pad << "- " << item.dump() << "\n";
      }
    }
  } else {
    os << pad << v.dump() << "\n";
  }
}

}  // namespace

std::string Report::render_text() const {
  std::ostringstream os;
  os << "command: " << command << "\n";
  os << "status: " << status << " (exit " << exit_code << ")\n";
  if (!inputs.empty()) {
    os << "inputs:\n";
    render_value(os, inputs, 2);
  }
  if (!tolerances.empty()) {
    os << "tolerances:\n";
    render_value(os, tolerances, 2);
  }
  if (!solver.empty()) {
    os << "solver:\n";
    render_value(os, solver, 2);
  }
  if (!results.empty()) {
    os << "results:\n";
    render_value(os, results, 2);
  }
  if (!warnings.empty()) {
    os << "warnings:\n";
    for (const auto& w : warnings) os << "  - " << w << "\n";
  }
  return os.str();
}

}  // namespace martinlab
