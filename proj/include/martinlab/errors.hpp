#pragma once

#include <stdexcept>
#include <string>

namespace martinlab {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: input/validation problems become 2, convergence problems become 3.
enum class Errc {
  NotATree,
  ProbabilitySum,
  NonPositiveEdge,
  UnknownVertex,
  NotAdjacent,
  NonCoreSupport,
  RecurrentWalk,
  NotConverged,
  MaxIterExceeded,
  DegenerateCylinder,
  BadAntichain,
  MissingValue,
  VertexOutsideHull,
  NotIntegrable,
  InvalidMeasure,
  BadInput,
  Internal,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(errc_name(code)) + ": " + what),
        code_(code) {}

  Errc code() const { return code_; }

 private:
  Errc code_;
};

// One diagnostic from spec validation; validation collects all of them
// instead of stopping at the first.
struct ValidationIssue {
  Errc code;
  std::string message;
};

}  // namespace martinlab
