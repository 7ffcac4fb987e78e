#pragma once

#include <stdexcept>
#include <string>

namespace transonic {

enum class ErrorKind {
  validation,
  invalid_geometry,
  unsupported_geometry,
  dimension,
  inadmissible_data,
  solver_diverged,
  admissibility_violation,
  grid_incompatibility,
  state_too_large,
  singular_system,
  continuation_failure,
  degenerate_coefficient,
  non_contraction,
  divergence,
  degenerate_sonic,
  no_sonic_point,
  stagnation,
  geometry_violation,
  compatibility,
  invalid_source,
  data_inconsistency,
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::validation: return "validation";
    case ErrorKind::invalid_geometry: return "invalid-geometry";
    case ErrorKind::unsupported_geometry: return "unsupported-geometry";
    case ErrorKind::dimension: return "dimension";
    case ErrorKind::inadmissible_data: return "inadmissible-data";
    case ErrorKind::solver_diverged: return "solver-diverged";
    case ErrorKind::admissibility_violation: return "admissibility-violation";
    case ErrorKind::grid_incompatibility: return "grid-incompatibility";
    case ErrorKind::state_too_large: return "state-too-large";
    case ErrorKind::singular_system: return "singular-system";
    case ErrorKind::continuation_failure: return "continuation-failure";
    case ErrorKind::degenerate_coefficient: return "degenerate-coefficient";
    case ErrorKind::non_contraction: return "non-contraction";
    case ErrorKind::divergence: return "divergence";
    case ErrorKind::degenerate_sonic: return "degenerate-sonic";
    case ErrorKind::no_sonic_point: return "no-sonic-point";
    case ErrorKind::stagnation: return "stagnation";
    case ErrorKind::geometry_violation: return "geometry-violation";
    case ErrorKind::compatibility: return "compatibility";
    case ErrorKind::invalid_source: return "invalid-source";
    case ErrorKind::data_inconsistency: return "data-inconsistency";
  }
  return "unknown";
}

/// Exception carrying a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) throw Error(kind, what);
}

}  // namespace transonic
