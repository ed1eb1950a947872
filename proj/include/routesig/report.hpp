#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "routesig/private_design.hpp"
#include "routesig/public_design.hpp"
#include "routesig/scenario.hpp"

namespace routesig {

inline constexpr const char* kToolVersion = "routesig 0.1.0";

struct RunReportRow {
  double nu = 0.0;
  std::string mode;
  double cost = 0.0;
  std::optional<double> lower_bound;
  std::optional<double> gap;
  double max_obedience_residual = 0.0;
  double max_nash_residual = 0.0;
  int starts = 0;
  std::uint64_t seed = 0;
  long wall_ms = 0;
};

struct RunReport {
  std::string scenario_digest;
  std::string command;
  std::uint64_t seed = 0;
  std::string tool_version = kToolVersion;
  std::vector<RunReportRow> rows;
  bool had_failures = false;
};

struct SweepConfig {
  std::vector<double> grid;
  std::vector<std::string> modes;  // subset of first-best, no-info, full-info,
                                   // public, private, diagonal
  int atoms = 0;                   // 0 = default (number of states)
  bool certify = false;
  bool with_timing = true;
  DesignOptions design;
};

// One row per (nu, mode); diagonal rows are post-processed with the
// constructive extension so the diagonal cost column is non-increasing.
RunReport run_sweep(const RoutingScenario& sc, const SweepConfig& cfg);

// CSV with the fixed column set
// nu,mode,cost,lower_bound,gap,max_obedience_residual,max_nash_residual,starts,seed,wall_ms
// preceded by '#' comment lines carrying the scenario digest and command.
std::string to_csv(const RunReport& report);

// Lower bound for a solved design at its participation level, via the
// affine moment relaxation or the two-route interval-moment program.
std::optional<double> certified_lower_bound(const RoutingScenario& sc,
                                            const DesignSolution& sol);

}  // namespace routesig
