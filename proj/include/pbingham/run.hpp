#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "pbingham/config.hpp"
#include "pbingham/diagnostics.hpp"
#include "pbingham/scenarios.hpp"

namespace pbingham {

struct RunResult {
  int exit_code = 0;        ///< 0 success, 2 solver failure
  std::string message;      ///< failure cause, with the failing step index
  long steps = 0;
  std::vector<StepReport> reports;
  SimulationState final_state;
};

/// Runs the configured scenario to end_time (or max_steps). When write_files
/// is set, writes diagnostics.csv, snapshot_STEP.dat and summary.txt into
/// cfg.output.directory (created if missing).
RunResult run(const RunConfig& cfg, bool write_files = true);


/// diagnostics.csv text: header plus one row per report, %.17g.
std::string format_diagnostics(const std::vector<StepReport>& reports);

/// Snapshot text: a header line "DIM NX NY NZ HX HY HZ T" (NZ = 1, HZ = 0 in
/// 2D) then per cell, x fastest: center coordinates, cell velocity (dim
/// entries each), p, p_f, |D|, |Z|, plug mask.
/// plug_threshold <= 0 selects the stress-based plug detector.
std::string format_snapshot(const SimulationState& state, const MaterialParams& params,
                            const ForcingSpec& forcing, double plug_threshold);

/// Same header, then per cell: center coordinates and the cell-averaged Darcy velocity.
std::string format_darcy_snapshot(const SimulationState& state, const DarcyParams& darcy,
                                  const ForcingSpec& forcing);

std::string format_summary(const RunResult& r);

}  // namespace pbingham
