#pragma once

#include <string>
#include <vector>

#include "pbingham/config.hpp"
#include "pbingham/solver.hpp"

namespace pbingham {

struct ScenarioInfo {
  std::string name;
  std::string description;
};

/// rest, decay, newtonian_cavity, bingham_channel, activation_box, manufactured_pf.
std::vector<ScenarioInfo> builtin_scenarios();

struct ScenarioSetup {
  StaggeredGrid grid;
  MaterialParams params;
  ForcingSpec forcing;
  SimulationState state;
};

/// Grid, forcing and initial state of the configured scenario.
ScenarioSetup setup_scenario(const RunConfig& cfg);

/// Closed-form pore pressure of "manufactured_pf":
/// p_f0 + A cos(pi x / Lx) exp(-K (pi / Lx)^2 t).
double manufactured_pf_exact(const RunConfig& cfg, double t, const Vec3& x);

}  // namespace pbingham
