#include "pbingham/run.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "pbingham/errors.hpp"

namespace pbingham {

namespace {

void append(std::string& out, double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out += buf;
}

std::string header_line(const StaggeredGrid& g, double t) {
  std::string out = std::to_string(g.dim()) + " " + std::to_string(g.n(0)) + " " + std::to_string(g.n(1)) +
                    " " + std::to_string(g.n(2)) + " ";
  append(out, g.h(0));
  out += " ";
  append(out, g.h(1));
  out += " ";
  append(out, g.dim() == 3 ? g.h(2) : 0.0);
  out += " ";
  append(out, t);
  out += "\n";
  return out;
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  f << text;
}

std::string snapshot_name(const char* prefix, long step) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%06ld.dat", prefix, step);
  return buf;
}

}  // namespace

std::string format_diagnostics(const std::vector<StepReport>& reports) {
  std::string out;
  const auto names = StepReport::column_names();
  for (std::size_t i = 0; i < names.size(); ++i) out += (i ? "," : "") + names[i];
  out += "\n";
  for (const StepReport& r : reports) {
    const auto v = r.values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (i) out += ",";
      append(out, v[i]);
    }
    out += "\n";
  }
  return out;
}

std::string format_snapshot(const SimulationState& state, const MaterialParams& params,
                            const ForcingSpec& forcing, double threshold) {
  const StaggeredGrid& g = state.v.grid;
  std::string out = header_line(g, state.t);
  const auto vc = cell_velocities(state.v);
  const ResidualFields res = constraint_residual_fields(state, forcing, params);
  const PlugRegion plug =
      threshold > 0.0 ? plug_region(state, threshold) : plug_region(state, forcing, params);
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    const auto ijk = g.cell_ijk(c);
    const Vec3 x = g.cell_center(ijk[0], ijk[1], ijk[2]);
    for (int a = 0; a < g.dim(); ++a) {
      append(out, x[a]);
      out += " ";
    }
    for (int a = 0; a < g.dim(); ++a) {
      append(out, vc[c][a]);
      out += " ";
    }
    const double dn = res.strain_norm.values[c];
    const double zn = res.tau.values[c] * dn / (dn + params.epsilon);
    append(out, state.p.values[c]);
    out += " ";
    append(out, state.p_f.values[c]);
    out += " ";
    append(out, dn);
    out += " ";
    append(out, zn);
    out += " ";
    out += plug.mask[c] ? "1\n" : "0\n";
  }
  return out;
}

std::string format_darcy_snapshot(const SimulationState& state, const DarcyParams& darcy,
                                  const ForcingSpec& forcing) {
  const StaggeredGrid& g = state.v.grid;
  std::string out = header_line(g, state.t);
  const auto vf = cell_velocities(darcy_velocity(state, darcy, forcing));
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    const auto ijk = g.cell_ijk(c);
    const Vec3 x = g.cell_center(ijk[0], ijk[1], ijk[2]);
    for (int a = 0; a < g.dim(); ++a) {
      append(out, x[a]);
      out += " ";
    }
    for (int a = 0; a < g.dim(); ++a) {
      append(out, vf[c][a]);
      out += a + 1 < g.dim() ? " " : "\n";
    }
  }
  return out;
}

std::string format_summary(const RunResult& r) {
  auto max_of = [&](double StepReport::*field) {
    double m = -std::numeric_limits<double>::infinity();
    for (const auto& x : r.reports) m = std::max(m, x.*field);
    return r.reports.empty() ? 0.0 : m;
  };
  auto min_of = [&](double StepReport::*field) {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& x : r.reports) m = std::min(m, x.*field);
    return r.reports.empty() ? 0.0 : m;
  };
  double max_abs_res = 0.0;
  for (const auto& x : r.reports) max_abs_res = std::max(max_abs_res, std::abs(x.energy_residual));
  std::string out;
  auto line = [&](const char* key, double v) {
    out += key;
    out += " ";
    append(out, v);
    out += "\n";
  };
  out += "status " + std::string(r.exit_code == 0 ? "ok" : "failed") + "\n";
  if (!r.message.empty()) out += "message " + r.message + "\n";
  out += "steps " + std::to_string(r.steps) + "\n";
  line("t_final", r.final_state.t);
  line("max_div_residual_inf", max_of(&StepReport::div_residual_inf));
  line("max_abs_energy_residual", max_abs_res);
  line("max_r1_bulk", max_of(&StepReport::max_r1_bulk));
  line("max_r2_bulk", max_of(&StepReport::max_r2_bulk));
  line("max_r1_wall", max_of(&StepReport::max_r1_wall));
  line("max_r2_wall", max_of(&StepReport::max_r2_wall));
  line("pf_min", min_of(&StepReport::pf_min));
  line("pf_max", max_of(&StepReport::pf_max));
  line("min_plug_fraction", min_of(&StepReport::plug_fraction));
  return out;
}

RunResult run(const RunConfig& cfg, bool write_files) {
  cfg.validate();
  ScenarioSetup setup = setup_scenario(cfg);
  const double threshold = cfg.plug_threshold;
  const std::filesystem::path dir(cfg.output.directory);
  if (write_files) std::filesystem::create_directories(dir);

  auto snapshot = [&](const SimulationState& s) {
    if (!write_files || !cfg.output.snapshots) return;
    write_file(dir / snapshot_name("snapshot", s.step_index),
               format_snapshot(s, setup.params, setup.forcing, threshold));
    if (cfg.darcy_enabled)
      write_file(dir / snapshot_name("darcy", s.step_index),
                 format_darcy_snapshot(s, cfg.darcy, setup.forcing));
  };

  RunResult r;
  SimulationState state = std::move(setup.state);
  snapshot(state);
  const double end = cfg.solver.end_time;
  const double t_eps = 1e-12 * end;
  try {
    while (state.t < end - t_eps && (cfg.max_steps == 0 || r.steps < cfg.max_steps)) {
      double dt = choose_dt(state.v, cfg.solver);
      if (state.t + dt > end - t_eps) dt = end - state.t;
      SimulationState next = step_with_dt(state, setup.forcing, setup.params, cfg.solver, dt);
      r.reports.push_back(make_report(state, next, setup.forcing, setup.params, threshold));
      state = std::move(next);
      ++r.steps;
      if (cfg.output.snapshot_every > 0 && state.step_index % cfg.output.snapshot_every == 0) snapshot(state);
    }
  } catch (const SolverError& e) {
    r.exit_code = 2;
    r.message = "step " + std::to_string(state.step_index + 1) + ": " + e.what();
  } catch (const CflError& e) {
    r.exit_code = 2;
    r.message = "step " + std::to_string(state.step_index + 1) + ": " + e.what();
  }
  if (r.exit_code == 0 && (cfg.output.snapshot_every == 0 || state.step_index % cfg.output.snapshot_every != 0))
    snapshot(state);
  r.final_state = std::move(state);
  if (write_files) {
    write_file(dir / "diagnostics.csv", format_diagnostics(r.reports));
    write_file(dir / "summary.txt", format_summary(r));
  }
  return r;
}

}  // namespace pbingham
