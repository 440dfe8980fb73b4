#include "pbingham/scenarios.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace pbingham {

std::vector<ScenarioInfo> builtin_scenarios() {
  return {
      {"rest", "all-zero data in a closed box; the state must stay at rest"},
      {"decay", "vortex initial velocity in a closed box, no body force"},
      {"newtonian_cavity", "lid-driven cavity; the top wall moves with speed amplitude"},
      {"bingham_channel", "channel periodic along x, walls in y, driven by body force amplitude along x"},
      {"activation_box", "closed box with a rotational body force and a localized pore-pressure source"},
      {"manufactured_pf", "fluid at rest, cosine pore pressure decaying by diffusion"},
  };
}

namespace {

StaggeredGrid make_grid(const RunConfig& cfg, std::array<bool, 3> periodic) {
  const auto& gs = cfg.grid;
  std::array<double, 3> h{1.0, 1.0, 1.0};
  for (int a = 0; a < gs.dim; ++a) h[a] = gs.lengths[a] / gs.cells[a];
  return StaggeredGrid(gs.dim, gs.cells, h, {0.0, 0.0, 0.0}, periodic, gs.max_cells);
}

}  // namespace

ScenarioSetup setup_scenario(const RunConfig& cfg) {
  constexpr double pi = std::numbers::pi;
  const std::string& name = cfg.scenario;
  const ForcingParams& fp = cfg.forcing;
  const auto L = cfg.grid.lengths;
  const int dim = cfg.grid.dim;

  ScenarioSetup s;
  s.params = cfg.material;
  std::array<bool, 3> periodic{false, false, false};
  if (name == "bingham_channel") periodic = {true, false, dim == 3};
  s.grid = make_grid(cfg, periodic);

  const double ps = fp.p_s;
  s.forcing.solid_pressure = [ps](double, const Vec3&) { return ps; };
  s.forcing.solid_pressure_gradient = [](double, const Vec3&) { return Vec3{}; };

  ForcingSpec::VectorFn v0;
  ForcingSpec::ScalarFn p0;
  const double A = fp.amplitude;
  const double pf0 = fp.p_f0;
  p0 = [pf0](double, const Vec3&) { return pf0; };

  if (name == "rest") {
  } else if (name == "decay") {
    v0 = [A, L](double, const Vec3& x) {
      return Vec3{A * std::sin(pi * x[0] / L[0]) * std::cos(pi * x[1] / L[1]),
                  -A * std::cos(pi * x[0] / L[0]) * std::sin(pi * x[1] / L[1]), 0.0};
    };
  } else if (name == "newtonian_cavity") {
    const double top = L[1];
    s.forcing.wall_velocity = [A, top](double, const Vec3& x) {
      return std::abs(x[1] - top) < 1e-12 * top ? Vec3{A, 0.0, 0.0} : Vec3{};
    };
  } else if (name == "bingham_channel") {
    s.forcing.body_force = [A](double, const Vec3&) { return Vec3{A, 0.0, 0.0}; };
  } else if (name == "activation_box") {
    s.forcing.body_force = [A, L](double, const Vec3& x) {
      return Vec3{A * std::cos(pi * x[1] / L[1]), 0.0, 0.0};
    };
    const double rate = fp.source_rate;
    double r2 = 0.0;
    Vec3 c{};
    for (int a = 0; a < dim; ++a) {
      c[a] = 0.5 * L[a];
      r2 = std::max(r2, fp.source_radius * L[a]);
    }
    r2 *= r2;
    s.forcing.source = [rate, c, r2, dim](double, const Vec3& x) {
      double d2 = 0.0;
      for (int a = 0; a < dim; ++a) d2 += (x[a] - c[a]) * (x[a] - c[a]);
      return rate * std::exp(-0.5 * d2 / r2);
    };
  } else if (name == "manufactured_pf") {
    const double Lx = L[0];
    p0 = [pf0, A, Lx](double, const Vec3& x) { return pf0 + A * std::cos(pi * x[0] / Lx); };
  } else {
    throw ConfigError("unknown scenario '" + name + "'");
  }

  s.state = initial_state(s.grid, v0, p0, cfg.solver.projection_tol);
  if (fp.p_f0_noise > 0.0) {
    std::mt19937_64 rng(cfg.seed);
    for (double& x : s.state.p_f.values) x += fp.p_f0_noise * double(rng() >> 11) * 0x1.0p-53;
  }
  return s;
}

double manufactured_pf_exact(const RunConfig& cfg, double t, const Vec3& x) {
  constexpr double pi = std::numbers::pi;
  const double Lx = cfg.grid.lengths[0];
  const double k = pi / Lx;
  return cfg.forcing.p_f0 + cfg.forcing.amplitude * std::cos(k * x[0]) * std::exp(-cfg.material.K * k * k * t);
}

}  // namespace pbingham
