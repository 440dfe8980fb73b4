#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pbingham/diagnostics.hpp"
#include "pbingham/run.hpp"

namespace pbingham::testing {

// Steady Bingham Poiseuille flow between no-slip walls y = 0 and y = L driven
// by a uniform force density G = rho b, with the Frobenius norm convention
// |S| = sqrt(2) |S_xy|. The plug occupies |y - L/2| < tau / (sqrt(2) G).
struct BinghamChannel {
  double G = 1.0;
  double tau = 1.0;
  double nu = 0.5;
  double L = 1.0;

  double plug_half_width() const { return std::min(0.5 * L, tau / (std::sqrt(2.0) * G)); }

  double velocity(double y) const {
    const double Y = 0.5 * L;
    const double yc = plug_half_width();
    const double eta = std::max(std::abs(y - Y), yc);
    return (0.5 * G * (Y * Y - eta * eta) - tau / std::sqrt(2.0) * (Y - eta)) / nu;
  }
};

// Column of cell-centered x velocities at i = 0 (k = 0), bottom to top.
inline std::vector<double> channel_profile(const SimulationState& s) {
  const StaggeredGrid& g = s.v.grid;
  const auto vc = cell_velocities(s.v);
  std::vector<double> u(g.n(1));
  for (int j = 0; j < g.n(1); ++j) u[j] = vc[g.cell_index(0, j, 0)][0];
  return u;
}

// sqrt(h sum (u_j - u(y_j))^2) over cell centers.
inline double channel_l2_error(const SimulationState& s, const BinghamChannel& exact) {
  const StaggeredGrid& g = s.v.grid;
  const auto u = channel_profile(s);
  double e = 0.0;
  for (int j = 0; j < g.n(1); ++j) {
    const double d = u[j] - exact.velocity(g.cell_center(0, j, 0)[1]);
    e += d * d;
  }
  return std::sqrt(e * g.h(1));
}

// Half of the plug extent of the column at i = 0: (plug cells) h / 2.
inline double plug_half_width(const std::vector<std::uint8_t>& mask, const StaggeredGrid& g) {
  int count = 0;
  for (int j = 0; j < g.n(1); ++j) count += mask[g.cell_index(0, j, 0)];
  return 0.5 * count * g.h(1);
}

// Projection integrator with constant viscosity: the plastic coefficient is
// never formed, everything else (wall closure, convection, projection, dt
// control) is the library's.
inline SimulationState newtonian_step(const SimulationState& state, const ForcingSpec& forcing,
                                      const MaterialParams& p, const SolverConfig& cfg, double dt) {
  const StaggeredGrid& g = state.v.grid;
  const double t1 = state.t + dt;
  VectorField v_lag = state.v;
  ProjectionResult proj;
  for (int it = 0; it < cfg.picard_iters; ++it) {
    MomentumSystem sys;
    sys.grid = g;
    sys.rho = p.rho_star;
    sys.mass = p.rho_star / dt;
    sys.cell_coef.assign(g.num_cells(), 2.0 * p.nu_star);
    for (int a = 0; a < g.dim(); ++a)
      for (int b = a + 1; b < g.dim(); ++b) sys.edge_coef[pair_slot(a, b)].assign(g.num_edges(a, b), 2.0 * p.nu_star);
    const WallClosure wall = enforce_slip(v_lag, p, forcing, t1);
    sys.drag = wall.drag;
    if (cfg.convection) sys.convection = convection_matrix(advecting_velocity(state.v, cfg.convection_truncation_n));
    VectorField rhs = linear_combination(sys.mass, state.v, p.rho_star, sample_faces(g, forcing.body_force, t1));
    axpy(1.0, wall.drag_rhs, rhs);
    rhs.apply_wall_constraint();
    const VectorField vs = solve_momentum(sys, rhs, v_lag, cfg.linear_tol, cfg.max_linear_iters);
    proj = project(vs, p.rho_star, dt, cfg.projection_tol);
    double change = 0.0;
    for (int a = 0; a < g.dim(); ++a)
      for (std::size_t f = 0; f < proj.v.comp[a].size(); ++f)
        change = std::max(change, std::abs(proj.v.comp[a][f] - v_lag.comp[a][f]));
    v_lag = proj.v;
    if (change <= cfg.picard_tol * std::max(1.0, proj.v.max_abs())) break;
  }
  SimulationState next = state;
  next.t = t1;
  next.step_index = state.step_index + 1;
  next.v = proj.v;
  next.p = proj.q;
  return next;
}

}  // namespace pbingham::testing
