#include "pbingham/diagnostics.hpp"

#include <algorithm>
#include <cmath>

namespace pbingham {

std::vector<std::string> StepReport::column_names() {
  return {"t",
          "kinetic_energy",
          "viscous_dissipation",
          "plastic_dissipation",
          "wall_dissipation",
          "energy_residual",
          "div_residual_inf",
          "pf_min",
          "pf_max",
          "max_r1_bulk",
          "max_r2_bulk",
          "max_r1_wall",
          "max_r2_wall",
          "plug_fraction"};
}

std::vector<double> StepReport::values() const {
  return {t,
          kinetic_energy,
          viscous_dissipation,
          plastic_dissipation,
          wall_dissipation,
          energy_residual,
          div_residual_inf,
          pf_min,
          pf_max,
          max_r1_bulk,
          max_r2_bulk,
          max_r1_wall,
          max_r2_wall,
          plug_fraction};
}

double kinetic_energy(const VectorField& v, double rho_star) {
  return 0.5 * rho_star * inner_faces(v, v);
}

namespace {

// sum over cells of coef_c sum_a D_aa^2 + sum over interior edges of 2 coef_e D_ab^2, times h^d.
// Null coefficient arrays stand for 1.
double weighted_strain_square(const SymTensorField& D, const std::vector<double>* cell_coef,
                              const std::array<std::vector<double>, 3>* edge_coef) {
  const StaggeredGrid& g = D.grid;
  double s = 0.0;
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    double dd = 0.0;
    for (int a = 0; a < g.dim(); ++a) dd += D.diag[a][c] * D.diag[a][c];
    s += (cell_coef ? (*cell_coef)[c] : 1.0) * dd;
  }
  for (int a = 0; a < g.dim(); ++a)
    for (int b = a + 1; b < g.dim(); ++b) {
      const int slot = pair_slot(a, b);
      const auto sh = g.edge_shape(a, b);
      for (int k = 0; k < sh[2]; ++k)
        for (int j = 0; j < sh[1]; ++j)
          for (int i = 0; i < sh[0]; ++i) {
            const int e[3] = {i, j, k};
            if (g.is_wall_face(a, e[a]) || g.is_wall_face(b, e[b])) continue;
            const std::size_t ei = g.edge_index(a, b, i, j, k);
            const double w = edge_coef ? (*edge_coef)[slot][ei] : 1.0;
            s += 2.0 * w * D.off[slot][ei] * D.off[slot][ei];
          }
    }
  return s * g.cell_volume();
}

// Z:D with Z and D sharing the staggering (interior edges only).
double staggered_contraction(const SymTensorField& Z, const SymTensorField& D) {
  const StaggeredGrid& g = D.grid;
  double s = 0.0;
  for (int a = 0; a < g.dim(); ++a)
    for (std::size_t c = 0; c < g.num_cells(); ++c) s += Z.diag[a][c] * D.diag[a][c];
  for (int a = 0; a < g.dim(); ++a)
    for (int b = a + 1; b < g.dim(); ++b) {
      const int slot = pair_slot(a, b);
      const auto sh = g.edge_shape(a, b);
      for (int k = 0; k < sh[2]; ++k)
        for (int j = 0; j < sh[1]; ++j)
          for (int i = 0; i < sh[0]; ++i) {
            const int e[3] = {i, j, k};
            if (g.is_wall_face(a, e[a]) || g.is_wall_face(b, e[b])) continue;
            const std::size_t ei = g.edge_index(a, b, i, j, k);
            s += 2.0 * Z.off[slot][ei] * D.off[slot][ei];
          }
    }
  return s * g.cell_volume();
}

}  // namespace

EnergyBudget energy_budget(const SimulationState& prev, const SimulationState& next,
                           const ForcingSpec& forcing, const MaterialParams& params, double dt) {
  EnergyBudget e;
  const StaggeredGrid& g = next.v.grid;
  const double rho = params.rho_star;
  e.kinetic_old = kinetic_energy(prev.v, rho);
  e.kinetic_new = kinetic_energy(next.v, rho);

  const VectorField& vs = next.v_star;
  const SymTensorField D = sym_gradient(vs);
  e.viscous = 2.0 * params.nu_star * weighted_strain_square(D, nullptr, nullptr);
  e.plastic = staggered_contraction(next.Z, D);

  const WallClosure& w = next.wall;
  for (std::size_t n = 0; n < w.sites.size(); ++n) {
    const WallSite& s = w.sites[n];
    const double area = g.cell_volume() / g.h(s.wall_axis);
    const double U = w.wall_velocity[n][s.component];
    const double rel = vs.comp[s.component][s.face] - U;
    e.wall += w.coef[n] * rel * rel * area;
    e.wall_work -= w.coef[n] * U * rel * area;
  }

  const VectorField b = sample_faces(g, forcing.body_force, next.t);
  e.body_work = rho * inner_faces(b, vs);

  const VectorField d_new = linear_combination(1.0, vs, -1.0, next.v);
  const VectorField d_old = linear_combination(1.0, vs, -1.0, prev.v);
  e.numerical = 0.5 * rho * (inner_faces(d_new, d_new) + inner_faces(d_old, d_old));

  e.residual = e.kinetic_new - e.kinetic_old + e.numerical + dt * (e.viscous + e.plastic + e.wall) -
               dt * (e.body_work + e.wall_work);
  e.scale = std::max({e.kinetic_old, dt * std::abs(e.body_work), dt * std::abs(e.wall_work)});
  return e;
}

ScalarField strain_rate_norm(const VectorField& v) {
  const StaggeredGrid& g = v.grid;
  const SymTensorField D = sym_gradient(v);
  ScalarField out(g);
  for (int k = 0; k < g.n(2); ++k)
    for (int j = 0; j < g.n(1); ++j)
      for (int i = 0; i < g.n(0); ++i) out.at(i, j, k) = D.at_cell(i, j, k).norm();
  return out;
}

ResidualFields constraint_residual_fields(const SimulationState& state, const ForcingSpec& forcing,
                                          const MaterialParams& params) {
  const StaggeredGrid& g = state.v.grid;
  ResidualFields r;
  r.r1 = ScalarField(g);
  r.r2 = ScalarField(g);
  r.tau = ScalarField(g);
  r.strain_norm = ScalarField(g);
  const SymTensorField D = sym_gradient(state.v);
  bool first = true;
  for (int k = 0; k < g.n(2); ++k)
    for (int j = 0; j < g.n(1); ++j)
      for (int i = 0; i < g.n(0); ++i) {
        const std::size_t c = g.cell_index(i, j, k);
        const SymTensor Dc = D.at_cell(i, j, k);
        const double tau =
            yield_stress(forcing.p_s(state.t, g.cell_center(i, j, k)), state.p_f.values[c], params.q_star);
        const SymTensor Z = regularized_stress_extra_tau(Dc, tau, params.epsilon);
        const SymTensor S = 2.0 * params.nu_star * Dc + Z;
        const ConstraintCheck chk = check_scalar_constraints(S, Dc, tau, params.nu_star, 0.0);
        r.r1.values[c] = chk.r1;
        r.r2.values[c] = chk.r2;
        r.tau.values[c] = tau;
        r.strain_norm.values[c] = Dc.norm();
        if (first) {
          r.max_r1_bulk = chk.r1;
          r.max_r2_bulk = chk.r2;
          first = false;
        } else {
          r.max_r1_bulk = std::max(r.max_r1_bulk, chk.r1);
          r.max_r2_bulk = std::max(r.max_r2_bulk, chk.r2);
        }
      }

  const auto sites = wall_sites(g);
  r.wall_r1.resize(sites.size());
  r.wall_r2.resize(sites.size());
  for (std::size_t n = 0; n < sites.size(); ++n) {
    const WallSite& s = sites[n];
    Vec3 U = forcing.wall_v(state.t, s.position);
    U[s.wall_axis] = 0.0;
    const double k = n < state.wall.conductance.size() ? state.wall.conductance[n]
                                                       : 2.0 * params.nu_star / g.h(s.wall_axis);
    const Vec3 vt = wall_slip_velocity(state.v, s, U, k, params);
    const Vec3 z = regularized_slip_traction(vt, params.s_star, params.epsilon);
    const Vec3 traction = z + params.gamma_star * vt;
    const ConstraintCheck chk = check_slip_constraints(traction, vt, params.s_star, params.gamma_star, 0.0);
    r.wall_r1[n] = chk.r1;
    r.wall_r2[n] = chk.r2;
    r.max_r1_wall = n == 0 ? chk.r1 : std::max(r.max_r1_wall, chk.r1);
    r.max_r2_wall = n == 0 ? chk.r2 : std::max(r.max_r2_wall, chk.r2);
  }
  return r;
}

PlugRegion plug_region(const SimulationState& state, double threshold) {
  const ScalarField dn = strain_rate_norm(state.v);
  PlugRegion p;
  p.mask.resize(dn.values.size());
  std::size_t count = 0;
  for (std::size_t c = 0; c < dn.values.size(); ++c) {
    p.mask[c] = dn.values[c] < threshold ? 1 : 0;
    count += p.mask[c];
  }
  p.fraction = double(count) / double(dn.values.size());
  return p;
}

double yield_strain_rate(double tau, const MaterialParams& params) {
  if (tau <= 0.0) return 0.0;
  const double nu2 = 2.0 * params.nu_star, eps = params.epsilon;
  // stable form of (-nu2 eps + sqrt(nu2^2 eps^2 + 4 nu2 tau eps)) / (2 nu2)
  return 2.0 * tau * eps / (nu2 * eps + std::sqrt(nu2 * nu2 * eps * eps + 4.0 * nu2 * tau * eps));
}

PlugRegion plug_region(const SimulationState& state, const ForcingSpec& forcing,
                       const MaterialParams& params) {
  const StaggeredGrid& g = state.v.grid;
  const ScalarField dn = strain_rate_norm(state.v);
  PlugRegion p;
  p.mask.resize(dn.values.size());
  std::size_t count = 0;
  for (std::size_t c = 0; c < dn.values.size(); ++c) {
    const auto ijk = g.cell_ijk(c);
    const double tau =
        yield_stress(forcing.p_s(state.t, g.cell_center(ijk[0], ijk[1], ijk[2])), state.p_f.values[c], params.q_star);
    p.mask[c] = dn.values[c] <= yield_strain_rate(tau, params) ? 1 : 0;
    count += p.mask[c];
  }
  p.fraction = double(count) / double(dn.values.size());
  return p;
}

double divergence_inf(const VectorField& v) {
  const ScalarField d = divergence(v);
  double m = 0.0;
  for (double x : d.values) m = std::max(m, std::abs(x));
  return m;
}

StepReport make_report(const SimulationState& prev, const SimulationState& next,
                       const ForcingSpec& forcing, const MaterialParams& params,
                       double plug_threshold) {
  StepReport r;
  r.t = next.t;
  const EnergyBudget e = energy_budget(prev, next, forcing, params, next.last_dt);
  r.kinetic_energy = e.kinetic_new;
  r.viscous_dissipation = e.viscous;
  r.plastic_dissipation = e.plastic;
  r.wall_dissipation = e.wall;
  r.energy_residual = e.residual;
  r.div_residual_inf = divergence_inf(next.v);
  r.pf_min = next.p_f.min();
  r.pf_max = next.p_f.max();
  const ResidualFields res = constraint_residual_fields(next, forcing, params);
  r.max_r1_bulk = res.max_r1_bulk;
  r.max_r2_bulk = res.max_r2_bulk;
  r.max_r1_wall = res.max_r1_wall;
  r.max_r2_wall = res.max_r2_wall;
  r.plug_fraction = plug_threshold > 0.0 ? plug_region(next, plug_threshold).fraction
                                         : plug_region(next, forcing, params).fraction;
  return r;
}

}  // namespace pbingham
