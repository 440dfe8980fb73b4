#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pbingham/constitutive.hpp"
#include "pbingham/grid.hpp"
#include "pbingham/solver.hpp"

namespace pbingham {

/// One row of diagnostics.csv. Rates are in W, energies in J.
struct StepReport {
  double t = 0.0;
  double kinetic_energy = 0.0;
  double viscous_dissipation = 0.0;
  double plastic_dissipation = 0.0;
  double wall_dissipation = 0.0;
  double energy_residual = 0.0;
  double div_residual_inf = 0.0;
  double pf_min = 0.0;
  double pf_max = 0.0;
  double max_r1_bulk = 0.0;
  double max_r2_bulk = 0.0;
  double max_r1_wall = 0.0;
  double max_r2_wall = 0.0;
  double plug_fraction = 0.0;

  static std::vector<std::string> column_names();
  std::vector<double> values() const;
};

/// E = 1/2 rho sum |v|^2 h^d over faces.
double kinetic_energy(const VectorField& v, double rho_star);

/// Terms of the discrete energy identity of one step, evaluated at the
/// predictor v* with the coefficients used by the solver:
///   E_new - E_old + numerical + dt (viscous + plastic + wall) = dt (body_work + wall_work)
struct EnergyBudget {
  double kinetic_old = 0.0;
  double kinetic_new = 0.0;
  double viscous = 0.0;    ///< 2 nu* |D(v*)|^2 [W]
  double plastic = 0.0;    ///< Z:D(v*) [W]
  double wall = 0.0;       ///< wall friction (v* - U) [W]
  double numerical = 0.0;  ///< 1/2 rho (|v* - v_new|^2 + |v* - v_old|^2) [J]
  double body_work = 0.0;  ///< rho <b, v*> [W]
  double wall_work = 0.0;  ///< power input by moving walls [W]
  double residual = 0.0;   ///< signed imbalance [J]
  double scale = 0.0;      ///< max(E_old, dt |body_work|, dt |wall_work|)
};

EnergyBudget energy_budget(const SimulationState& prev, const SimulationState& next,
                           const ForcingSpec& forcing, const MaterialParams& params, double dt);

/// Pointwise constraint residuals of the regularized law at cells (with the
/// cell-centered strain rate) and at wall sites.
struct ResidualFields {
  ScalarField r1;
  ScalarField r2;
  ScalarField tau;
  ScalarField strain_norm;  ///< |D| at cells
  std::vector<double> wall_r1;
  std::vector<double> wall_r2;
  double max_r1_bulk = 0.0;
  double max_r2_bulk = 0.0;
  double max_r1_wall = 0.0;
  double max_r2_wall = 0.0;
};

ResidualFields constraint_residual_fields(const SimulationState& state, const ForcingSpec& forcing,
                                          const MaterialParams& params);

/// Cell-centered |D(v)| and |Z| with Z the regularized extra stress of the cell strain rate.
ScalarField strain_rate_norm(const VectorField& v);

struct PlugRegion {
  std::vector<std::uint8_t> mask;  ///< 1 on plug cells
  double fraction = 0.0;
};

/// Cells with |D| < threshold.
PlugRegion plug_region(const SimulationState& state, double threshold);

/// Strain-rate magnitude at which the regularized stress |2 nu* D + Z| reaches tau:
/// the positive root of 2 nu* d^2 + 2 nu* eps d - tau eps = 0 (0 for tau = 0).
double yield_strain_rate(double tau, const MaterialParams& params);

/// Cells where the regularized stress does not exceed the yield stress,
/// i.e. |D| <= yield_strain_rate(tau) with the local tau (|D| = 0 when tau = 0).
PlugRegion plug_region(const SimulationState& state, const ForcingSpec& forcing,
                       const MaterialParams& params);

/// Max-norm of the discrete divergence.
double divergence_inf(const VectorField& v);

/// Full report for the step prev -> next. A plug_threshold <= 0 selects the
/// stress-based plug detector.
StepReport make_report(const SimulationState& prev, const SimulationState& next,
                       const ForcingSpec& forcing, const MaterialParams& params,
                       double plug_threshold);

}  // namespace pbingham
