#pragma once

#include "pbingham/sym_tensor.hpp"

namespace pbingham {

/// Scalar constitutive constants. Defaults realize the normalized setting
/// rho* = 2 nu* = gamma* = K = q* = 1.
struct MaterialParams {
  double rho_star = 1.0;    ///< density [kg/m^3], > 0
  double nu_star = 0.5;     ///< viscosity [Pa s], > 0; the viscous stress is 2 nu* D
  double q_star = 1.0;      ///< yield slope [-], >= 0
  double K = 1.0;           ///< pore diffusivity [m^2/s], >= 0
  double s_star = 1.0;      ///< slip threshold [Pa], > 0
  double gamma_star = 1.0;  ///< slip friction [Pa s/m], >= 0
  double epsilon = 1e-2;    ///< regularization scale 1/n, > 0

  /// Throws EvaluationError naming the first violated constraint.
  void validate() const;
};

/// Residual pair from the two-inequality characterizations.
struct ConstraintCheck {
  bool satisfied = false;
  double r1 = 0.0;  ///< |Z| - threshold
  double r2 = 0.0;  ///< threshold |D| - Z:D
};

/// tau = q* (p_s - p_f)^+.
double yield_stress(double p_s_val, double p_f_val, double q_star);

/// Flowing branch: S = tau D/|D| + 2 nu* D. Throws DomainError for D = 0.
SymTensor stress_from_strain_exact(const SymTensor& D, double tau, double nu_star);

/// 2 nu* D = (|S| - tau)^+ / |S| S, zero for S = 0 and for |S| <= tau.
SymTensor strain_from_stress_exact(const SymTensor& S, double tau, double nu_star);

/// Z = tau D / (|D| + eps) with tau = yield_stress(p_s, p_f, q*).
SymTensor regularized_stress_extra(const SymTensor& D, double p_s_val, double p_f_val,
                                   const MaterialParams& params);

/// Z = tau D / (|D| + eps) for a given threshold.
SymTensor regularized_stress_extra_tau(const SymTensor& D, double tau, double epsilon);

/// |Z| <= tau and Z:D >= tau |D| with Z = S - 2 nu* D, each within tol.
ConstraintCheck check_scalar_constraints(const SymTensor& S, const SymTensor& D, double tau,
                                         double nu_star, double tol);

/// Absolute tolerance used for constraint checks: 1e-10 max(1, |S|, tau).
double default_constraint_tol(const SymTensor& S, double tau);

/// Slipping branch: s = s* v/|v| + gamma* v. Throws DomainError for v = 0.
Vec3 slip_traction_exact(const Vec3& v_tau, double s_star, double gamma_star);

/// gamma* v = (|s| - s*)^+ / |s| s. Throws DomainError for gamma* = 0.
Vec3 slip_velocity_exact(const Vec3& s_vec, double s_star, double gamma_star);

/// z = s* v / (|v| + eps).
Vec3 regularized_slip_traction(const Vec3& v_tau, double s_star, double epsilon);

/// |z| <= s* and z.v >= s* |v| with z = s - gamma* v, each within tol.
ConstraintCheck check_slip_constraints(const Vec3& s_vec, const Vec3& v_tau, double s_star,
                                       double gamma_star, double tol);

/// (Z - Zhat):(D1 - D2) minus the lower bound
/// tau eps (|D1| - |D2|)^2 / ((|D1| + eps)(|D2| + eps)); never negative beyond round-off.
double monotonicity_gap(const SymTensor& D1, const SymTensor& D2, double p_s_val, double p_f_val,
                        const MaterialParams& params);

/// Smooth cutoff of the convective term: 1 on |u| <= n, 0 on |u| >= 2n,
/// cubic C^1 blend in between with |G'| <= 1.5/n.
double convection_cutoff(double u, double n);

}  // namespace pbingham
