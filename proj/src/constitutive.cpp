#include "pbingham/constitutive.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pbingham/errors.hpp"

namespace pbingham {

namespace {

void require_finite(double x, const char* name) {
  if (!std::isfinite(x)) throw EvaluationError(std::string("non-finite input: ") + name);
}

void require_finite(const SymTensor& t, const char* name) {
  if (!t.is_finite()) throw EvaluationError(std::string("non-finite tensor input: ") + name);
}

void require_finite(const Vec3& v, const char* name) {
  for (double x : v) require_finite(x, name);
}

}  // namespace

void MaterialParams::validate() const {
  auto check = [](bool ok, const char* key, const char* rule) {
    if (!ok) throw EvaluationError(std::string("material parameter ") + key + " must be " + rule);
  };
  check(std::isfinite(rho_star) && rho_star > 0.0, "rho_star", "> 0");
  check(std::isfinite(nu_star) && nu_star > 0.0, "nu_star", "> 0");
  check(std::isfinite(q_star) && q_star >= 0.0, "q_star", ">= 0");
  check(std::isfinite(K) && K >= 0.0, "K", ">= 0");
  check(std::isfinite(s_star) && s_star > 0.0, "s_star", "> 0");
  check(std::isfinite(gamma_star) && gamma_star >= 0.0, "gamma_star", ">= 0");
  check(std::isfinite(epsilon) && epsilon > 0.0, "epsilon", "> 0");
}

double yield_stress(double p_s_val, double p_f_val, double q_star) {
  require_finite(p_s_val, "p_s");
  require_finite(p_f_val, "p_f");
  require_finite(q_star, "q_star");
  return q_star * std::max(p_s_val - p_f_val, 0.0);
}

SymTensor stress_from_strain_exact(const SymTensor& D, double tau, double nu_star) {
  require_finite(D, "D");
  const double d = D.norm();
  if (d == 0.0) throw DomainError("rigid state: stress not uniquely determined");
  return (tau / d + 2.0 * nu_star) * D;
}

SymTensor strain_from_stress_exact(const SymTensor& S, double tau, double nu_star) {
  require_finite(S, "S");
  const double s = S.norm();
  // |S| <= tau is rigid, including the tie and the S = 0 limit.
  if (s <= tau || s == 0.0) return SymTensor(S.dim());
  return ((s - tau) / (s * 2.0 * nu_star)) * S;
}

SymTensor regularized_stress_extra_tau(const SymTensor& D, double tau, double epsilon) {
  return (tau / (D.norm() + epsilon)) * D;
}

SymTensor regularized_stress_extra(const SymTensor& D, double p_s_val, double p_f_val,
                                   const MaterialParams& params) {
  require_finite(D, "D");
  const double tau = yield_stress(p_s_val, p_f_val, params.q_star);
  return regularized_stress_extra_tau(D, tau, params.epsilon);
}

ConstraintCheck check_scalar_constraints(const SymTensor& S, const SymTensor& D, double tau,
                                         double nu_star, double tol) {
  const SymTensor Z = S - 2.0 * nu_star * D;
  ConstraintCheck c;
  c.r1 = Z.norm() - tau;
  c.r2 = tau * D.norm() - Z.contract(D);
  c.satisfied = c.r1 <= tol && c.r2 <= tol;
  return c;
}

double default_constraint_tol(const SymTensor& S, double tau) {
  return 1e-10 * std::max({1.0, S.norm(), tau});
}

Vec3 slip_traction_exact(const Vec3& v_tau, double s_star, double gamma_star) {
  require_finite(v_tau, "v_tau");
  const double v = norm(v_tau);
  if (v == 0.0) throw DomainError("stick state: traction not uniquely determined");
  return (s_star / v + gamma_star) * v_tau;
}

Vec3 slip_velocity_exact(const Vec3& s_vec, double s_star, double gamma_star) {
  require_finite(s_vec, "s");
  if (gamma_star == 0.0) throw DomainError("zero friction: slip velocity not determined");
  const double s = norm(s_vec);
  if (s <= s_star || s == 0.0) return Vec3{};
  return ((s - s_star) / (s * gamma_star)) * s_vec;
}

Vec3 regularized_slip_traction(const Vec3& v_tau, double s_star, double epsilon) {
  return (s_star / (norm(v_tau) + epsilon)) * v_tau;
}

ConstraintCheck check_slip_constraints(const Vec3& s_vec, const Vec3& v_tau, double s_star,
                                       double gamma_star, double tol) {
  const Vec3 z = s_vec - gamma_star * v_tau;
  ConstraintCheck c;
  c.r1 = norm(z) - s_star;
  c.r2 = s_star * norm(v_tau) - dot(z, v_tau);
  c.satisfied = c.r1 <= tol && c.r2 <= tol;
  return c;
}

double monotonicity_gap(const SymTensor& D1, const SymTensor& D2, double p_s_val, double p_f_val,
                        const MaterialParams& params) {
  const double tau = yield_stress(p_s_val, p_f_val, params.q_star);
  const double eps = params.epsilon;
  const double n1 = D1.norm();
  const double n2 = D2.norm();
  const SymTensor Z1 = regularized_stress_extra_tau(D1, tau, eps);
  const SymTensor Z2 = regularized_stress_extra_tau(D2, tau, eps);
  const double lhs = (Z1 - Z2).contract(D1 - D2);
  const double rhs = tau * eps * (n1 - n2) * (n1 - n2) / ((n1 + eps) * (n2 + eps));
  return lhs - rhs;
}

double convection_cutoff(double u, double n) {
  const double a = std::abs(u);
  if (a <= n) return 1.0;
  if (a >= 2.0 * n) return 0.0;
  const double s = (a - n) / n;
  return 1.0 - s * s * (3.0 - 2.0 * s);
}

}  // namespace pbingham
