#include "pbingham/krylov.hpp"

#include <algorithm>

namespace pbingham::krylov {

double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

double norm_inf(const Vector& a) {
  double m = 0.0;
  for (double v : a) m = std::max(m, std::abs(v));
  return m;
}

namespace {

void precondition(const Vector& inv_diag, const Vector& r, Vector& z) {
  if (inv_diag.empty()) {
    z = r;
    return;
  }
  for (std::size_t i = 0; i < r.size(); ++i) z[i] = inv_diag[i] * r[i];
}

}  // namespace

Result conjugate_gradient(const Operator& apply, const Vector& rhs, Vector& x,
                          const Vector& inv_diag, double target_residual, int max_iter,
                          const Projector& project) {
  const std::size_t n = rhs.size();
  if (x.size() != n) x.assign(n, 0.0);
  Vector r(n), z(n), p(n), ap(n);
  apply(x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];
  if (project) project(r);

  Result res;
  res.residual = norm2(r);
  if (res.residual <= target_residual) {
    res.converged = true;
    return res;
  }
  precondition(inv_diag, r, z);
  if (project) project(z);
  p = z;
  double rz = dot(r, z);

  for (int it = 1; it <= max_iter; ++it) {
    apply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) {
      res.iterations = it;
      return res;
    }
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    if (project) project(r);
    res.iterations = it;
    res.residual = norm2(r);
    if (res.residual <= target_residual) {
      res.converged = true;
      break;
    }
    precondition(inv_diag, r, z);
    if (project) project(z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }
  if (project) project(x);
  // Recompute the true residual; the recurrence drifts for tight tolerances.
  apply(x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - ap[i];
  if (project) project(r);
  res.residual = norm2(r);
  res.converged = res.residual <= target_residual;
  return res;
}

Result bicgstab(const Operator& apply, const Vector& rhs, Vector& x, const Vector& inv_diag,
                double target_residual, int max_iter) {
  const std::size_t n = rhs.size();
  if (x.size() != n) x.assign(n, 0.0);
  Vector r(n), r0(n), p(n, 0.0), v(n, 0.0), s(n), t(n), phat(n), shat(n);

  Result res;
  int total = 0;
  // Restart from the current iterate on breakdown.
  for (int restart = 0; restart < 8 && total < max_iter; ++restart) {
    apply(x, t);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - t[i];
    res.residual = norm2(r);
    if (res.residual <= target_residual) {
      res.converged = true;
      res.iterations = total;
      return res;
    }
    r0 = r;
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    std::fill(p.begin(), p.end(), 0.0);
    std::fill(v.begin(), v.end(), 0.0);
    bool breakdown = false;
    while (total < max_iter) {
      ++total;
      const double rho_new = dot(r0, r);
      if (rho_new == 0.0 || omega == 0.0) {
        breakdown = true;
        break;
      }
      const double beta = (rho_new / rho) * (alpha / omega);
      rho = rho_new;
      for (std::size_t i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
      precondition(inv_diag, p, phat);
      apply(phat, v);
      const double r0v = dot(r0, v);
      if (r0v == 0.0) {
        breakdown = true;
        break;
      }
      alpha = rho / r0v;
      for (std::size_t i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
      if (norm2(s) <= target_residual) {
        for (std::size_t i = 0; i < n; ++i) x[i] += alpha * phat[i];
        break;
      }
      precondition(inv_diag, s, shat);
      apply(shat, t);
      const double tt = dot(t, t);
      omega = tt > 0.0 ? dot(t, s) / tt : 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * phat[i] + omega * shat[i];
        r[i] = s[i] - omega * t[i];
      }
      if (norm2(r) <= target_residual) break;
    }
    apply(x, t);
    for (std::size_t i = 0; i < n; ++i) r[i] = rhs[i] - t[i];
    res.residual = norm2(r);
    res.iterations = total;
    if (res.residual <= target_residual) {
      res.converged = true;
      return res;
    }
    if (!breakdown && total >= max_iter) break;
  }
  return res;
}

}  // namespace pbingham::krylov
