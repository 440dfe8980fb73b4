#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace pbingham {

/// Matrix-free Krylov solvers on flat vectors. All reductions run in a fixed
/// order, so results are bitwise reproducible.
namespace krylov {

using Vector = std::vector<double>;
using Operator = std::function<void(const Vector& x, Vector& y)>;
/// Optional hook applied to residual-like vectors (e.g. removing a null-space mean).
using Projector = std::function<void(Vector& x)>;

struct Result {
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;  ///< final residual 2-norm
};

double dot(const Vector& a, const Vector& b);
double norm2(const Vector& a);
double norm_inf(const Vector& a);

/// Preconditioned CG for symmetric positive (semi)definite operators; the
/// preconditioner is Jacobi with the given inverse diagonal (empty = identity).
Result conjugate_gradient(const Operator& apply, const Vector& rhs, Vector& x,
                          const Vector& inv_diag, double target_residual, int max_iter,
                          const Projector& project = {});

/// Jacobi-preconditioned BiCGSTAB for nonsymmetric operators.
Result bicgstab(const Operator& apply, const Vector& rhs, Vector& x, const Vector& inv_diag,
                double target_residual, int max_iter);

}  // namespace krylov
}  // namespace pbingham
