#pragma once

#include <cstdio>
#include <stdexcept>
#include <string>

namespace pbingham {

inline std::string fmt_g(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", x);
  return buf;
}

/// Raised when an operation is evaluated outside the set where it is single-valued
/// (rigid bulk state, stick wall state, zero friction).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// Non-finite inputs or invalid parameters.
class EvaluationError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Iterative linear solver did not reach its tolerance.
class SolverError : public std::runtime_error {
public:
  SolverError(const std::string& what, double final_residual, int iterations)
      : std::runtime_error(what + " (residual " + fmt_g(final_residual) + " after " +
                           std::to_string(iterations) + " iterations)"),
        residual_(final_residual), iterations_(iterations) {}

  double residual() const noexcept { return residual_; }
  int iterations() const noexcept { return iterations_; }

private:
  double residual_;
  int iterations_;
};

/// Advective time step too large for the explicit upwind update.
class CflError : public std::runtime_error {
public:
  CflError(const std::string& what, double courant)
      : std::runtime_error(what), courant_(courant) {}
  double courant() const noexcept { return courant_; }

private:
  double courant_;
};

}  // namespace pbingham
