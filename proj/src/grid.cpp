#include "pbingham/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pbingham/errors.hpp"
#include "pbingham/krylov.hpp"

namespace pbingham {

// ---------------------------------------------------------------------------
// StaggeredGrid

StaggeredGrid::StaggeredGrid(int dim, std::array<int, 3> cells, std::array<double, 3> spacing,
                             std::array<double, 3> origin, std::array<bool, 3> periodic,
                             std::size_t max_cells)
    : dim_(dim), n_(cells), h_(spacing), origin_(origin), periodic_(periodic) {
  if (dim != 2 && dim != 3) throw EvaluationError("grid dimension must be 2 or 3");
  if (dim == 2) {
    n_[2] = 1;
    h_[2] = 1.0;
    origin_[2] = 0.0;
    periodic_[2] = false;
  }
  for (int a = 0; a < dim; ++a) {
    if (n_[a] < 2) throw EvaluationError("grid needs at least 2 cells per axis");
    if (!(h_[a] > 0.0) || !std::isfinite(h_[a]))
      throw EvaluationError("grid spacing must be positive on every axis");
  }
  if (num_cells() > max_cells)
    throw EvaluationError("grid has " + std::to_string(num_cells()) +
                          " cells, above the configured maximum " + std::to_string(max_cells));
}

StaggeredGrid StaggeredGrid::box(int dim, std::array<int, 3> cells, std::array<double, 3> lengths,
                                 std::array<bool, 3> periodic) {
  std::array<double, 3> h{1.0, 1.0, 1.0};
  for (int a = 0; a < dim; ++a) h[a] = lengths[a] / cells[a];
  return StaggeredGrid(dim, cells, h, {0.0, 0.0, 0.0}, periodic);
}

double StaggeredGrid::cell_volume() const {
  double v = 1.0;
  for (int a = 0; a < dim_; ++a) v *= h_[a];
  return v;
}

std::array<int, 3> StaggeredGrid::cell_ijk(std::size_t idx) const {
  const int i = int(idx % n_[0]);
  idx /= n_[0];
  const int j = int(idx % n_[1]);
  const int k = int(idx / n_[1]);
  return {i, j, k};
}

Vec3 StaggeredGrid::cell_center(int i, int j, int k) const {
  Vec3 x{origin_[0] + (i + 0.5) * h_[0], origin_[1] + (j + 0.5) * h_[1], 0.0};
  if (dim_ == 3) x[2] = origin_[2] + (k + 0.5) * h_[2];
  return x;
}

std::size_t StaggeredGrid::num_faces(int a) const {
  const auto s = face_shape(a);
  return std::size_t(s[0]) * s[1] * s[2];
}

Vec3 StaggeredGrid::face_center(int a, int i, int j, int k) const {
  Vec3 x = cell_center(i, j, k);
  const int idx[3] = {i, j, k};
  x[a] = origin_[a] + idx[a] * h_[a];
  return x;
}

std::size_t StaggeredGrid::num_edges(int a, int b) const {
  const auto s = edge_shape(a, b);
  return std::size_t(s[0]) * s[1] * s[2];
}

bool StaggeredGrid::operator==(const StaggeredGrid& o) const {
  return dim_ == o.dim_ && n_ == o.n_ && h_ == o.h_ && origin_ == o.origin_ &&
         periodic_ == o.periodic_;
}

// ---------------------------------------------------------------------------
// Fields

double ScalarField::min() const { return *std::min_element(values.begin(), values.end()); }
double ScalarField::max() const { return *std::max_element(values.begin(), values.end()); }

double ScalarField::mean() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s / double(values.size());
}

bool ScalarField::all_finite() const {
  return std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

VectorField::VectorField(const StaggeredGrid& g, bool constrained)
    : grid(g), wall_constrained(constrained) {
  for (int a = 0; a < g.dim(); ++a) comp[a].assign(g.num_faces(a), 0.0);
}

void VectorField::apply_wall_constraint() {
  for (int a = 0; a < grid.dim(); ++a) {
    if (grid.periodic(a)) continue;
    const auto s = grid.face_shape(a);
    for (int k = 0; k < s[2]; ++k)
      for (int j = 0; j < s[1]; ++j)
        for (int i = 0; i < s[0]; ++i) {
          const int idx[3] = {i, j, k};
          if (grid.is_wall_face(a, idx[a])) comp[a][grid.face_index(a, i, j, k)] = 0.0;
        }
  }
}

double VectorField::max_abs() const {
  double m = 0.0;
  for (int a = 0; a < grid.dim(); ++a)
    for (double v : comp[a]) m = std::max(m, std::abs(v));
  return m;
}

bool VectorField::all_finite() const {
  for (int a = 0; a < grid.dim(); ++a)
    for (double v : comp[a])
      if (!std::isfinite(v)) return false;
  return true;
}

SymTensorField::SymTensorField(const StaggeredGrid& g) : grid(g) {
  for (int a = 0; a < g.dim(); ++a) diag[a].assign(g.num_cells(), 0.0);
  for (int a = 0; a < g.dim(); ++a)
    for (int b = a + 1; b < g.dim(); ++b) off[pair_slot(a, b)].assign(g.num_edges(a, b), 0.0);
}

SymTensor SymTensorField::at_cell(int i, int j, int k) const {
  const int d = grid.dim();
  SymTensor t(d);
  const std::size_t c = grid.cell_index(i, j, k);
  for (int a = 0; a < d; ++a) t(a, a) = diag[a][c];
  const int idx[3] = {i, j, k};
  for (int a = 0; a < d; ++a)
    for (int b = a + 1; b < d; ++b) {
      const int fa[2] = {idx[a], grid.high_face(a, idx[a])};
      const int fb[2] = {idx[b], grid.high_face(b, idx[b])};
      double s = 0.0;
      for (int p = 0; p < 2; ++p)
        for (int q = 0; q < 2; ++q) {
          int e[3] = {i, j, k};
          e[a] = fa[p];
          e[b] = fb[q];
          s += off[pair_slot(a, b)][grid.edge_index(a, b, e[0], e[1], e[2])];
        }
      t(a, b) = 0.25 * s;
    }
  return t;
}

void axpy(double alpha, const VectorField& x, VectorField& y) {
  for (int a = 0; a < x.grid.dim(); ++a)
    for (std::size_t f = 0; f < x.comp[a].size(); ++f) y.comp[a][f] += alpha * x.comp[a][f];
}

double inner_faces(const VectorField& x, const VectorField& y) {
  double s = 0.0;
  for (int a = 0; a < x.grid.dim(); ++a)
    for (std::size_t f = 0; f < x.comp[a].size(); ++f) s += x.comp[a][f] * y.comp[a][f];
  return s * x.grid.cell_volume();
}

double inner_cells(const ScalarField& x, const ScalarField& y) {
  double s = 0.0;
  for (std::size_t c = 0; c < x.values.size(); ++c) s += x.values[c] * y.values[c];
  return s * x.grid.cell_volume();
}

VectorField linear_combination(double a, const VectorField& x, double b, const VectorField& y) {
  VectorField r(x.grid, x.wall_constrained && y.wall_constrained);
  for (int d = 0; d < x.grid.dim(); ++d)
    for (std::size_t f = 0; f < x.comp[d].size(); ++f)
      r.comp[d][f] = a * x.comp[d][f] + b * y.comp[d][f];
  return r;
}

// ---------------------------------------------------------------------------
// Operators

VectorField gradient(const ScalarField& p) {
  const StaggeredGrid& g = p.grid;
  VectorField out(g);
  for (int a = 0; a < g.dim(); ++a) {
    const auto s = g.face_shape(a);
    for (int k = 0; k < s[2]; ++k)
      for (int j = 0; j < s[1]; ++j)
        for (int i = 0; i < s[0]; ++i) {
          int idx[3] = {i, j, k};
          if (g.is_wall_face(a, idx[a])) continue;
          int lo[3] = {i, j, k};
          lo[a] = g.wrap_cell(a, idx[a] - 1);
          out.comp[a][g.face_index(a, i, j, k)] = (p.at(i, j, k) - p.at(lo[0], lo[1], lo[2])) / g.h(a);
        }
  }
  return out;
}

ScalarField divergence(const VectorField& v) {
  const StaggeredGrid& g = v.grid;
  ScalarField out(g);
  for (int k = 0; k < g.n(2); ++k)
    for (int j = 0; j < g.n(1); ++j)
      for (int i = 0; i < g.n(0); ++i) {
        double s = 0.0;
        const int idx[3] = {i, j, k};
        for (int a = 0; a < g.dim(); ++a) {
          int hi[3] = {i, j, k};
          hi[a] = g.high_face(a, idx[a]);
          s += (v.comp[a][g.face_index(a, hi[0], hi[1], hi[2])] - v.comp[a][g.face_index(a, i, j, k)]) /
               g.h(a);
        }
        out.at(i, j, k) = s;
      }
  return out;
}

namespace {

// Cells along axis b used to difference a cell-centered-in-b sample at face
// position fb; out-of-box samples are replaced by linear extrapolation.
std::pair<int, int> difference_cells(const StaggeredGrid& g, int b, int fb) {
  const int n = g.n(b);
  if (g.periodic(b)) return {g.wrap_cell(b, fb - 1), fb};
  if (fb == 0) return {0, 1};
  if (fb == n) return {n - 2, n - 1};
  return {fb - 1, fb};
}

}  // namespace

SymTensorField sym_gradient(const VectorField& v) {
  const StaggeredGrid& g = v.grid;
  SymTensorField D(g);
  for (int k = 0; k < g.n(2); ++k)
    for (int j = 0; j < g.n(1); ++j)
      for (int i = 0; i < g.n(0); ++i) {
        const int idx[3] = {i, j, k};
        const std::size_t c = g.cell_index(i, j, k);
        for (int a = 0; a < g.dim(); ++a) {
          int hi[3] = {i, j, k};
          hi[a] = g.high_face(a, idx[a]);
          D.diag[a][c] = (v.comp[a][g.face_index(a, hi[0], hi[1], hi[2])] -
                          v.comp[a][g.face_index(a, i, j, k)]) /
                         g.h(a);
        }
      }
  for (int a = 0; a < g.dim(); ++a)
    for (int b = a + 1; b < g.dim(); ++b) {
      const auto s = g.edge_shape(a, b);
      auto& out = D.off[pair_slot(a, b)];
      for (int k = 0; k < s[2]; ++k)
        for (int j = 0; j < s[1]; ++j)
          for (int i = 0; i < s[0]; ++i) {
            const int e[3] = {i, j, k};
            // d v_a / d x_b: v_a sampled at face e[a] along a, cells along b
            const auto [blo, bhi] = difference_cells(g, b, e[b]);
            int p0[3] = {i, j, k}, p1[3] = {i, j, k};
            p0[b] = blo;
            p1[b] = bhi;
            const double dva =
                (v.comp[a][g.face_index(a, p1[0], p1[1], p1[2])] - v.comp[a][g.face_index(a, p0[0], p0[1], p0[2])]) /
                g.h(b);
            // d v_b / d x_a
            const auto [alo, ahi] = difference_cells(g, a, e[a]);
            int q0[3] = {i, j, k}, q1[3] = {i, j, k};
            q0[a] = alo;
            q1[a] = ahi;
            const double dvb =
                (v.comp[b][g.face_index(b, q1[0], q1[1], q1[2])] - v.comp[b][g.face_index(b, q0[0], q0[1], q0[2])]) /
                g.h(a);
            out[g.edge_index(a, b, i, j, k)] = 0.5 * (dva + dvb);
          }
    }
  return D;
}

std::vector<Vec3> cell_velocities(const VectorField& v) {
  const StaggeredGrid& g = v.grid;
  std::vector<Vec3> out(g.num_cells(), Vec3{});
  for (int k = 0; k < g.n(2); ++k)
    for (int j = 0; j < g.n(1); ++j)
      for (int i = 0; i < g.n(0); ++i) {
        const int idx[3] = {i, j, k};
        Vec3& u = out[g.cell_index(i, j, k)];
        for (int a = 0; a < g.dim(); ++a) {
          int hi[3] = {i, j, k};
          hi[a] = g.high_face(a, idx[a]);
          u[a] = 0.5 * (v.comp[a][g.face_index(a, i, j, k)] + v.comp[a][g.face_index(a, hi[0], hi[1], hi[2])]);
        }
      }
  return out;
}

ScalarField neumann_laplacian(const ScalarField& p) { return divergence(gradient(p)); }

namespace {

// Diagonal of -Lap_N at each cell.
std::vector<double> neumann_diagonal(const StaggeredGrid& g) {
  std::vector<double> d(g.num_cells(), 0.0);
  for (int k = 0; k < g.n(2); ++k)
    for (int j = 0; j < g.n(1); ++j)
      for (int i = 0; i < g.n(0); ++i) {
        const int idx[3] = {i, j, k};
        double s = 0.0;
        for (int a = 0; a < g.dim(); ++a) {
          const double w = 1.0 / (g.h(a) * g.h(a));
          if (!g.is_wall_face(a, idx[a])) s += w;
          if (!g.is_wall_face(a, g.high_face(a, idx[a]))) s += w;
        }
        d[g.cell_index(i, j, k)] = s;
      }
  return d;
}

void remove_mean(std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  const double m = s / double(x.size());
  for (double& v : x) v -= m;
}

}  // namespace

PoissonResult neumann_laplacian_solve(const ScalarField& rhs, double tol, int max_iter,
                                      double abs_tol, bool throw_on_failure) {
  const StaggeredGrid& g = rhs.grid;
  PoissonResult out;
  out.solution = ScalarField(g);
  out.removed_mean = rhs.mean();

  krylov::Vector b = rhs.values;
  for (double& v : b) v -= out.removed_mean;
  const double bnorm = krylov::norm2(b);
  if (bnorm == 0.0) return out;

  const auto diag = neumann_diagonal(g);
  krylov::Vector inv(diag.size());
  for (std::size_t c = 0; c < diag.size(); ++c) inv[c] = 1.0 / diag[c];

  ScalarField work(g);
  auto apply = [&](const krylov::Vector& x, krylov::Vector& y) {
    work.values = x;
    const ScalarField lap = neumann_laplacian(work);
    y.resize(x.size());
    for (std::size_t c = 0; c < x.size(); ++c) y[c] = -lap.values[c];
  };
  krylov::Vector x(b.size(), 0.0);
  const double target = std::max(tol * bnorm, abs_tol);
  const auto res = krylov::conjugate_gradient(apply, b, x, inv, target, max_iter, remove_mean);
  out.iterations = res.iterations;
  out.residual = res.residual;
  out.converged = res.converged;
  if (!res.converged && throw_on_failure)
    throw SolverError("Neumann Poisson solve did not converge (target " + fmt_g(target) + ")", res.residual, res.iterations);
  out.solution.values = std::move(x);
  return out;
}

double upwind_courant(const VectorField& v, double dt) {
  const StaggeredGrid& g = v.grid;
  double worst = 0.0;
  for (int k = 0; k < g.n(2); ++k)
    for (int j = 0; j < g.n(1); ++j)
      for (int i = 0; i < g.n(0); ++i) {
        const int idx[3] = {i, j, k};
        double s = 0.0;
        for (int a = 0; a < g.dim(); ++a) {
          int hi[3] = {i, j, k};
          hi[a] = g.high_face(a, idx[a]);
          const double vlo = g.is_wall_face(a, idx[a]) ? 0.0 : v.comp[a][g.face_index(a, i, j, k)];
          const double vhi =
              g.is_wall_face(a, hi[a]) ? 0.0 : v.comp[a][g.face_index(a, hi[0], hi[1], hi[2])];
          s += (std::max(vlo, 0.0) + std::max(-vhi, 0.0)) / g.h(a);
        }
        worst = std::max(worst, s * dt);
      }
  return worst;
}

ScalarField advect_diffuse_step(const ScalarField& c, const VectorField& v, double kappa,
                                const ScalarField& src, double dt, const AdvectDiffuseOptions& opts) {
  const StaggeredGrid& g = c.grid;
  if (!(dt > 0.0)) throw EvaluationError("advect_diffuse_step: dt must be positive");
  if (!(kappa >= 0.0)) throw EvaluationError("advect_diffuse_step: kappa must be >= 0");
  const double courant = upwind_courant(v, dt);
  if (courant > 1.0)
    throw CflError("upwind CFL violated: courant " + std::to_string(courant) + " > 1", courant);

  // Explicit upwind: only inflow faces contribute, so the update is a convex
  // combination of neighbouring values.
  ScalarField star(g);
  for (int k = 0; k < g.n(2); ++k)
    for (int j = 0; j < g.n(1); ++j)
      for (int i = 0; i < g.n(0); ++i) {
        const int idx[3] = {i, j, k};
        const double ci = c.at(i, j, k);
        double rate = 0.0;
        for (int a = 0; a < g.dim(); ++a) {
          int hi[3] = {i, j, k};
          hi[a] = g.high_face(a, idx[a]);
          if (!g.is_wall_face(a, idx[a])) {
            const double vlo = v.comp[a][g.face_index(a, i, j, k)];
            if (vlo > 0.0) {
              int lo[3] = {i, j, k};
              lo[a] = g.wrap_cell(a, idx[a] - 1);
              rate += vlo * (ci - c.at(lo[0], lo[1], lo[2])) / g.h(a);
            }
          }
          if (!g.is_wall_face(a, hi[a])) {
            const double vhi = v.comp[a][g.face_index(a, hi[0], hi[1], hi[2])];
            if (vhi < 0.0) {
              int up[3] = {i, j, k};
              up[a] = g.wrap_cell(a, idx[a] + 1);
              rate += -vhi * (ci - c.at(up[0], up[1], up[2])) / g.h(a);
            }
          }
        }
        star.at(i, j, k) = ci - dt * rate + dt * src.at(i, j, k);
      }

  if (kappa == 0.0) return star;

  const auto diag = neumann_diagonal(g);
  krylov::Vector inv(diag.size());
  for (std::size_t n = 0; n < diag.size(); ++n) inv[n] = 1.0 / (1.0 + dt * kappa * diag[n]);
  ScalarField work(g);
  auto apply = [&](const krylov::Vector& x, krylov::Vector& y) {
    work.values = x;
    const ScalarField lap = neumann_laplacian(work);
    y.resize(x.size());
    for (std::size_t n = 0; n < x.size(); ++n) y[n] = x[n] - dt * kappa * lap.values[n];
  };
  krylov::Vector x = star.values;
  const double target = opts.linear_tol * std::max(krylov::norm2(star.values), std::numeric_limits<double>::min());
  const auto res = krylov::conjugate_gradient(apply, star.values, x, inv, target, opts.max_iter);
  if (!res.converged) {
    // Accept a round-off stall with small backward error; the operator is
    // I - dt kappa Lap with spectrum >= 1, so the solution error is at most ||r||.
    double amax = 0.0;
    for (double v : inv) amax = std::max(amax, 1.0 / v);
    const double backward = opts.linear_tol * (krylov::norm2(star.values) + 2.0 * amax * krylov::norm2(x));
    if (!(res.residual <= backward))
      throw SolverError("implicit diffusion solve did not converge (target " + fmt_g(target) + ")", res.residual,
                        res.iterations);
  }
  ScalarField out(g);
  out.values = std::move(x);
  return out;
}

}  // namespace pbingham
