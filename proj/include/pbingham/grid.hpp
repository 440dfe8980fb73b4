#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "pbingham/sym_tensor.hpp"

namespace pbingham {

/// Cartesian MAC grid on an axis-aligned box.
///
/// Scalars live at cell centers. Vector component a lives on faces normal to
/// axis a; along a non-periodic axis there are n_a + 1 such faces, the first
/// and last being walls. Off-diagonal symmetric-tensor entries (a, b) live on
/// edges, indexed by a face position along a and along b and a cell position
/// along the remaining axis (in 2D: grid nodes). All storage is x-fastest.
///
/// In 2D the z axis is inactive: n[2] = 1 and it contributes no faces.
class StaggeredGrid {
public:
  static constexpr std::size_t kDefaultMaxCells = std::size_t{1} << 24;

  StaggeredGrid() = default;
  StaggeredGrid(int dim, std::array<int, 3> cells, std::array<double, 3> spacing,
                std::array<double, 3> origin = {0.0, 0.0, 0.0},
                std::array<bool, 3> periodic = {false, false, false},
                std::size_t max_cells = kDefaultMaxCells);

  /// Box [origin, origin + lengths] with `cells` cells per axis.
  static StaggeredGrid box(int dim, std::array<int, 3> cells, std::array<double, 3> lengths,
                           std::array<bool, 3> periodic = {false, false, false});

  int dim() const { return dim_; }
  int n(int a) const { return n_[a]; }
  double h(int a) const { return h_[a]; }
  double origin(int a) const { return origin_[a]; }
  bool periodic(int a) const { return periodic_[a]; }
  double length(int a) const { return n_[a] * h_[a]; }
  /// Cell (and face, and edge) control volume, product of active spacings.
  double cell_volume() const;

  std::size_t num_cells() const { return std::size_t(n_[0]) * n_[1] * n_[2]; }
  std::size_t cell_index(int i, int j, int k) const {
    return std::size_t(i) + std::size_t(n_[0]) * (std::size_t(j) + std::size_t(n_[1]) * k);
  }
  std::array<int, 3> cell_ijk(std::size_t idx) const;
  Vec3 cell_center(int i, int j, int k) const;

  /// Number of face positions along axis a for component a.
  int nfaces_along(int a) const { return periodic_[a] ? n_[a] : n_[a] + 1; }
  std::array<int, 3> face_shape(int a) const {
    std::array<int, 3> s = n_;
    s[a] = nfaces_along(a);
    return s;
  }
  std::size_t num_faces(int a) const;
  std::size_t face_index(int a, int i, int j, int k) const {
    const int s0 = a == 0 ? nfaces_along(0) : n_[0];
    const int s1 = a == 1 ? nfaces_along(1) : n_[1];
    return std::size_t(i) + std::size_t(s0) * (std::size_t(j) + std::size_t(s1) * k);
  }
  Vec3 face_center(int a, int i, int j, int k) const;
  /// True for a face index on a non-periodic boundary of axis a.
  bool is_wall_face(int a, int index_along_a) const {
    return !periodic_[a] && (index_along_a == 0 || index_along_a == n_[a]);
  }

  /// Edge pair (a, b) with a < b, both active.
  std::array<int, 3> edge_shape(int a, int b) const {
    std::array<int, 3> s = n_;
    s[a] = nfaces_along(a);
    s[b] = nfaces_along(b);
    return s;
  }
  std::size_t num_edges(int a, int b) const;
  std::size_t edge_index(int a, int b, int i, int j, int k) const {
    const int s0 = (a == 0 || b == 0) ? nfaces_along(0) : n_[0];
    const int s1 = (a == 1 || b == 1) ? nfaces_along(1) : n_[1];
    return std::size_t(i) + std::size_t(s0) * (std::size_t(j) + std::size_t(s1) * k);
  }

  /// Wraps a cell index along a periodic axis; returns -1 when out of range otherwise.
  int wrap_cell(int a, int i) const {
    if (periodic_[a]) return ((i % n_[a]) + n_[a]) % n_[a];
    return (i >= 0 && i < n_[a]) ? i : -1;
  }
  /// Index of the face on the high side of cell i along axis a.
  int high_face(int a, int i) const { return periodic_[a] ? (i + 1) % n_[a] : i + 1; }

  bool operator==(const StaggeredGrid& o) const;
  bool operator!=(const StaggeredGrid& o) const { return !(*this == o); }

private:
  int dim_ = 2;
  std::array<int, 3> n_{2, 2, 1};
  std::array<double, 3> h_{1.0, 1.0, 1.0};
  std::array<double, 3> origin_{0.0, 0.0, 0.0};
  std::array<bool, 3> periodic_{false, false, false};
};

/// Pair index for off-diagonal entries: (0,1) -> 0, (0,2) -> 1, (1,2) -> 2.
inline int pair_slot(int a, int b) { return a + b - 1; }

struct ScalarField {
  StaggeredGrid grid;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(const StaggeredGrid& g, double fill = 0.0)
      : grid(g), values(g.num_cells(), fill) {}

  double& at(int i, int j, int k) { return values[grid.cell_index(i, j, k)]; }
  double at(int i, int j, int k) const { return values[grid.cell_index(i, j, k)]; }
  double min() const;
  double max() const;
  double mean() const;
  bool all_finite() const;
};

struct VectorField {
  StaggeredGrid grid;
  std::array<std::vector<double>, 3> comp;
  /// When set, normal components on wall faces are kept at exactly zero.
  bool wall_constrained = true;

  VectorField() = default;
  explicit VectorField(const StaggeredGrid& g, bool constrained = true);

  double& at(int a, int i, int j, int k) { return comp[a][grid.face_index(a, i, j, k)]; }
  double at(int a, int i, int j, int k) const { return comp[a][grid.face_index(a, i, j, k)]; }
  /// Zeroes normal components on wall faces.
  void apply_wall_constraint();
  double max_abs() const;
  bool all_finite() const;
};

struct SymTensorField {
  StaggeredGrid grid;
  std::array<std::vector<double>, 3> diag;  ///< cell centered
  std::array<std::vector<double>, 3> off;   ///< edge centered, slot pair_slot(a, b)

  SymTensorField() = default;
  explicit SymTensorField(const StaggeredGrid& g);

  /// Cell-centered tensor: diagonal as stored, off-diagonals averaged from the
  /// four edges surrounding the cell in each coordinate plane.
  SymTensor at_cell(int i, int j, int k) const;
};

// Field algebra (fields must share a grid).
void axpy(double alpha, const VectorField& x, VectorField& y);
double inner_faces(const VectorField& x, const VectorField& y);  ///< sum x.y h^d
double inner_cells(const ScalarField& x, const ScalarField& y);  ///< sum x y h^d
VectorField linear_combination(double a, const VectorField& x, double b, const VectorField& y);

/// Face gradient; zero on wall faces (homogeneous Neumann closure).
VectorField gradient(const ScalarField& p);
/// Cell divergence as flux differences over each cell.
ScalarField divergence(const VectorField& v);
/// Discrete D(v): diagonal at cells, off-diagonals at edges. Tangential
/// samples across a wall use linear extrapolation ghosts.
SymTensorField sym_gradient(const VectorField& v);
/// Cell-centered velocity by face averaging.
std::vector<Vec3> cell_velocities(const VectorField& v);
/// divergence(gradient(p)).
ScalarField neumann_laplacian(const ScalarField& p);

struct PoissonResult {
  ScalarField solution;
  int iterations = 0;
  double residual = 0.0;       ///< final residual 2-norm
  double removed_mean = 0.0;   ///< mean subtracted from rhs for compatibility
  bool converged = true;
};

/// Zero-mean solution of -Lap_N p = rhs by Jacobi-preconditioned CG.
/// Stops when ||r||_2 <= max(tol ||rhs||_2, abs_tol). Throws SolverError on
/// non-convergence unless throw_on_failure is false (then `converged` is cleared).
PoissonResult neumann_laplacian_solve(const ScalarField& rhs, double tol, int max_iter,
                                      double abs_tol = 0.0, bool throw_on_failure = true);

struct AdvectDiffuseOptions {
  double linear_tol = 1e-14;
  int max_iter = 5000;
};

/// Largest per-cell sum of inflow Courant numbers; the explicit upwind update is
/// a convex combination iff this is <= 1.
double upwind_courant(const VectorField& v, double dt);

/// One step of explicit first-order upwind advection of c by v followed by
/// implicit diffusion with zero-flux walls:
///   (I - dt kappa Lap_N) c_new = c - dt v.grad_upwind(c) + dt src.
/// Throws CflError when upwind_courant(v, dt) > 1.
ScalarField advect_diffuse_step(const ScalarField& c, const VectorField& v, double kappa,
                                const ScalarField& src, double dt,
                                const AdvectDiffuseOptions& opts = {});

}  // namespace pbingham
