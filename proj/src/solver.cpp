#include "pbingham/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "pbingham/errors.hpp"
#include "pbingham/krylov.hpp"

namespace pbingham {

void DarcyParams::validate() const {
  if (!(phi0 > 0.0 && phi0 < 1.0)) throw EvaluationError("darcy.phi0 must lie in (0, 1)");
  if (!(mu_f > 0.0)) throw EvaluationError("darcy.mu_f must be > 0");
  if (!(k0 > 0.0)) throw EvaluationError("darcy.k0 must be > 0");
  if (!(rho_f > 0.0)) throw EvaluationError("darcy.rho_f must be > 0");
}

void SolverConfig::validate() const {
  if (!(dt_initial > 0.0)) throw EvaluationError("solver.dt_initial must be > 0");
  if (!(cfl_target > 0.0 && cfl_target < 1.0)) throw EvaluationError("solver.cfl_target must lie in (0, 1)");
  if (picard_iters < 1) throw EvaluationError("solver.picard_iters must be >= 1");
  if (!(picard_tol >= 0.0)) throw EvaluationError("solver.picard_tol must be >= 0");
  if (!(projection_tol > 0.0)) throw EvaluationError("solver.projection_tol must be > 0");
  if (!(linear_tol > 0.0)) throw EvaluationError("solver.linear_tol must be > 0");
  if (max_linear_iters < 1) throw EvaluationError("solver.max_linear_iters must be >= 1");
  if (convection_truncation_n && !(*convection_truncation_n > 0.0))
    throw EvaluationError("solver.convection_truncation_n must be > 0");
  if (!(end_time > 0.0)) throw EvaluationError("solver.end_time must be > 0");
}

// ---------------------------------------------------------------------------
// Sampling helpers

VectorField sample_faces(const StaggeredGrid& g, const ForcingSpec::VectorFn& f, double t) {
  VectorField out(g);
  if (!f) return out;
  for (int a = 0; a < g.dim(); ++a) {
    const auto s = g.face_shape(a);
    for (int k = 0; k < s[2]; ++k)
      for (int j = 0; j < s[1]; ++j)
        for (int i = 0; i < s[0]; ++i) {
          const int idx[3] = {i, j, k};
          if (g.is_wall_face(a, idx[a])) continue;
          out.comp[a][g.face_index(a, i, j, k)] = f(t, g.face_center(a, i, j, k))[a];
        }
  }
  return out;
}

ScalarField sample_cells(const StaggeredGrid& g, const ForcingSpec::ScalarFn& f, double t) {
  ScalarField out(g);
  if (!f) return out;
  for (int k = 0; k < g.n(2); ++k)
    for (int j = 0; j < g.n(1); ++j)
      for (int i = 0; i < g.n(0); ++i) out.at(i, j, k) = f(t, g.cell_center(i, j, k));
  return out;
}

namespace {

krylov::Vector flatten(const VectorField& v) {
  krylov::Vector x;
  for (int a = 0; a < v.grid.dim(); ++a) x.insert(x.end(), v.comp[a].begin(), v.comp[a].end());
  return x;
}

void unflatten(const krylov::Vector& x, VectorField& v) {
  std::size_t off = 0;
  for (int a = 0; a < v.grid.dim(); ++a) {
    std::copy(x.begin() + off, x.begin() + off + v.comp[a].size(), v.comp[a].begin());
    off += v.comp[a].size();
  }
}

// Visits every face of component a that is not a wall face.
template <class F>
void for_interior_faces(const StaggeredGrid& g, int a, F&& f) {
  const auto s = g.face_shape(a);
  for (int k = 0; k < s[2]; ++k)
    for (int j = 0; j < s[1]; ++j)
      for (int i = 0; i < s[0]; ++i) {
        const int idx[3] = {i, j, k};
        if (g.is_wall_face(a, idx[a])) continue;
        f(i, j, k);
      }
}

bool interior_edge(const StaggeredGrid& g, int a, int b, const int e[3]) {
  return !g.is_wall_face(a, e[a]) && !g.is_wall_face(b, e[b]);
}

}  // namespace

// ---------------------------------------------------------------------------
// Wall closure

std::vector<WallSite> wall_sites(const StaggeredGrid& g) {
  std::vector<WallSite> out;
  for (int b = 0; b < g.dim(); ++b) {
    if (g.periodic(b)) continue;
    for (int side = 0; side < 2; ++side) {
      const int row = side == 0 ? 0 : g.n(b) - 1;
      for (int a = 0; a < g.dim(); ++a) {
        if (a == b) continue;
        for_interior_faces(g, a, [&](int i, int j, int k) {
          const int idx[3] = {i, j, k};
          if (idx[b] != row) return;
          WallSite s;
          s.wall_axis = b;
          s.side = side;
          s.component = a;
          s.face = g.face_index(a, i, j, k);
          s.position = g.face_center(a, i, j, k);
          s.position[b] = g.origin(b) + side * g.length(b);
          out.push_back(s);
        });
      }
    }
  }
  return out;
}

Vec3 site_tangential_velocity(const VectorField& v, const WallSite& s, const Vec3& U) {
  const StaggeredGrid& g = v.grid;
  const int a = s.component, b = s.wall_axis;
  const auto shape = g.face_shape(a);
  int idx[3];
  {
    std::size_t f = s.face;
    idx[0] = int(f % shape[0]);
    f /= shape[0];
    idx[1] = int(f % shape[1]);
    idx[2] = int(f / shape[1]);
  }
  Vec3 t{};
  t[a] = v.comp[a][s.face] - U[a];
  for (int c = 0; c < g.dim(); ++c) {
    if (c == a || c == b) continue;
    const int acells[2] = {g.wrap_cell(a, idx[a] - 1), idx[a]};
    const int cfaces[2] = {idx[c], g.high_face(c, idx[c])};
    double sum = 0.0;
    for (int p = 0; p < 2; ++p)
      for (int q = 0; q < 2; ++q) {
        int f[3] = {idx[0], idx[1], idx[2]};
        f[a] = acells[p];
        f[c] = cfaces[q];
        sum += v.comp[c][g.face_index(c, f[0], f[1], f[2])];
      }
    t[c] = 0.25 * sum - U[c];
  }
  return t;
}

double wall_slip_speed(double gap, double conductance, const MaterialParams& params) {
  if (gap <= 0.0) return 0.0;
  const double k = conductance, eps = params.epsilon;
  // (k + gamma) w^2 + (k eps + s* + gamma eps - k gap) w - k gap eps = 0, positive root
  const double A = k + params.gamma_star;
  const double B = k * eps + params.s_star + params.gamma_star * eps - k * gap;
  const double C = k * gap * eps;
  const double disc = std::sqrt(B * B + 4.0 * A * C);
  const double w = B > 0.0 ? 2.0 * C / (B + disc) : (disc - B) / (2.0 * A);
  return std::min(w, gap);
}

Vec3 wall_slip_velocity(const VectorField& v, const WallSite& s, const Vec3& U, double conductance,
                        const MaterialParams& params) {
  const Vec3 d = site_tangential_velocity(v, s, U);
  const double gap = norm(d);
  if (gap == 0.0) return Vec3{};
  return (wall_slip_speed(gap, conductance, params) / gap) * d;
}

WallClosure enforce_slip(const VectorField& v_lag, const MaterialParams& params,
                         const ForcingSpec& forcing, double t, const std::vector<double>* cell_mu) {
  const StaggeredGrid& g = v_lag.grid;
  WallClosure w;
  w.sites = wall_sites(g);
  const std::size_t ns = w.sites.size();
  w.coef.resize(ns);
  w.friction.resize(ns);
  w.conductance.resize(ns);
  w.wall_velocity.resize(ns);
  w.drag = VectorField(g);
  w.drag_rhs = VectorField(g);
  for (std::size_t n = 0; n < ns; ++n) {
    const WallSite& s = w.sites[n];
    const int a = s.component;
    const double hb = g.h(s.wall_axis);
    double mu = 0.0;
    if (cell_mu) {
      // cells on either side of the face along its own axis
      const auto shape = g.face_shape(a);
      std::size_t f = s.face;
      int idx[3];
      idx[0] = int(f % shape[0]);
      f /= shape[0];
      idx[1] = int(f % shape[1]);
      idx[2] = int(f / shape[1]);
      int lo[3] = {idx[0], idx[1], idx[2]};
      lo[a] = g.wrap_cell(a, idx[a] - 1);
      mu = 0.5 * ((*cell_mu)[g.cell_index(lo[0], lo[1], lo[2])] + (*cell_mu)[g.cell_index(idx[0], idx[1], idx[2])]);
    }
    Vec3 U = forcing.wall_v(t, s.position);
    U[s.wall_axis] = 0.0;
    const double k = (2.0 * params.nu_star + mu) / hb;
    const double gap = norm(site_tangential_velocity(v_lag, s, U));
    const double fr = params.s_star / (wall_slip_speed(gap, k, params) + params.epsilon) + params.gamma_star;
    const double coef = fr * k / (fr + k);
    w.coef[n] = coef;
    w.friction[n] = fr;
    w.conductance[n] = k;
    w.wall_velocity[n] = U;
    w.drag.comp[a][s.face] += coef / hb;
    w.drag_rhs.comp[a][s.face] += coef * U[a] / hb;
  }
  return w;
}

Vec3 wall_traction(const WallClosure& closure, std::size_t site, const VectorField& v) {
  const Vec3 vt = site_tangential_velocity(v, closure.sites[site], closure.wall_velocity[site]);
  return closure.coef[site] * vt;
}

// ---------------------------------------------------------------------------
// Momentum operator

VectorField stress_divergence_operator(const std::vector<double>& cell_coef,
                                       const std::array<std::vector<double>, 3>& edge_coef,
                                       const VectorField& v) {
  const StaggeredGrid& g = v.grid;
  const SymTensorField D = sym_gradient(v);
  VectorField out(g);
  for (int k = 0; k < g.n(2); ++k)
    for (int j = 0; j < g.n(1); ++j)
      for (int i = 0; i < g.n(0); ++i) {
        const int idx[3] = {i, j, k};
        const std::size_t c = g.cell_index(i, j, k);
        for (int a = 0; a < g.dim(); ++a) {
          const double T = cell_coef[c] * D.diag[a][c] / g.h(a);
          int hi[3] = {i, j, k};
          hi[a] = g.high_face(a, idx[a]);
          if (!g.is_wall_face(a, hi[a])) out.comp[a][g.face_index(a, hi[0], hi[1], hi[2])] += T;
          if (!g.is_wall_face(a, idx[a])) out.comp[a][g.face_index(a, i, j, k)] -= T;
        }
      }
  for (int a = 0; a < g.dim(); ++a)
    for (int b = a + 1; b < g.dim(); ++b) {
      const int slot = pair_slot(a, b);
      const auto s = g.edge_shape(a, b);
      for (int k = 0; k < s[2]; ++k)
        for (int j = 0; j < s[1]; ++j)
          for (int i = 0; i < s[0]; ++i) {
            const int e[3] = {i, j, k};
            if (!interior_edge(g, a, b, e)) continue;
            const std::size_t ei = g.edge_index(a, b, i, j, k);
            const double T = edge_coef[slot][ei] * D.off[slot][ei];
            // v_a faces above and below the edge along b
            {
              int up[3] = {i, j, k}, dn[3] = {i, j, k};
              dn[b] = g.wrap_cell(b, e[b] - 1);
              out.comp[a][g.face_index(a, up[0], up[1], up[2])] += T / g.h(b);
              out.comp[a][g.face_index(a, dn[0], dn[1], dn[2])] -= T / g.h(b);
            }
            // v_b faces on either side along a
            {
              int up[3] = {i, j, k}, dn[3] = {i, j, k};
              dn[a] = g.wrap_cell(a, e[a] - 1);
              out.comp[b][g.face_index(b, up[0], up[1], up[2])] += T / g.h(a);
              out.comp[b][g.face_index(b, dn[0], dn[1], dn[2])] -= T / g.h(a);
            }
          }
    }
  return out;
}

ConvectionMatrix convection_matrix(const VectorField& w) {
  const StaggeredGrid& g = w.grid;
  ConvectionMatrix m;
  m.grid = g;
  for (int a = 0; a < g.dim(); ++a) {
    auto& row = m.row_start[a];
    auto& col = m.column[a];
    auto& val = m.value[a];
    row.assign(g.num_faces(a) + 1, 0);
    const auto shape = g.face_shape(a);
    for (int k = 0; k < shape[2]; ++k)
      for (int j = 0; j < shape[1]; ++j)
        for (int i = 0; i < shape[0]; ++i) {
          const int idx[3] = {i, j, k};
          const std::size_t f = g.face_index(a, i, j, k);
          if (!g.is_wall_face(a, idx[a])) {
            // along a: control-volume faces are the two cells sharing face f
            {
              const int lo_cell = g.wrap_cell(a, idx[a] - 1);
              int nx[3] = {i, j, k}, pv[3] = {i, j, k};
              nx[a] = g.high_face(a, idx[a]);
              pv[a] = lo_cell;
              const std::size_t fn = g.face_index(a, nx[0], nx[1], nx[2]);
              const std::size_t fp = g.face_index(a, pv[0], pv[1], pv[2]);
              const double Fp = 0.5 * (w.comp[a][f] + w.comp[a][fn]);
              const double Fm = 0.5 * (w.comp[a][fp] + w.comp[a][f]);
              col.push_back(fn);
              val.push_back(Fp / (2.0 * g.h(a)));
              col.push_back(fp);
              val.push_back(-Fm / (2.0 * g.h(a)));
            }
            for (int b = 0; b < g.dim(); ++b) {
              if (b == a) continue;
              // advecting flux through the edge at b-face position eb
              auto flux = [&](int eb) {
                int f0[3] = {i, j, k}, f1[3] = {i, j, k};
                f0[a] = g.wrap_cell(a, idx[a] - 1);
                f0[b] = eb;
                f1[b] = eb;
                return 0.5 * (w.comp[b][g.face_index(b, f0[0], f0[1], f0[2])] +
                              w.comp[b][g.face_index(b, f1[0], f1[1], f1[2])]);
              };
              const int up = g.wrap_cell(b, idx[b] + 1);
              if (up >= 0) {
                int nb[3] = {i, j, k};
                nb[b] = up;
                col.push_back(g.face_index(a, nb[0], nb[1], nb[2]));
                val.push_back(flux(g.high_face(b, idx[b])) / (2.0 * g.h(b)));
              }
              const int dn = g.wrap_cell(b, idx[b] - 1);
              if (dn >= 0) {
                int nb[3] = {i, j, k};
                nb[b] = dn;
                col.push_back(g.face_index(a, nb[0], nb[1], nb[2]));
                val.push_back(-flux(idx[b]) / (2.0 * g.h(b)));
              }
            }
          }
          row[f + 1] = col.size();
        }
  }
  return m;
}

void ConvectionMatrix::apply(const VectorField& u, VectorField& out, double scale) const {
  for (int a = 0; a < grid.dim(); ++a) {
    const auto& row = row_start[a];
    const auto& col = column[a];
    const auto& val = value[a];
    const auto& ua = u.comp[a];
    auto& oa = out.comp[a];
    for (std::size_t f = 0; f + 1 < row.size(); ++f) {
      double acc = 0.0;
      for (std::size_t n = row[f]; n < row[f + 1]; ++n) acc += val[n] * ua[col[n]];
      oa[f] += scale * acc;
    }
  }
}

VectorField skew_convection(const VectorField& w, const VectorField& u) {
  VectorField out(u.grid);
  convection_matrix(w).apply(u, out, 1.0);
  return out;
}

void MomentumSystem::apply(const VectorField& x, VectorField& y) const {
  y = stress_divergence_operator(cell_coef, edge_coef, x);
  if (convection) convection->apply(x, y, rho);
  for (int a = 0; a < grid.dim(); ++a) {
    const auto s = grid.face_shape(a);
    for (int k = 0; k < s[2]; ++k)
      for (int j = 0; j < s[1]; ++j)
        for (int i = 0; i < s[0]; ++i) {
          const int idx[3] = {i, j, k};
          const std::size_t f = grid.face_index(a, i, j, k);
          if (grid.is_wall_face(a, idx[a]))
            y.comp[a][f] = x.comp[a][f];
          else
            y.comp[a][f] += (mass + drag.comp[a][f]) * x.comp[a][f];
        }
  }
}

VectorField MomentumSystem::diagonal() const {
  const StaggeredGrid& g = grid;
  VectorField d(g);
  for (int a = 0; a < g.dim(); ++a) {
    const auto s = g.face_shape(a);
    for (int k = 0; k < s[2]; ++k)
      for (int j = 0; j < s[1]; ++j)
        for (int i = 0; i < s[0]; ++i) {
          const int idx[3] = {i, j, k};
          const std::size_t f = g.face_index(a, i, j, k);
          if (g.is_wall_face(a, idx[a])) {
            d.comp[a][f] = 1.0;
            continue;
          }
          double v = mass + drag.comp[a][f];
          const double ha2 = g.h(a) * g.h(a);
          int lo[3] = {i, j, k};
          lo[a] = g.wrap_cell(a, idx[a] - 1);
          v += (cell_coef[g.cell_index(lo[0], lo[1], lo[2])] + cell_coef[g.cell_index(i, j, k)]) / ha2;
          for (int b = 0; b < g.dim(); ++b) {
            if (b == a) continue;
            const int lo_ab = std::min(a, b), hi_ab = std::max(a, b);
            const int slot = pair_slot(lo_ab, hi_ab);
            const double hb2 = g.h(b) * g.h(b);
            const int edges[2] = {idx[b], g.high_face(b, idx[b])};
            for (int eb : edges) {
              int e[3] = {i, j, k};
              e[b] = eb;
              if (!interior_edge(g, a, b, e)) continue;
              v += edge_coef[slot][g.edge_index(lo_ab, hi_ab, e[0], e[1], e[2])] / (2.0 * hb2);
            }
          }
          d.comp[a][f] = v;
        }
  }
  return d;
}

VectorField solve_momentum(const MomentumSystem& sys, const VectorField& rhs,
                           const VectorField& guess, double tol, int max_iter) {
  VectorField xin(sys.grid), yout(sys.grid);
  auto apply = [&](const krylov::Vector& x, krylov::Vector& y) {
    unflatten(x, xin);
    sys.apply(xin, yout);
    y = flatten(yout);
  };
  krylov::Vector b = flatten(rhs);
  krylov::Vector x = flatten(guess);
  // Rescale by a power of two so that tiny states do not underflow in the
  // Krylov inner products; exact in binary arithmetic.
  const double bmax = krylov::norm_inf(b);
  const int shift = bmax > 0.0 ? -std::ilogb(bmax) : 0;
  for (double& v : b) v = std::ldexp(v, shift);
  for (double& v : x) v = std::ldexp(v, shift);
  krylov::Vector inv = flatten(sys.diagonal());
  for (double& v : inv) v = 1.0 / v;
  const double bnorm = krylov::norm2(b);
  VectorField out(sys.grid);
  if (bnorm == 0.0) return out;
  const double target = tol * bnorm;
  const auto res = sys.convection ? krylov::bicgstab(apply, b, x, inv, target, max_iter)
                                 : krylov::conjugate_gradient(apply, b, x, inv, target, max_iter);
  if (!res.converged) {
    // Near the round-off floor accept a small backward error:
    // ||r|| <= tol (||b|| + ||A|| ||x||), with ||A|| bounded by twice the largest diagonal entry.
    double amax = 0.0;
    for (double v : inv) amax = std::max(amax, 1.0 / v);
    const double backward = tol * (bnorm + 2.0 * amax * krylov::norm2(x));
    if (!(res.residual <= backward))
      throw SolverError("momentum solve did not converge (target " + fmt_g(target) + ")", res.residual,
                        res.iterations);
  }
  for (double& v : x) v = std::ldexp(v, -shift);
  unflatten(x, out);
  out.apply_wall_constraint();
  return out;
}

// ---------------------------------------------------------------------------
// Predictor

std::vector<double> plastic_coefficient(const VectorField& v_lag, const ScalarField& p_f,
                                        const ForcingSpec& forcing, const MaterialParams& params,
                                        double t) {
  const StaggeredGrid& g = v_lag.grid;
  const SymTensorField D = sym_gradient(v_lag);
  std::vector<double> mu(g.num_cells(), 0.0);
  if (params.q_star == 0.0) return mu;
  for (int k = 0; k < g.n(2); ++k)
    for (int j = 0; j < g.n(1); ++j)
      for (int i = 0; i < g.n(0); ++i) {
        const std::size_t c = g.cell_index(i, j, k);
        const double tau = yield_stress(forcing.p_s(t, g.cell_center(i, j, k)), p_f.values[c], params.q_star);
        if (tau == 0.0) continue;
        mu[c] = tau / (D.at_cell(i, j, k).norm() + params.epsilon);
      }
  return mu;
}

std::array<std::vector<double>, 3> plastic_edge_coefficient(const VectorField& v_lag, const ScalarField& p_f,
                                                            const ForcingSpec& forcing,
                                                            const MaterialParams& params, double t) {
  const StaggeredGrid& g = v_lag.grid;
  std::array<std::vector<double>, 3> out;
  for (int a = 0; a < g.dim(); ++a)
    for (int b = a + 1; b < g.dim(); ++b) out[pair_slot(a, b)].assign(g.num_edges(a, b), 0.0);
  if (params.q_star == 0.0) return out;

  const SymTensorField D = sym_gradient(v_lag);
  std::vector<double> tau(g.num_cells());
  std::vector<SymTensor> Dc(g.num_cells());
  for (int k = 0; k < g.n(2); ++k)
    for (int j = 0; j < g.n(1); ++j)
      for (int i = 0; i < g.n(0); ++i) {
        const std::size_t c = g.cell_index(i, j, k);
        tau[c] = yield_stress(forcing.p_s(t, g.cell_center(i, j, k)), p_f.values[c], params.q_star);
        Dc[c] = D.at_cell(i, j, k);
      }

  for (int a = 0; a < g.dim(); ++a)
    for (int b = a + 1; b < g.dim(); ++b) {
      const int slot = pair_slot(a, b);
      const auto s = g.edge_shape(a, b);
      for (int k = 0; k < s[2]; ++k)
        for (int j = 0; j < s[1]; ++j)
          for (int i = 0; i < s[0]; ++i) {
            const int e[3] = {i, j, k};
            if (!interior_edge(g, a, b, e)) continue;
            double tau_sum = 0.0, rest = 0.0;
            for (int p = 0; p < 2; ++p)
              for (int q = 0; q < 2; ++q) {
                int c[3] = {i, j, k};
                c[a] = g.wrap_cell(a, e[a] - 1 + p);
                c[b] = g.wrap_cell(b, e[b] - 1 + q);
                const std::size_t ci = g.cell_index(c[0], c[1], c[2]);
                const double n = Dc[ci].norm();
                const double dab = Dc[ci](a, b);
                tau_sum += tau[ci];
                rest += std::max(n * n - 2.0 * dab * dab, 0.0);
              }
            const double tau_e = 0.25 * tau_sum;
            if (tau_e == 0.0) continue;
            const std::size_t ei = g.edge_index(a, b, i, j, k);
            const double dab = D.off[slot][ei];
            const double norm_e = std::sqrt(0.25 * rest + 2.0 * dab * dab);
            out[slot][ei] = tau_e / (norm_e + params.epsilon);
          }
    }
  return out;
}

VectorField advecting_velocity(const VectorField& v, std::optional<double> truncation_n) {
  if (!truncation_n) return v;
  const StaggeredGrid& g = v.grid;
  VectorField w = v;
  const double n = *truncation_n;
  for (int a = 0; a < g.dim(); ++a) {
    for_interior_faces(g, a, [&](int i, int j, int k) {
      const int idx[3] = {i, j, k};
      const std::size_t f = g.face_index(a, i, j, k);
      double s2 = v.comp[a][f] * v.comp[a][f];
      for (int c = 0; c < g.dim(); ++c) {
        if (c == a) continue;
        // four c-faces around the a-face
        const int acells[2] = {g.wrap_cell(a, idx[a] - 1), idx[a]};
        double sum = 0.0;
        for (int p = 0; p < 2; ++p)
          for (int q = 0; q < 2; ++q) {
            int ff[3] = {i, j, k};
            ff[a] = acells[p];
            ff[c] = q == 0 ? idx[c] : g.high_face(c, idx[c]);
            sum += v.comp[c][g.face_index(c, ff[0], ff[1], ff[2])];
          }
        s2 += 0.0625 * sum * sum;
      }
      w.comp[a][f] = convection_cutoff(s2, n) * v.comp[a][f];
    });
  }
  return w;
}

PredictorResult momentum_predictor(const SimulationState& state, const VectorField& v_lag,
                                   const ForcingSpec& forcing, const MaterialParams& params,
                                   const SolverConfig& cfg, double dt) {
  const StaggeredGrid& g = state.v.grid;
  const double t1 = state.t + dt;
  const double rho = params.rho_star;

  MomentumSystem sys;
  sys.grid = g;
  sys.mass = rho / dt;
  sys.rho = rho;
  const std::vector<double> mu = plastic_coefficient(v_lag, state.p_f, forcing, params, t1);
  const auto mu_e = plastic_edge_coefficient(v_lag, state.p_f, forcing, params, t1);
  sys.cell_coef.resize(mu.size());
  for (std::size_t c = 0; c < mu.size(); ++c) sys.cell_coef[c] = 2.0 * params.nu_star + mu[c];
  sys.edge_coef = mu_e;
  for (auto& e : sys.edge_coef)
    for (double& x : e) x += 2.0 * params.nu_star;

  PredictorResult out;
  out.wall = enforce_slip(v_lag, params, forcing, t1, &mu);
  sys.drag = out.wall.drag;
  if (cfg.convection) sys.convection = convection_matrix(advecting_velocity(state.v, cfg.convection_truncation_n));

  VectorField rhs(g);
  const VectorField b = sample_faces(g, forcing.body_force, t1);
  for (int a = 0; a < g.dim(); ++a)
    for_interior_faces(g, a, [&](int i, int j, int k) {
      const std::size_t f = g.face_index(a, i, j, k);
      rhs.comp[a][f] = sys.mass * state.v.comp[a][f] + rho * b.comp[a][f] + out.wall.drag_rhs.comp[a][f];
    });

  out.v_star = solve_momentum(sys, rhs, v_lag, cfg.linear_tol, cfg.max_linear_iters);

  const SymTensorField D = sym_gradient(out.v_star);
  out.Z = SymTensorField(g);
  for (int a = 0; a < g.dim(); ++a)
    for (std::size_t c = 0; c < mu.size(); ++c) out.Z.diag[a][c] = mu[c] * D.diag[a][c];
  for (int a = 0; a < g.dim(); ++a)
    for (int b2 = a + 1; b2 < g.dim(); ++b2) {
      const int slot = pair_slot(a, b2);
      for (std::size_t e = 0; e < mu_e[slot].size(); ++e) out.Z.off[slot][e] = mu_e[slot][e] * D.off[slot][e];
    }
  return out;
}

PredictorResult momentum_predictor(const SimulationState& state, const ForcingSpec& forcing,
                                   const MaterialParams& params, const SolverConfig& cfg, double dt) {
  return momentum_predictor(state, state.v, forcing, params, cfg, dt);
}

// ---------------------------------------------------------------------------
// Projection

ProjectionResult project(const VectorField& v_star, double rho_star, double dt, double tol) {
  const StaggeredGrid& g = v_star.grid;
  ScalarField rhs = divergence(v_star);
  for (double& x : rhs.values) x *= -rho_star / dt;
  // -Lap q = rhs; the divergence defect after correction is (dt/rho) times the
  // Poisson residual, bounded in the max norm by its 2-norm.
  const double abs_tol = 0.5 * tol * rho_star / dt;
  const PoissonResult pr = neumann_laplacian_solve(rhs, 0.0, 100000, abs_tol, false);
  ProjectionResult out;
  out.q = pr.solution;
  out.iterations = pr.iterations;
  out.v = v_star;
  const VectorField gq = gradient(out.q);
  axpy(-dt / rho_star, gq, out.v);
  out.v.apply_wall_constraint();
  const ScalarField div = divergence(out.v);
  double worst = 0.0;
  for (double x : div.values) worst = std::max(worst, std::abs(x));
  if (!(worst <= tol))
    throw SolverError("projection left divergence " + fmt_g(worst) + " above tolerance " + fmt_g(tol), worst,
                      pr.iterations);
  (void)g;
  return out;
}

// ---------------------------------------------------------------------------
// Pore pressure

ScalarField pore_pressure_source(const VectorField& v, const ForcingSpec& forcing, double t) {
  const StaggeredGrid& g = v.grid;
  ScalarField src(g);
  if (!forcing.source && !forcing.solid_pressure) return src;
  const auto vc = cell_velocities(v);
  std::vector<Vec3> grad(g.num_cells(), Vec3{});
  if (forcing.solid_pressure_gradient) {
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
      const auto ijk = g.cell_ijk(c);
      grad[c] = forcing.solid_pressure_gradient(t, g.cell_center(ijk[0], ijk[1], ijk[2]));
    }
  } else if (forcing.solid_pressure) {
    const VectorField gp = gradient(sample_cells(g, forcing.solid_pressure, t));
    grad = cell_velocities(gp);
  }
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    const auto ijk = g.cell_ijk(c);
    src.values[c] = forcing.g(t, g.cell_center(ijk[0], ijk[1], ijk[2])) + dot(vc[c], grad[c]);
  }
  return src;
}

ScalarField pore_pressure_step(const SimulationState& state, const VectorField& v,
                               const ForcingSpec& forcing, const MaterialParams& params, double dt) {
  const ScalarField src = pore_pressure_source(v, forcing, state.t + dt);
  return advect_diffuse_step(state.p_f, v, params.K, src, dt);
}

// ---------------------------------------------------------------------------
// Stepping

double choose_dt(const VectorField& v, const SolverConfig& cfg) {
  const StaggeredGrid& g = v.grid;
  double rate = 0.0;
  for (int a = 0; a < g.dim(); ++a) {
    double m = 0.0;
    for (double x : v.comp[a]) m = std::max(m, std::abs(x));
    rate += m / g.h(a);
  }
  if (rate == 0.0) return cfg.dt_initial;
  return std::min(cfg.dt_initial, cfg.cfl_target / rate);
}

SimulationState initial_state(const StaggeredGrid& g, const ForcingSpec::VectorFn& v0,
                              const ForcingSpec::ScalarFn& p0, double projection_tol) {
  SimulationState s;
  s.t = 0.0;
  s.v = sample_faces(g, v0, 0.0);
  const ProjectionResult pr = project(s.v, 1.0, 1.0, projection_tol);
  s.v = pr.v;
  s.p = pr.q;
  s.p_f = sample_cells(g, p0, 0.0);
  s.Z = SymTensorField(g);
  s.v_star = s.v;
  s.wall.drag = VectorField(g);
  s.wall.drag_rhs = VectorField(g);
  return s;
}

SimulationState step_with_dt(const SimulationState& state, const ForcingSpec& forcing,
                             const MaterialParams& params, const SolverConfig& cfg, double dt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw EvaluationError("step: dt must be positive and finite");
  VectorField v_lag = state.v;
  PredictorResult pred;
  ProjectionResult proj;
  for (int it = 0; it < cfg.picard_iters; ++it) {
    pred = momentum_predictor(state, v_lag, forcing, params, cfg, dt);
    proj = project(pred.v_star, params.rho_star, dt, cfg.projection_tol);
    double change = 0.0;
    for (int a = 0; a < proj.v.grid.dim(); ++a)
      for (std::size_t f = 0; f < proj.v.comp[a].size(); ++f)
        change = std::max(change, std::abs(proj.v.comp[a][f] - v_lag.comp[a][f]));
    v_lag = proj.v;
    pred.iterations = it + 1;
    if (change <= cfg.picard_tol * std::max(1.0, proj.v.max_abs())) break;
  }
  if (!proj.v.all_finite() || !proj.q.all_finite())
    throw SolverError("non-finite velocity or pressure", std::numeric_limits<double>::infinity(), pred.iterations);

  // Sub-cycle the explicit upwind transport when the step exceeds its Courant limit.
  const double courant = upwind_courant(proj.v, dt);
  int m = std::max(1, int(std::ceil(courant)));
  while (upwind_courant(proj.v, dt / m) > 1.0) ++m;
  SimulationState sub = state;
  const double h = dt / m;
  for (int s = 0; s < m; ++s) {
    sub.p_f = pore_pressure_step(sub, proj.v, forcing, params, h);
    sub.t = state.t + (s + 1) * h;
  }
  if (!sub.p_f.all_finite())
    throw SolverError("non-finite pore pressure", std::numeric_limits<double>::infinity(), m);

  SimulationState next;
  next.t = state.t + dt;
  next.step_index = state.step_index + 1;
  next.v = std::move(proj.v);
  next.p = std::move(proj.q);
  next.p_f = std::move(sub.p_f);
  next.Z = std::move(pred.Z);
  next.v_star = std::move(pred.v_star);
  next.wall = std::move(pred.wall);
  next.last_dt = dt;
  next.pf_substeps = m;
  return next;
}

SimulationState step(const SimulationState& state, const ForcingSpec& forcing,
                     const MaterialParams& params, const SolverConfig& cfg) {
  return step_with_dt(state, forcing, params, cfg, choose_dt(state.v, cfg));
}

// ---------------------------------------------------------------------------
// Darcy post-process

VectorField darcy_velocity(const SimulationState& state, const DarcyParams& darcy,
                           const ForcingSpec& forcing) {
  darcy.validate();
  const StaggeredGrid& g = state.v.grid;
  const VectorField gp = gradient(state.p_f);
  const VectorField b = sample_faces(g, forcing.body_force, state.t);
  const double c = darcy.k0 / (darcy.phi0 * darcy.mu_f);
  VectorField out = state.v;
  for (int a = 0; a < g.dim(); ++a)
    for_interior_faces(g, a, [&](int i, int j, int k) {
      const std::size_t f = g.face_index(a, i, j, k);
      out.comp[a][f] -= c * (gp.comp[a][f] - darcy.rho_f * b.comp[a][f]);
    });
  return out;
}

}  // namespace pbingham
