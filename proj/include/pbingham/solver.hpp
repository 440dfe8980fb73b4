#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "pbingham/constitutive.hpp"
#include "pbingham/grid.hpp"

namespace pbingham {

/// Time-dependent data. Empty callables evaluate to zero.
struct ForcingSpec {
  using VectorFn = std::function<Vec3(double t, const Vec3& x)>;
  using ScalarFn = std::function<double(double t, const Vec3& x)>;

  VectorFn body_force;               ///< b [m/s^2]
  ScalarFn source;                   ///< g [Pa/s]
  ScalarFn solid_pressure;           ///< p_s [Pa]
  VectorFn solid_pressure_gradient;  ///< analytic grad p_s; grid gradient when empty
  VectorFn wall_velocity;            ///< tangential wall motion (moving lids) [m/s]

  Vec3 b(double t, const Vec3& x) const { return body_force ? body_force(t, x) : Vec3{}; }
  double g(double t, const Vec3& x) const { return source ? source(t, x) : 0.0; }
  double p_s(double t, const Vec3& x) const { return solid_pressure ? solid_pressure(t, x) : 0.0; }
  Vec3 wall_v(double t, const Vec3& x) const { return wall_velocity ? wall_velocity(t, x) : Vec3{}; }
};

/// Parameters of the interstitial-fluid post-process.
struct DarcyParams {
  double phi0 = 0.05;  ///< reference porosity in (0, 1)
  double mu_f = 1e-3;  ///< fluid viscosity [Pa s]
  double k0 = 1e-10;   ///< permeability [m^2]
  double rho_f = 1e3;  ///< fluid material density [kg/m^3]

  void validate() const;
};

struct SolverConfig {
  double dt_initial = 1e-2;    ///< upper bound on the step [s]
  double cfl_target = 0.5;     ///< in (0, 1)
  int picard_iters = 2;        ///< sweeps per step, >= 1
  double picard_tol = 1e-10;   ///< early exit on ||v_k+1 - v_k||_inf / max(1, ||v||_inf)
  double projection_tol = 1e-10;  ///< bound on ||div v||_inf after projection
  double linear_tol = 1e-12;   ///< relative residual for momentum and diffusion solves
  int max_linear_iters = 20000;
  std::optional<double> convection_truncation_n;  ///< G_n cutoff; nullopt = off
  bool convection = true;
  double end_time = 1.0;

  void validate() const;
};

/// Tangential wall site: one tangential velocity component on the face row
/// adjacent to a wall. The traction acts on that face as a boundary flux.
struct WallSite {
  int wall_axis = 0;       ///< axis normal to the wall
  int side = 0;            ///< 0 = low wall, 1 = high wall
  int component = 0;       ///< tangential velocity component carried by the site
  std::size_t face = 0;    ///< face index of that component
  Vec3 position{};         ///< projection of the face center onto the wall
};

/// Lagged stick-slip closure. Each site couples the first interior tangential
/// face (distance h/2 from the wall) to the wall through a half-cell viscous
/// layer of conductance k = (2 nu* + mu) / h in series with the friction law
/// f = s* / (|w| + eps) + gamma*, w the wall slip velocity relative to U.
/// The face sees the traction coef (v - U) with coef = f k / (f + k).
struct WallClosure {
  std::vector<WallSite> sites;
  std::vector<double> coef;          ///< per site, effective [Pa s/m]
  std::vector<double> friction;      ///< per site f [Pa s/m]
  std::vector<double> conductance;   ///< per site k [Pa s/m]
  std::vector<Vec3> wall_velocity;   ///< per site U
  VectorField drag;                  ///< per face: sum over sites coef / h_wall
  VectorField drag_rhs;              ///< per face: sum over sites coef U_component / h_wall
};

/// Enumerates tangential wall sites of a grid (periodic axes carry none).
std::vector<WallSite> wall_sites(const StaggeredGrid& g);

/// Tangential velocity at a site relative to the wall velocity U; in 3D the
/// second tangential component is averaged from the four nearest faces.
Vec3 site_tangential_velocity(const VectorField& v, const WallSite& s, const Vec3& U);

/// Slip speed w in [0, gap] solving k (gap - w) = (s* / (w + eps) + gamma*) w,
/// i.e. the wall value behind a half-cell layer of conductance k.
double wall_slip_speed(double gap, double conductance, const MaterialParams& params);

/// Slip velocity at a site: the tangential velocity relative to U scaled by
/// wall_slip_speed / |v - U|.
Vec3 wall_slip_velocity(const VectorField& v, const WallSite& s, const Vec3& U, double conductance,
                        const MaterialParams& params);

/// Builds the lagged wall closure from v_lag at time t. cell_mu, when given,
/// is the plastic coefficient at cells (added to 2 nu* in the half-cell layer).
WallClosure enforce_slip(const VectorField& v_lag, const MaterialParams& params,
                         const ForcingSpec& forcing, double t,
                         const std::vector<double>* cell_mu = nullptr);

/// Traction vector s at a site given the closure and the current velocity.
Vec3 wall_traction(const WallClosure& closure, std::size_t site, const VectorField& v);

/// Skew-symmetric central convection C(w) as a sparse matrix per velocity
/// component (C couples a component only with itself).
struct ConvectionMatrix {
  StaggeredGrid grid;
  std::array<std::vector<std::size_t>, 3> row_start;
  std::array<std::vector<std::size_t>, 3> column;
  std::array<std::vector<double>, 3> value;

  /// out += scale C u.
  void apply(const VectorField& u, VectorField& out, double scale) const;
};

ConvectionMatrix convection_matrix(const VectorField& w);

/// Linear momentum operator on face unknowns:
///   mass v + rho C(w) v - div(coef D(v)) + drag v
/// with C the skew-symmetric central convection operator. Wall faces carry identity rows.
struct MomentumSystem {
  StaggeredGrid grid;
  double mass = 0.0;  ///< rho / dt
  double rho = 1.0;
  std::vector<double> cell_coef;                 ///< 2 nu* + mu at cells
  std::array<std::vector<double>, 3> edge_coef;  ///< 2 nu* + mu at edges (interior edges used)
  VectorField drag;
  std::optional<ConvectionMatrix> convection;

  void apply(const VectorField& x, VectorField& y) const;
  VectorField diagonal() const;
};

/// -div(coef D(v)) with coefficients at cells and edges; flux closure on walls
/// is handled separately by the drag term.
VectorField stress_divergence_operator(const std::vector<double>& cell_coef,
                                       const std::array<std::vector<double>, 3>& edge_coef,
                                       const VectorField& v);

/// C(w) u.
VectorField skew_convection(const VectorField& w, const VectorField& u);

/// Solves the momentum system (BiCGSTAB with convection, CG without).
VectorField solve_momentum(const MomentumSystem& sys, const VectorField& rhs,
                           const VectorField& guess, double tol, int max_iter);

struct SimulationState {
  double t = 0.0;
  long step_index = 0;
  VectorField v;
  ScalarField p;    ///< zero mean
  ScalarField p_f;
  /// Extra stress used by the last momentum predictor: mu D(v*) on cells and
  /// interior edges.
  SymTensorField Z;
  VectorField v_star;   ///< predictor of the last step
  WallClosure wall;     ///< closure of the last predictor
  double last_dt = 0.0;
  int pf_substeps = 0;
};

struct PredictorResult {
  VectorField v_star;
  SymTensorField Z;
  WallClosure wall;
  int iterations = 0;
};

/// Plastic coefficient mu = tau / (|D| + eps) at cells from the lagged velocity.
std::vector<double> plastic_coefficient(const VectorField& v_lag, const ScalarField& p_f,
                                        const ForcingSpec& forcing, const MaterialParams& params,
                                        double t);

/// Plastic coefficient tau_e / (|D|_e + eps) on interior edges (zero on boundary
/// edges). |D|_e takes the edge's own off-diagonal entry and the remaining
/// entries averaged over the four adjacent cells; tau_e is their mean tau.
std::array<std::vector<double>, 3> plastic_edge_coefficient(const VectorField& v_lag, const ScalarField& p_f,
                                                            const ForcingSpec& forcing,
                                                            const MaterialParams& params, double t);

/// Advecting velocity, optionally scaled by the cutoff G_n(|v|^2) face by face.
VectorField advecting_velocity(const VectorField& v, std::optional<double> truncation_n);

/// Momentum step without the new pressure, with coefficients lagged at v_lag.
PredictorResult momentum_predictor(const SimulationState& state, const VectorField& v_lag,
                                   const ForcingSpec& forcing, const MaterialParams& params,
                                   const SolverConfig& cfg, double dt);
PredictorResult momentum_predictor(const SimulationState& state, const ForcingSpec& forcing,
                                   const MaterialParams& params, const SolverConfig& cfg, double dt);

struct ProjectionResult {
  VectorField v;
  ScalarField q;  ///< zero-mean pressure
  int iterations = 0;
};

/// Solves -Lap_N q = -(rho/dt) div v*, sets v = v* - (dt/rho) grad q.
ProjectionResult project(const VectorField& v_star, double rho_star, double dt, double tol);

/// Cell source g + v.grad p_s at time t.
ScalarField pore_pressure_source(const VectorField& v, const ForcingSpec& forcing, double t);

/// Advances p_f by dt with velocity v (throws CflError from the upwind step).
ScalarField pore_pressure_step(const SimulationState& state, const VectorField& v,
                               const ForcingSpec& forcing, const MaterialParams& params, double dt);

/// dt = min(dt_initial, cfl_target / sum_a max|v_a| / h_a).
double choose_dt(const VectorField& v, const SolverConfig& cfg);

/// Initial state: v0 projected onto discretely solenoidal fields, p from that
/// projection, p_f = p0.
SimulationState initial_state(const StaggeredGrid& g, const ForcingSpec::VectorFn& v0,
                              const ForcingSpec::ScalarFn& p0, double projection_tol);

/// One accepted time step.
SimulationState step(const SimulationState& state, const ForcingSpec& forcing,
                     const MaterialParams& params, const SolverConfig& cfg);
/// Same with a prescribed dt (still subject to the pore-pressure CFL sub-cycling).
SimulationState step_with_dt(const SimulationState& state, const ForcingSpec& forcing,
                             const MaterialParams& params, const SolverConfig& cfg, double dt);

/// Interstitial velocity v_f = v - k0 / (phi0 mu_f) (grad p_f - rho_f b) on
/// interior faces; wall faces stay impermeable.
VectorField darcy_velocity(const SimulationState& state, const DarcyParams& darcy,
                           const ForcingSpec& forcing);

/// Face samples of a vector function (component a at faces normal to a).
VectorField sample_faces(const StaggeredGrid& g, const ForcingSpec::VectorFn& f, double t);
/// Cell samples of a scalar function.
ScalarField sample_cells(const StaggeredGrid& g, const ForcingSpec::ScalarFn& f, double t);

}  // namespace pbingham
