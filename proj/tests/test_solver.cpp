#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pbingham/diagnostics.hpp"
#include "pbingham/errors.hpp"
#include "pbingham/solver.hpp"

using namespace pbingham;

namespace {

constexpr double pi = std::numbers::pi;

ForcingSpec constant_ps(double ps) {
  ForcingSpec f;
  f.solid_pressure = [ps](double, const Vec3&) { return ps; };
  f.solid_pressure_gradient = [](double, const Vec3&) { return Vec3{}; };
  return f;
}

double max_diff(const VectorField& a, const VectorField& b) {
  double m = 0.0;
  for (int c = 0; c < a.grid.dim(); ++c)
    for (std::size_t f = 0; f < a.comp[c].size(); ++f) m = std::max(m, std::abs(a.comp[c][f] - b.comp[c][f]));
  return m;
}

ForcingSpec::VectorFn vortex(double A) {
  return [A](double, const Vec3& x) {
    return Vec3{A * std::sin(pi * x[0]) * std::cos(pi * x[1]), -A * std::cos(pi * x[0]) * std::sin(pi * x[1]), 0.0};
  };
}

}  // namespace

TEST_CASE("solver configuration validation") {
  SolverConfig c;
  CHECK_NOTHROW(c.validate());
  c.cfl_target = 1.5;
  CHECK_THROWS(c.validate());
  c = SolverConfig{};
  c.picard_iters = 0;
  CHECK_THROWS(c.validate());
  c = SolverConfig{};
  c.convection_truncation_n = -1.0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("rest state is a fixed point") {
  const StaggeredGrid g = StaggeredGrid::box(2, {8, 8, 1}, {1.0, 1.0, 1.0});
  const MaterialParams p;
  const ForcingSpec f = constant_ps(1.0);
  SimulationState s = initial_state(g, {}, {}, 1e-10);
  for (int n = 0; n < 5; ++n) s = step(s, f, p, SolverConfig{});
  CHECK(s.v.max_abs() == 0.0);
  CHECK(s.p_f.max() == 0.0);
  CHECK(s.p_f.min() == 0.0);
  CHECK(s.step_index == 5);
}

TEST_CASE("convection operator is skew-symmetric") {
  const StaggeredGrid g = StaggeredGrid::box(2, {9, 7, 1}, {1.0, 1.0, 1.0});
  const VectorField w = project(sample_faces(g, vortex(1.3), 0.0), 1.0, 1.0, 1e-12).v;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  VectorField x(g);
  for (int a = 0; a < 2; ++a)
    for (double& e : x.comp[a]) e = u(rng);
  x.apply_wall_constraint();
  VectorField y = x;
  for (int a = 0; a < 2; ++a)
    for (double& e : y.comp[a]) e = u(rng);
  y.apply_wall_constraint();
  const double xy = inner_faces(skew_convection(w, x), y);
  const double yx = inner_faces(skew_convection(w, y), x);
  CHECK(xy == doctest::Approx(-yx).epsilon(1e-12));
  CHECK(std::abs(inner_faces(skew_convection(w, x), x)) < 1e-13);

  VectorField out(g);
  convection_matrix(w).apply(x, out, 1.0);
  CHECK(max_diff(out, skew_convection(w, x)) < 1e-13);
}

TEST_CASE("stress divergence operator is symmetric and positive") {
  const StaggeredGrid g = StaggeredGrid::box(3, {5, 4, 3}, {1.0, 1.0, 1.0});
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  std::vector<double> cell(g.num_cells());
  for (double& c : cell) c = u(rng);
  std::array<std::vector<double>, 3> edge;
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      edge[pair_slot(a, b)].resize(g.num_edges(a, b));
      for (double& c : edge[pair_slot(a, b)]) c = u(rng);
    }
  auto random_field = [&] {
    VectorField v(g);
    for (int a = 0; a < 3; ++a)
      for (double& e : v.comp[a]) e = u(rng) - 1.25;
    v.apply_wall_constraint();
    return v;
  };
  const VectorField x = random_field(), y = random_field();
  const double xy = inner_faces(stress_divergence_operator(cell, edge, x), y);
  const double yx = inner_faces(stress_divergence_operator(cell, edge, y), x);
  CHECK(xy == doctest::Approx(yx).epsilon(1e-12));
  CHECK(inner_faces(stress_divergence_operator(cell, edge, x), x) > 0.0);
}

TEST_CASE("projection") {
  const StaggeredGrid g = StaggeredGrid::box(2, {16, 16, 1}, {1.0, 1.0, 1.0});

  SUBCASE("divergence-free input is unchanged") {
    const VectorField v0 = project(sample_faces(g, vortex(1.0), 0.0), 1.0, 1.0, 1e-12).v;
    const ProjectionResult r = project(v0, 2.0, 0.1, 1e-10);
    CHECK(max_diff(r.v, v0) < 1e-11);
    for (double q : r.q.values) CHECK(std::abs(q) < 1e-9);
  }

  SUBCASE("gradient input is removed") {
    // psi = cos(pi x) cos(pi y) has zero normal derivative on the walls
    ScalarField psi(g);
    for (int j = 0; j < 16; ++j)
      for (int i = 0; i < 16; ++i) {
        const Vec3 x = g.cell_center(i, j, 0);
        psi.at(i, j, 0) = std::cos(pi * x[0]) * std::cos(pi * x[1]);
      }
    const double rho = 2.0, dt = 0.1;
    const ProjectionResult r = project(gradient(psi), rho, dt, 1e-10);
    CHECK(r.v.max_abs() < 1e-9);
    for (std::size_t c = 0; c < psi.values.size(); ++c)
      CHECK(r.q.values[c] == doctest::Approx(rho / dt * psi.values[c]).epsilon(1e-8));
  }

  SUBCASE("random input becomes solenoidal") {
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    VectorField v(g);
    for (int a = 0; a < 2; ++a)
      for (double& e : v.comp[a]) e = u(rng);
    v.apply_wall_constraint();
    const ProjectionResult r = project(v, 1.0, 0.01, 1e-10);
    CHECK(divergence_inf(r.v) <= 1e-10);
  }
}

TEST_CASE("wall closure") {
  const StaggeredGrid g = StaggeredGrid::box(2, {4, 4, 1}, {1.0, 1.0, 1.0});
  MaterialParams p;
  p.s_star = 0.8;
  p.gamma_star = 1.5;
  p.epsilon = 1e-3;

  SUBCASE("stick state") {
    const WallClosure w = enforce_slip(VectorField(g), p, ForcingSpec{}, 0.0);
    // tangential faces next to the walls, corners excluded
    CHECK(w.sites.size() == 12);
    for (std::size_t n = 0; n < w.sites.size(); ++n) {
      CHECK(w.friction[n] == doctest::Approx(p.s_star / p.epsilon + p.gamma_star));
      CHECK(norm(wall_traction(w, n, VectorField(g))) == 0.0);
    }
  }

  SUBCASE("Navier slip limit") {
    MaterialParams q = p;
    q.s_star = 1e-300;
    VectorField v(g);
    for (double& e : v.comp[0]) e = 0.3;
    v.apply_wall_constraint();
    const WallClosure w = enforce_slip(v, q, ForcingSpec{}, 0.0);
    for (std::size_t n = 0; n < w.sites.size(); ++n) {
      CHECK(w.friction[n] == doctest::Approx(q.gamma_star));
      const double k = w.conductance[n];
      CHECK(w.coef[n] == doctest::Approx(q.gamma_star * k / (q.gamma_star + k)));
    }
  }

  SUBCASE("slip speed solves the half-cell balance") {
    std::mt19937_64 rng(14);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int n = 0; n < 1000; ++n) {
      const double gap = 3.0 * u(rng), k = 0.1 + 50.0 * u(rng);
      MaterialParams q = p;
      q.epsilon = std::pow(10.0, -3.0 * u(rng));
      const double w = wall_slip_speed(gap, k, q);
      CHECK(w >= 0.0);
      CHECK(w <= gap);
      const double lhs = k * (gap - w);
      const double rhs = q.s_star * w / (w + q.epsilon) + q.gamma_star * w;
      CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, lhs));
    }
  }

  SUBCASE("traction under imposed shear matches the regularized law") {
    VectorField v(g);
    for (double& e : v.comp[0]) e = 0.25;
    v.apply_wall_constraint();
    const WallClosure w = enforce_slip(v, p, ForcingSpec{}, 0.0);
    for (std::size_t n = 0; n < w.sites.size(); ++n) {
      const WallSite& s = w.sites[n];
      const Vec3 slip = wall_slip_velocity(v, s, Vec3{}, w.conductance[n], p);
      const double sl = norm(slip);
      const double law = p.s_star * sl / (sl + p.epsilon) + p.gamma_star * sl;
      CHECK(norm(wall_traction(w, n, v)) == doctest::Approx(law).epsilon(1e-10));
    }
  }

  SUBCASE("moving wall") {
    ForcingSpec f;
    f.wall_velocity = [](double, const Vec3& x) { return x[1] > 0.99 ? Vec3{1.0, 0.0, 0.0} : Vec3{}; };
    const WallClosure w = enforce_slip(VectorField(g), p, f, 0.0);
    double total = 0.0;
    for (std::size_t n = 0; n < w.sites.size(); ++n) total += w.wall_velocity[n][0];
    CHECK(total == doctest::Approx(3.0));
  }
}

TEST_CASE("momentum predictor") {
  const StaggeredGrid g = StaggeredGrid::box(2, {8, 8, 1}, {1.0, 1.0, 1.0});
  MaterialParams p;
  SolverConfig cfg;

  SUBCASE("zero data, zero velocity") {
    const SimulationState s = initial_state(g, {}, {}, 1e-10);
    const PredictorResult r = momentum_predictor(s, constant_ps(0.0), p, cfg, 0.01);
    CHECK(r.v_star.max_abs() == 0.0);
  }

  SUBCASE("creep speed scales with eps") {
    ForcingSpec f = constant_ps(10.0);
    f.body_force = [](double, const Vec3&) { return Vec3{1.0, 0.0, 0.0}; };
    double prev = 0.0;
    for (double eps : {4e-3, 2e-3, 1e-3}) {
      p.epsilon = eps;
      SimulationState s = initial_state(g, {}, {}, 1e-10);
      for (int n = 0; n < 20; ++n) s = step_with_dt(s, f, p, cfg, 0.05);
      const double u = s.v.max_abs();
      if (prev > 0.0) {
        CHECK(prev / u >= 1.6);
        CHECK(prev / u <= 2.4);
      }
      prev = u;
    }
  }
}

TEST_CASE("Newtonian limit matches a constant-viscosity integrator") {
  const StaggeredGrid g = StaggeredGrid::box(3, {16, 16, 16}, {1.0, 1.0, 1.0});
  MaterialParams p;
  p.q_star = 0.0;
  ForcingSpec f = constant_ps(1.0);
  f.body_force = [](double, const Vec3& x) { return Vec3{std::cos(pi * x[1]), 0.0, 0.2 * std::sin(pi * x[0])}; };
  const SolverConfig cfg;
  SimulationState a = initial_state(g, vortex(0.5), {}, 1e-10);
  SimulationState b = a;
  for (int n = 0; n < 10; ++n) {
    const double dt = choose_dt(a.v, cfg);
    a = step_with_dt(a, f, p, cfg, dt);
    b = testing::newtonian_step(b, f, p, cfg, dt);
  }
  CHECK(max_diff(a.v, b.v) <= 1e-8);
  CHECK(a.v.max_abs() > 0.05);
}

TEST_CASE("pore pressure") {
  const StaggeredGrid g = StaggeredGrid::box(2, {16, 16, 1}, {1.0, 1.0, 1.0});
  MaterialParams p;
  const ForcingSpec f = constant_ps(1.0);

  SUBCASE("diffusion at rest decreases the maximum") {
    SimulationState s = initial_state(g, {}, [](double, const Vec3& x) { return std::exp(-20.0 * x[0] * x[0]); }, 1e-10);
    double prev = s.p_f.max();
    for (int n = 0; n < 10; ++n) {
      s = step_with_dt(s, f, p, SolverConfig{}, 0.01);
      CHECK(s.p_f.max() < prev);
      prev = s.p_f.max();
    }
  }

  SUBCASE("advection alone keeps extrema") {
    p.K = 0.0;
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    SimulationState s = initial_state(g, vortex(1.0), {}, 1e-10);
    for (double& x : s.p_f.values) x = u(rng);
    const double lo = s.p_f.min(), hi = s.p_f.max();
    for (int n = 0; n < 20; ++n) {
      s.p_f = pore_pressure_step(s, s.v, f, p, 0.01);
      s.t += 0.01;
    }
    CHECK(s.p_f.max() <= hi + 1e-14);
    CHECK(s.p_f.min() >= lo - 1e-14);
  }

  SUBCASE("heat solution converges") {
    auto err = [&](int n, double dt) {
      const StaggeredGrid gn = StaggeredGrid::box(2, {n, 4, 1}, {1.0, 1.0, 1.0});
      SimulationState s = initial_state(gn, {}, [](double, const Vec3& x) { return std::cos(pi * x[0]); }, 1e-10);
      const double T = 0.05;
      const int steps = int(std::lround(T / dt));
      for (int k = 0; k < steps; ++k) s.p_f = pore_pressure_step(s, s.v, f, p, dt), s.t += dt;
      double e = 0.0;
      for (std::size_t c = 0; c < gn.num_cells(); ++c) {
        const auto ijk = gn.cell_ijk(c);
        const double ex = std::cos(pi * gn.cell_center(ijk[0], ijk[1], 0)[0]) * std::exp(-pi * pi * T);
        e += (s.p_f.values[c] - ex) * (s.p_f.values[c] - ex) * gn.cell_volume();
      }
      return std::sqrt(e);
    };
    // dt ~ h^2 so both error terms shrink by 4
    const double e1 = err(8, 1e-3), e2 = err(16, 2.5e-4);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
  }

  SUBCASE("large steps sub-cycle the transport") {
    SimulationState s = initial_state(g, vortex(4.0), {}, 1e-10);
    s = step_with_dt(s, f, p, SolverConfig{}, 0.05);
    CHECK(s.pf_substeps > 1);
  }
}

TEST_CASE("time step choice") {
  const StaggeredGrid g = StaggeredGrid::box(2, {10, 10, 1}, {1.0, 1.0, 1.0});
  SolverConfig cfg;
  CHECK(choose_dt(VectorField(g), cfg) == cfg.dt_initial);
  VectorField v(g);
  for (double& x : v.comp[0]) x = 5.0;
  v.apply_wall_constraint();
  CHECK(choose_dt(v, cfg) == doctest::Approx(cfg.cfl_target * 0.1 / 5.0));
  CHECK_THROWS_AS(step_with_dt(initial_state(g, {}, {}, 1e-10), ForcingSpec{}, MaterialParams{}, cfg, -1.0),
                  EvaluationError);
}

TEST_CASE("Darcy post-process") {
  const StaggeredGrid g = StaggeredGrid::box(2, {8, 8, 1}, {1.0, 1.0, 1.0});
  DarcyParams d;
  SimulationState s = initial_state(g, {}, [](double, const Vec3& x) { return 3.0 * x[0]; }, 1e-10);
  const VectorField vf = darcy_velocity(s, d, ForcingSpec{});
  const double c = d.k0 / (d.phi0 * d.mu_f);
  // interior x faces carry the uniform gradient
  CHECK(vf.at(0, 4, 3, 0) == doctest::Approx(-3.0 * c));
  CHECK(vf.at(1, 4, 3, 0) == doctest::Approx(0.0));

  DarcyParams d2 = d;
  d2.k0 *= 2.0;
  CHECK(darcy_velocity(s, d2, ForcingSpec{}).at(0, 4, 3, 0) == doctest::Approx(2.0 * vf.at(0, 4, 3, 0)));

  // hydrostatic balance: grad p_f = rho_f b
  ForcingSpec f;
  f.body_force = [](double, const Vec3&) { return Vec3{3.0 / 1e3, 0.0, 0.0}; };
  s.v = sample_faces(g, [](double, const Vec3&) { return Vec3{0.0, 0.0, 0.0}; }, 0.0);
  CHECK(std::abs(darcy_velocity(s, d, f).at(0, 4, 3, 0)) < 1e-20);

  d.phi0 = 1.5;
  CHECK_THROWS(darcy_velocity(s, d, f));
}
