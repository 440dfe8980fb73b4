#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "pbingham/config.hpp"
#include "pbingham/run.hpp"
#include "pbingham/scenarios.hpp"

using namespace pbingham;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pbingham_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int simulate(const std::string& args, const fs::path& log) {
  const std::string cmd = std::string(SIMULATE_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

}  // namespace

TEST_CASE("empty configuration is the normalized default") {
  const RunConfig c = parse_config("");
  CHECK(c.scenario == "decay");
  CHECK(c.material.rho_star == 1.0);
  CHECK(2.0 * c.material.nu_star == 1.0);
  CHECK(c.material.gamma_star == 1.0);
  CHECK(c.material.K == 1.0);
  CHECK(c.material.q_star == 1.0);
  CHECK(c == scenario_defaults("decay"));
}

TEST_CASE("configuration errors name the line or key") {
  CHECK_THROWS_WITH_AS(parse_config("[material]\nq_star = -1\n"), doctest::Contains("q_star"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[material]\nbogus = 1\n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[grid]\nnx 12\n"), doctest::Contains("line 2"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[nowhere]\n"), doctest::Contains("line 1"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[grid]\nnx = twelve\n"), doctest::Contains("grid.nx"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[run]\nscenario = volcano\n"), doctest::Contains("volcano"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config("[solver]\ncfl_target = 2\n"), doctest::Contains("cfl_target"), ConfigError);
  CHECK_THROWS_AS(parse_config("q_star = 1\n"), ConfigError);
}

TEST_CASE("configuration syntax") {
  const RunConfig c = parse_config(
      "# comment\n[run]\nscenario = bingham_channel  # trailing\nseed = 42\n\n[grid]\nny = 32\n"
      "material.epsilon = 0.005\n[solver]\nconvection_truncation_n = 7.5\n");
  CHECK(c.scenario == "bingham_channel");
  CHECK(c.seed == 42);
  CHECK(c.grid.cells[1] == 32);
  CHECK(c.grid.cells[0] == 2);  // scenario default kept
  CHECK(c.material.epsilon == 0.005);
  REQUIRE(c.solver.convection_truncation_n.has_value());
  CHECK(*c.solver.convection_truncation_n == 7.5);
  CHECK(parse_config("[run]\nscenario = decay\n", std::string("rest")).scenario == "rest");
}

TEST_CASE("emit and parse round trip") {
  for (const auto& s : builtin_scenarios()) {
    RunConfig c = scenario_defaults(s.name);
    c.material.epsilon = 1.0 / 3.0;
    c.forcing.p_f0_noise = 0.1;
    c.seed = 12345678901ULL;
    c.output.directory = "out dir";
    c.solver.convection_truncation_n = 0.1 + 0.2;
    const std::string text = emit_config(c);
    const RunConfig back = parse_config(text);
    CHECK(back == c);
    CHECK(emit_config(back) == text);
  }
}

TEST_CASE("scenario list") {
  std::vector<std::string> names;
  for (const auto& s : builtin_scenarios()) names.push_back(s.name);
  for (const char* n : {"rest", "decay", "newtonian_cavity", "bingham_channel", "activation_box", "manufactured_pf"})
    CHECK(std::find(names.begin(), names.end(), n) != names.end());
}

TEST_CASE("run writes diagnostics, snapshots and summary") {
  const fs::path dir = scratch("channel");
  RunConfig c = scenario_defaults("bingham_channel");
  c.output.directory = dir.string();
  const RunResult r = run(c);
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(dir / "snapshot_000000.dat"));
  const fs::path last = dir / ("snapshot_000" + std::to_string(r.steps) + ".dat");
  REQUIRE(fs::exists(last));
  CHECK(fs::exists(dir / "summary.txt"));
  CHECK(slurp(dir / "summary.txt").rfind("status ok\n", 0) == 0);

  const std::string csv = slurp(dir / "diagnostics.csv");
  CHECK(csv.rfind("t,kinetic_energy,viscous_dissipation,plastic_dissipation,wall_dissipation,energy_residual,"
                  "div_residual_inf,pf_min,pf_max,max_r1_bulk,max_r2_bulk,max_r1_wall,max_r2_wall,plug_fraction\n",
                  0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == r.steps + 1);

  // plug half-width from the final snapshot
  std::istringstream in(slurp(last));
  int dim, nx, ny, nz;
  double hx, hy, hz, t;
  in >> dim >> nx >> ny >> nz >> hx >> hy >> hz >> t;
  CHECK(dim == 2);
  CHECK(nx == 2);
  CHECK(ny == 64);
  CHECK(t == doctest::Approx(10.0));
  int plug = 0, rows = 0;
  double x, y, u, v, p, pf, dn, zn;
  int mask;
  while (in >> x >> y >> u >> v >> p >> pf >> dn >> zn >> mask) {
    ++rows;
    plug += mask;
    CHECK(zn < 1.0);
  }
  CHECK(rows == nx * ny);
  const double half_width = 0.5 * hy * plug / nx;
  const testing::BinghamChannel exact{4.0, 1.0, 0.5, 1.0};
  CHECK(std::abs(half_width - exact.plug_half_width()) <= hy);
  fs::remove_all(dir);
}

TEST_CASE("snapshot cadence and Darcy output") {
  const fs::path dir = scratch("cadence");
  RunConfig c = scenario_defaults("decay");
  c.grid.cells = {8, 8, 1};
  c.max_steps = 6;
  c.output.snapshot_every = 2;
  c.output.directory = dir.string();
  c.darcy_enabled = true;
  REQUIRE(run(c).exit_code == 0);
  for (int s : {0, 2, 4, 6}) {
    char name[32];
    std::snprintf(name, sizeof name, "snapshot_%06d.dat", s);
    CHECK(fs::exists(dir / name));
    std::snprintf(name, sizeof name, "darcy_%06d.dat", s);
    CHECK(fs::exists(dir / name));
  }
  CHECK_FALSE(fs::exists(dir / "snapshot_000001.dat"));
  fs::remove_all(dir);
}

TEST_CASE("activation raises pore pressure above p_s and unlocks the plug") {
  RunConfig c = scenario_defaults("activation_box");
  c.grid.dim = 2;
  c.grid.cells = {24, 24, 1};
  const RunResult r = run(c, false);
  REQUIRE(r.exit_code == 0);
  std::size_t cross = r.reports.size();
  for (std::size_t n = 0; n < r.reports.size(); ++n)
    if (r.reports[n].pf_max > c.forcing.p_s) {
      cross = n;
      break;
    }
  REQUIRE(cross < r.reports.size());
  CHECK(r.reports.front().plug_fraction == 1.0);
  CHECK(r.reports.back().plug_fraction < r.reports[cross].plug_fraction);
  for (std::size_t n = cross + 1; n < r.reports.size(); ++n)
    CHECK(r.reports[n].plug_fraction <= r.reports[cross].plug_fraction);
}

TEST_CASE("manufactured pore pressure converges") {
  auto err = [](int n, double dt) {
    RunConfig c = scenario_defaults("manufactured_pf");
    c.grid.cells = {n, 4, 1};
    c.solver.dt_initial = dt;
    const RunResult r = run(c, false);
    REQUIRE(r.exit_code == 0);
    const StaggeredGrid& g = r.final_state.p_f.grid;
    double e = 0.0;
    for (std::size_t k = 0; k < g.num_cells(); ++k) {
      const auto ijk = g.cell_ijk(k);
      const double d = r.final_state.p_f.values[k] -
                       manufactured_pf_exact(c, r.final_state.t, g.cell_center(ijk[0], ijk[1], ijk[2]));
      e += d * d * g.cell_volume();
    }
    return std::sqrt(e);
  };
  const double e1 = err(8, 1e-3), e2 = err(16, 2.5e-4), e3 = err(32, 6.25e-5);
  CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.15));
  CHECK(e2 / e3 == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("identical configurations give identical bytes") {
  const fs::path a = scratch("det_a"), b = scratch("det_b");
  RunConfig c = scenario_defaults("activation_box");
  c.grid.cells = {8, 8, 8};
  c.max_steps = 10;
  c.forcing.p_f0_noise = 0.1;
  c.output.snapshot_every = 5;
  c.output.directory = a.string();
  REQUIRE(run(c).exit_code == 0);
  c.output.directory = b.string();
  REQUIRE(run(c).exit_code == 0);
  for (const char* f : {"diagnostics.csv", "summary.txt", "snapshot_000005.dat", "snapshot_000010.dat"}) {
    CAPTURE(f);
    CHECK(slurp(a / f) == slurp(b / f));
    CHECK_FALSE(slurp(a / f).empty());
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("simulate exit codes") {
  const fs::path dir = scratch("cli");
  const fs::path log = dir / "log.txt";
  auto write = [&](const std::string& name, const std::string& text) {
    std::ofstream(dir / name) << text;
    return (dir / name).string();
  };

  const std::string rest = write("rest.cfg", "[run]\nscenario = rest\n");
  CHECK(simulate("--config " + rest + " --output " + (dir / "out").string() + " --steps 3", log) == 0);
  const std::string summary = slurp(dir / "out" / "summary.txt");
  CHECK(summary.find("steps 3\n") != std::string::npos);

  CHECK(simulate("--list-scenarios", log) == 0);
  CHECK(slurp(log).find("bingham_channel") != std::string::npos);

  CHECK(simulate("--config " + write("bad.cfg", "[material]\nq_star = -1\n"), log) == 1);
  CHECK(slurp(log).find("q_star") != std::string::npos);
  CHECK(simulate("--config " + (dir / "missing.cfg").string(), log) == 1);
  CHECK(simulate("--config " + rest + " --scenario nope", log) == 1);
  CHECK(simulate("--config " + rest + " --epsilon -1", log) == 1);

  const std::string failing =
      write("fail.cfg", "[run]\nscenario = decay\n[grid]\nnx = 16\nny = 16\n[solver]\nmax_linear_iters = 1\n");
  CHECK(simulate("--config " + failing + " --output " + (dir / "fail").string(), log) == 2);
  CHECK(slurp(log).find("step 1") != std::string::npos);

  CHECK(simulate("--config " + rest + " --scenario bingham_channel --epsilon 0.02 --steps 2 --output " +
                     (dir / "eps").string(),
                 log) == 0);
  CHECK(slurp(dir / "eps" / "diagnostics.csv").size() > 0);

  setenv("SIM_THREADS", "zero", 1);
  CHECK(simulate("--config " + rest + " --output " + (dir / "out").string(), log) == 1);
  setenv("SIM_THREADS", "2", 1);
  CHECK(simulate("--config " + rest + " --output " + (dir / "out").string(), log) == 0);
  unsetenv("SIM_THREADS");
  fs::remove_all(dir);
}
