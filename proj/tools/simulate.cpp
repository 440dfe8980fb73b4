#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "pbingham/config.hpp"
#include "pbingham/run.hpp"
#include "pbingham/scenarios.hpp"

namespace {

// SIM_THREADS caps data-parallel workers; the current build runs serially, so
// the value is only validated.
bool check_thread_env() {
  const char* env = std::getenv("SIM_THREADS");
  if (!env) return true;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (end == env || *end != '\0' || n < 1) {
    std::cerr << "error: SIM_THREADS must be a positive integer, got '" << env << "'\n";
    return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pore-pressure-activated Bingham flow simulator"};
  std::string config_path, output_dir, scenario;
  long steps = -1;
  double epsilon = 0.0;
  bool list = false;
  app.add_option("--config", config_path, "configuration file");
  app.add_option("--output", output_dir, "output directory");
  app.add_option("--scenario", scenario, "scenario name (overrides [run] scenario)");
  app.add_option("--steps", steps, "maximum number of steps")->check(CLI::NonNegativeNumber);
  app.add_option("--epsilon", epsilon, "regularization scale")->check(CLI::PositiveNumber);
  app.add_flag("--list-scenarios", list, "print the built-in scenarios and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (list) {
    for (const auto& s : pbingham::builtin_scenarios()) std::cout << s.name << "  " << s.description << "\n";
    return 0;
  }
  if (config_path.empty()) {
    std::cerr << "error: --config is required\n";
    return 1;
  }
  if (!check_thread_env()) return 1;

  pbingham::RunConfig cfg;
  try {
    std::ifstream in(config_path);
    if (!in) throw pbingham::ConfigError("cannot read " + config_path);
    std::stringstream buf;
    buf << in.rdbuf();
    std::optional<std::string> override_scenario;
    if (!scenario.empty()) override_scenario = scenario;
    cfg = pbingham::parse_config(buf.str(), override_scenario);
    if (!output_dir.empty()) cfg.output.directory = output_dir;
    if (steps >= 0) cfg.max_steps = steps;
    if (epsilon > 0.0) cfg.material.epsilon = epsilon;
    cfg.validate();
  } catch (const pbingham::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  pbingham::RunResult r;
  try {
    r = pbingham::run(cfg);
  } catch (const pbingham::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  if (r.exit_code != 0) {
    std::cerr << "solver failure at " << r.message << "\n";
    return r.exit_code;
  }
  std::cout << "scenario " << cfg.scenario << ": " << r.steps << " steps, t = " << r.final_state.t << "\n";
  return 0;
}
