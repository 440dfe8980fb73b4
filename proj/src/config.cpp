#include "pbingham/config.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "pbingham/errors.hpp"

namespace pbingham {

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

double to_double(const std::string& key, const std::string& v) {
  double x = 0.0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(x))
    throw ConfigError("key " + key + ": expected a finite number, got '" + v + "'");
  return x;
}

long long to_int(const std::string& key, const std::string& v) {
  long long x = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
  if (ec != std::errc() || p != v.data() + v.size())
    throw ConfigError("key " + key + ": expected an integer, got '" + v + "'");
  return x;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("key " + key + ": expected true or false, got '" + v + "'");
}

struct Key {
  std::string name;  // section.key
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

#define PB_DOUBLE(NAME, FIELD)                                                           \
  Key {                                                                                  \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = to_double(NAME, v); },      \
        [](const RunConfig& c) { return fmt(c.FIELD); }                                  \
  }
#define PB_INT(NAME, FIELD, TYPE)                                                        \
  Key {                                                                                  \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = TYPE(to_int(NAME, v)); },   \
        [](const RunConfig& c) { return std::to_string(c.FIELD); }                       \
  }
#define PB_BOOL(NAME, FIELD)                                                             \
  Key {                                                                                  \
    NAME, [](RunConfig& c, const std::string& v) { c.FIELD = to_bool(NAME, v); },        \
        [](const RunConfig& c) { return std::string(c.FIELD ? "true" : "false"); }       \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> k = {
      Key{"run.scenario", [](RunConfig& c, const std::string& v) { c.scenario = v; },
          [](const RunConfig& c) { return c.scenario; }},
      Key{"run.seed",
          [](RunConfig& c, const std::string& v) {
            const auto x = to_int("run.seed", v);
            if (x < 0) throw ConfigError("key run.seed: must be >= 0");
            c.seed = std::uint64_t(x);
          },
          [](const RunConfig& c) { return std::to_string(c.seed); }},
      PB_INT("run.steps", max_steps, long),

      PB_INT("grid.dim", grid.dim, int),
      PB_INT("grid.nx", grid.cells[0], int),
      PB_INT("grid.ny", grid.cells[1], int),
      PB_INT("grid.nz", grid.cells[2], int),
      PB_DOUBLE("grid.lx", grid.lengths[0]),
      PB_DOUBLE("grid.ly", grid.lengths[1]),
      PB_DOUBLE("grid.lz", grid.lengths[2]),
      PB_INT("grid.max_cells", grid.max_cells, std::size_t),

      PB_DOUBLE("material.rho_star", material.rho_star),
      PB_DOUBLE("material.nu_star", material.nu_star),
      PB_DOUBLE("material.q_star", material.q_star),
      PB_DOUBLE("material.K", material.K),
      PB_DOUBLE("material.s_star", material.s_star),
      PB_DOUBLE("material.gamma_star", material.gamma_star),
      PB_DOUBLE("material.epsilon", material.epsilon),

      PB_BOOL("darcy.enabled", darcy_enabled),
      PB_DOUBLE("darcy.phi0", darcy.phi0),
      PB_DOUBLE("darcy.mu_f", darcy.mu_f),
      PB_DOUBLE("darcy.k0", darcy.k0),
      PB_DOUBLE("darcy.rho_f", darcy.rho_f),

      PB_DOUBLE("solver.dt_initial", solver.dt_initial),
      PB_DOUBLE("solver.cfl_target", solver.cfl_target),
      PB_INT("solver.picard_iters", solver.picard_iters, int),
      PB_DOUBLE("solver.picard_tol", solver.picard_tol),
      PB_DOUBLE("solver.projection_tol", solver.projection_tol),
      PB_DOUBLE("solver.linear_tol", solver.linear_tol),
      PB_INT("solver.max_linear_iters", solver.max_linear_iters, int),
      Key{"solver.convection_truncation_n",
          [](RunConfig& c, const std::string& v) {
            if (v == "off")
              c.solver.convection_truncation_n.reset();
            else
              c.solver.convection_truncation_n = to_double("solver.convection_truncation_n", v);
          },
          [](const RunConfig& c) {
            return c.solver.convection_truncation_n ? fmt(*c.solver.convection_truncation_n) : std::string("off");
          }},
      PB_BOOL("solver.convection", solver.convection),
      PB_DOUBLE("solver.end_time", solver.end_time),

      PB_DOUBLE("forcing.amplitude", forcing.amplitude),
      PB_DOUBLE("forcing.p_s", forcing.p_s),
      PB_DOUBLE("forcing.p_f0", forcing.p_f0),
      PB_DOUBLE("forcing.p_f0_noise", forcing.p_f0_noise),
      PB_DOUBLE("forcing.source_rate", forcing.source_rate),
      PB_DOUBLE("forcing.source_radius", forcing.source_radius),

      Key{"output.directory", [](RunConfig& c, const std::string& v) { c.output.directory = v; },
          [](const RunConfig& c) { return c.output.directory; }},
      PB_INT("output.snapshot_every", output.snapshot_every, long),
      PB_BOOL("output.snapshots", output.snapshots),

      PB_DOUBLE("diagnostics.plug_threshold", plug_threshold),
  };
  return k;
}

#undef PB_DOUBLE
#undef PB_INT
#undef PB_BOOL

const Key* find_key(const std::string& name) {
  for (const Key& k : keys())
    if (k.name == name) return &k;
  return nullptr;
}

struct Entry {
  int line;
  std::string key;
  std::string value;
};

std::vector<Entry> tokenize(const std::string& text) {
  static const char* sections[] = {"run", "grid", "material", "darcy", "solver", "forcing", "output", "diagnostics"};
  std::vector<Entry> out;
  std::istringstream in(text);
  std::string raw, section;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    const std::string s = trim(raw);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') throw ConfigError("line " + std::to_string(line) + ": malformed section header");
      section = trim(s.substr(1, s.size() - 2));
      bool known = false;
      for (const char* n : sections) known = known || section == n;
      if (!known) throw ConfigError("line " + std::to_string(line) + ": unknown section [" + section + "]");
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(line) + ": expected key = value");
    std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": missing key");
    if (value.empty()) throw ConfigError("line " + std::to_string(line) + ": missing value for " + key);
    if (key.find('.') == std::string::npos) {
      if (section.empty())
        throw ConfigError("line " + std::to_string(line) + ": key " + key + " outside any section");
      key = section + "." + key;
    }
    if (!find_key(key)) throw ConfigError("line " + std::to_string(line) + ": unknown key " + key);
    out.push_back({line, key, value});
  }
  return out;
}

}  // namespace

RunConfig scenario_defaults(const std::string& scenario) {
  RunConfig c;
  c.scenario = scenario;
  if (scenario == "rest") {
    c.grid.cells = {16, 16, 1};
    c.forcing.amplitude = 0.0;
    c.forcing.p_s = 0.0;
    c.solver.dt_initial = 0.01;
    c.solver.end_time = 0.1;
  } else if (scenario == "decay") {
    c.forcing.amplitude = 1.0;
    c.forcing.p_s = 0.1;
    c.solver.dt_initial = 0.005;
    c.solver.end_time = 2.5;
  } else if (scenario == "newtonian_cavity") {
    c.material.q_star = 0.0;
    c.forcing.amplitude = 1.0;
    c.forcing.p_s = 0.0;
    c.solver.dt_initial = 0.005;
    c.solver.end_time = 1.0;
  } else if (scenario == "bingham_channel") {
    c.grid.cells = {2, 64, 1};
    c.grid.lengths = {2.0 / 64.0, 1.0, 1.0};
    c.material.s_star = 10.0;
    c.forcing.amplitude = 4.0;
    c.forcing.p_s = 1.0;
    c.solver.convection = false;
    c.solver.dt_initial = 0.05;
    c.solver.end_time = 10.0;
  } else if (scenario == "activation_box") {
    c.grid.dim = 3;
    c.grid.cells = {16, 16, 16};
    c.forcing.amplitude = 1.0;
    c.forcing.p_s = 1.0;
    c.forcing.source_rate = 20.0;
    c.forcing.source_radius = 0.1;
    c.material.K = 0.01;
    c.solver.dt_initial = 0.01;
    c.solver.end_time = 1.0;
  } else if (scenario == "manufactured_pf") {
    c.forcing.amplitude = 1.0;
    c.forcing.p_s = 0.0;
    c.material.q_star = 0.0;
    c.solver.dt_initial = 1e-3;
    c.solver.end_time = 0.05;
  } else {
    throw ConfigError("unknown scenario '" + scenario + "'");
  }
  return c;
}

void RunConfig::validate() const {
  if (grid.dim != 2 && grid.dim != 3) throw ConfigError("key grid.dim: must be 2 or 3");
  const char* n_keys[] = {"grid.nx", "grid.ny", "grid.nz"};
  const char* l_keys[] = {"grid.lx", "grid.ly", "grid.lz"};
  for (int a = 0; a < grid.dim; ++a) {
    if (grid.cells[a] < 2) throw ConfigError(std::string("key ") + n_keys[a] + ": must be >= 2");
    if (!(grid.lengths[a] > 0.0)) throw ConfigError(std::string("key ") + l_keys[a] + ": must be > 0");
  }
  std::size_t total = 1;
  for (int a = 0; a < grid.dim; ++a) total *= std::size_t(grid.cells[a]);
  if (total > grid.max_cells)
    throw ConfigError("key grid.max_cells: grid has " + std::to_string(total) + " cells, above the limit");
  if (max_steps < 0) throw ConfigError("key run.steps: must be >= 0");
  try {
    material.validate();
  } catch (const EvaluationError& e) {
    throw ConfigError(e.what());
  }
  if (darcy_enabled) {
    try {
      darcy.validate();
    } catch (const EvaluationError& e) {
      throw ConfigError(e.what());
    }
  }
  try {
    solver.validate();
  } catch (const EvaluationError& e) {
    throw ConfigError(e.what());
  }
  if (!(forcing.p_f0_noise >= 0.0)) throw ConfigError("key forcing.p_f0_noise: must be >= 0");
  if (!(forcing.source_radius > 0.0)) throw ConfigError("key forcing.source_radius: must be > 0");
  if (output.snapshot_every < 0) throw ConfigError("key output.snapshot_every: must be >= 0");
  if (output.directory.empty()) throw ConfigError("key output.directory: must not be empty");
  if (!(plug_threshold >= 0.0)) throw ConfigError("key diagnostics.plug_threshold: must be >= 0");
}

bool RunConfig::operator==(const RunConfig& o) const { return emit_config(*this) == emit_config(o); }

RunConfig parse_config(const std::string& text, const std::optional<std::string>& scenario_override) {
  const auto entries = tokenize(text);
  std::string scenario = "decay";
  for (const Entry& e : entries)
    if (e.key == "run.scenario") scenario = e.value;
  if (scenario_override) scenario = *scenario_override;
  RunConfig c = scenario_defaults(scenario);
  for (const Entry& e : entries) {
    if (e.key == "run.scenario") continue;
    find_key(e.key)->set(c, e.value);
  }
  c.validate();
  return c;
}

std::string emit_config(const RunConfig& c) {
  std::string out;
  std::string section;
  for (const Key& k : keys()) {
    const auto dot = k.name.find('.');
    const std::string sec = k.name.substr(0, dot);
    if (sec != section) {
      if (!section.empty()) out += "\n";
      out += "[" + sec + "]\n";
      section = sec;
    }
    out += k.name.substr(dot + 1) + " = " + k.get(c) + "\n";
  }
  return out;
}

}  // namespace pbingham
