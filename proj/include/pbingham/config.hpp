#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

#include "pbingham/constitutive.hpp"
#include "pbingham/solver.hpp"

namespace pbingham {

/// Parse or validation failure; the message names the line or key.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct GridSpec {
  int dim = 2;
  std::array<int, 3> cells{32, 32, 1};
  std::array<double, 3> lengths{1.0, 1.0, 1.0};
  std::size_t max_cells = std::size_t{1} << 24;
};

/// Scenario data. Each scenario reads the keys it needs (see builtin_scenarios()).
struct ForcingParams {
  double amplitude = 1.0;      ///< initial speed, lid speed or body-force magnitude
  double p_s = 0.5;            ///< solid (hydrostatic) pressure level [Pa]
  double p_f0 = 0.0;           ///< initial pore pressure [Pa]
  double p_f0_noise = 0.0;     ///< amplitude of seeded uniform noise added to p_f0
  double source_rate = 0.0;    ///< peak of the localized pore-pressure source [Pa/s]
  double source_radius = 0.15; ///< Gaussian radius of the source, relative to the box
};

struct OutputSpec {
  std::string directory = "output";
  long snapshot_every = 0;     ///< 0: final snapshot only
  bool snapshots = true;
};

struct RunConfig {
  std::string scenario = "decay";
  std::uint64_t seed = 1;
  long max_steps = 0;          ///< 0: run to solver.end_time
  GridSpec grid;
  MaterialParams material;
  bool darcy_enabled = false;  ///< write the Darcy velocity into snapshots
  DarcyParams darcy;
  SolverConfig solver;
  ForcingParams forcing;
  OutputSpec output;
  double plug_threshold = 0.0;   ///< |D| threshold; 0 selects the stress-based detector

  /// Throws ConfigError naming the offending key.
  void validate() const;
  bool operator==(const RunConfig& o) const;
};

/// Default configuration of a named scenario (normalized material constants).
/// Throws ConfigError for an unknown name.
RunConfig scenario_defaults(const std::string& scenario);

/// Parses the sectioned key = value format. The scenario (from [run] or the
/// override) selects the defaults; every other key overrides them. Unknown
/// sections or keys, malformed lines and range violations throw ConfigError.
RunConfig parse_config(const std::string& text,
                       const std::optional<std::string>& scenario_override = std::nullopt);

/// Writes every key so that parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& c);

}  // namespace pbingham
