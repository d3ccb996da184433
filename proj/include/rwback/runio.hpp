#pragma once

#include "rwback/dynamics.hpp"

#include <stdexcept>
#include <string>

namespace rwback {

// Raised for any malformed, inconsistent, or unrunnable configuration. The
// command-line driver maps it to exit code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// One simulation run, as described by a JSON configuration file. Every field
// has a default; a file only needs "t_end" and "cadence". See
// parse_run_config for the accepted keys.
struct RunConfig {
  CouplingConfig coupling;
  GridSpec grid;
  std::string profile = "hadamard";
  InitProfileParams profile_params;
  double Hdddot_init = 0.0;  // seeds the parametrix reference for init data
  GeometryState geometry;    // geometry.t is the start time
  IntegratorConfig integrator;
  double t_end = 0.0;
  double cadence = 0.0;  // output interval in coordinate time
  std::string output_dir = ".";
};

// Reads and validates a configuration file. The file is a single JSON object
// with optional sub-objects "coupling", "grid", "init", "geometry",
// "integrator" and top-level "t_end", "cadence", "output_dir". Unknown keys
// anywhere are rejected, as are out-of-range values (t_end <= 0, cadence <=
// 0, nonpositive grid bounds, unknown profile names, and so on).
// "coupling.lambda" accepts either a positive number or the string
// "minkowski", which selects the static-scale normalization for the
// configured mass. When "integrator.wald_constrained" is true, absent xi and
// c_dprime are filled in with the values the constrained mode requires;
// explicitly configured conflicting values are errors.
RunConfig parse_run_config(const std::string& path);

// Same, from config text already in memory ("source" only names the input in
// error messages).
RunConfig parse_run_config_text(const std::string& text,
                                const std::string& source = "<config>");

// Builds the initial state and advances it to t_end, writing into
// config.output_dir:
//   geometry.csv     t, a, H, Hdot, Hddot, Hdddot, R, residual
//   diagnostics.csv  t, phi2_ren, max_J_defect, max_weighted_hadamard,
//                    tail_bound
//   modes_<t>.csv    k, Gpp, Gppi, Gpipi, Jk  (one file per output time)
// Rows are emitted at the start time, every cadence interval, and t_end. All
// numbers are printed with 17 significant digits; output is byte-identical
// across runs of the same build on the same configuration. Initialization
// failures rethrow as ConfigError; a step-size underflow or invariant
// violation during evolution raises SolverAbort.
void run_simulation(const RunConfig& config);

// Command entry points used by the binary. cmd_verify runs the certification
// suites selected by scope (series, hadamard, subtraction, quadrature, or
// all), prints the report, and returns 0 when every non-informational check
// passes, 1 otherwise. cmd_run parses the config, optionally overrides the
// output directory, runs the simulation, and returns 0 on success, 2 on
// configuration errors, 3 on solver abort.
int cmd_verify(const std::string& scope);
int cmd_run(const std::string& config_path, const std::string& out_override);

}  // namespace rwback
