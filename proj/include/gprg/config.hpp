#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "gprg/operators.hpp"
#include "gprg/precond.hpp"
#include "gprg/solver.hpp"

namespace gprg {

struct GridConfig {
  int n_r = 64;
  int n_theta = 128;
  double radius = 12.0;
};

/// A stage may run on its own (usually coarser) grid; 0 means the [grid]
/// size. The state is resampled whenever consecutive grids differ.
struct StageConfig {
  StageSpec spec;
  int n_r = 0;
  int n_theta = 0;
};

struct OutputsConfig {
  std::string directory = "out";
  /// Write snapshot_<stage>_<n>.gpfld every so many iterations (0: never).
  int snapshot_every = 0;
  bool emit_csv = true;
  bool emit_field = true;
};

struct SpectrumConfig {
  bool enabled = false;
  int k = 5;
  std::vector<PrecondKind> preconditioners{PrecondKind::P4};
  std::vector<double> sigma0{1e-3};
  double tol = 1e-9;
  int max_iter = 300;
  double tol_degenerate = 1e-6;
  double tol_gap = 1e-5;
};

struct RatesConfig {
  std::vector<PrecondKind> preconditioners{PrecondKind::P1, PrecondKind::P2, PrecondKind::P3,
                                           PrecondKind::P4};
  double sigma0 = 1e-3;
  double perturbation_h1 = 2e-2;
  std::uint64_t seed = 7;
  double stop_energy_gap = 1e-14;
  int max_iters = 5000;
  /// The reference field is first polished by P4 descent to this residual.
  double reference_residual = 1e-12;
  int reference_max_iters = 2000;
  /// Fit window: the last fit_fraction of the iterates after the residual
  /// first drops below fit_residual.
  double fit_residual = 1e-4;
  double fit_fraction = 0.6;
};

struct RunConfig {
  std::string name = "run";
  GridConfig grid;
  ProblemParams problem;
  InitialSpec initial;
  /// Optional start field; resampled onto the first stage grid if needed.
  std::string initial_field;
  std::vector<StageConfig> stages;
  OutputsConfig outputs;
  SpectrumConfig spectrum;
  RatesConfig rates;
};

/// Parses the TOML subset used by run configs: [table] and [[stage]]
/// headers, key = value lines with strings, integers, floats, booleans and
/// flat arrays, # comments. Unknown tables or keys, wrong types and
/// out-of-range values throw ConfigError with "<source>:<line>: ".
RunConfig parse_config(std::string_view text, std::string_view source = "config");
RunConfig load_config(const std::string& path);

/// Inverse of parse_config: every field is written, doubles with 17
/// significant digits, so parse(serialize(c)) reproduces c exactly.
std::string serialize_config(const RunConfig& config);

/// Cross-field checks (grid sizes, stage list, potential profile length).
void validate(const RunConfig& config);

}  // namespace gprg
