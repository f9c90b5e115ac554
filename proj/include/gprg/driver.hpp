#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gprg/config.hpp"
#include "gprg/solver.hpp"
#include "gprg/spectral.hpp"

namespace gprg {

/// Grid of stage k (the [grid] size unless the stage overrides it).
GridPtr stage_grid(const RunConfig& config, std::size_t k);
GridPtr config_grid(const RunConfig& config);
OpsPtr config_operators(const RunConfig& config);

/// Moves u onto grid (resampling when the shapes differ) and normalizes.
Field on_grid(const Field& u, const GridPtr& grid);

struct SolveOutcome {
  Field final_state;
  std::vector<ConvergenceRecord> records;
  bool ok = true;
  double energy = 0.0;
  double lambda = 0.0;
  double residual = 0.0;
};

/// Runs the configured stages, resampling between stages on different grids.
/// start overrides the configured initial state.
SolveOutcome solve(const RunConfig& config, const Field* start = nullptr,
                   const RunObserver& observer = {});

struct SpectrumOutcome {
  double lambda_g = 0.0;
  TangentEigs tangent;
  MorseBottVerdict morse_bott;
  std::vector<PencilResult> pencils;
  /// One report per P1-P3 kind and per (P4, sigma0) pair, in config order.
  std::vector<SpectrumReport> reports;
};

SpectrumOutcome analyze_spectrum(const RunConfig& config, const Field& state);

/// Least-squares slope of log10 sqrt(gap_n) against n over the last
/// `fraction` of the iterates after the residual first drops below
/// `residual_cut`, returned as a rate 10^slope. Non-positive gaps are
/// skipped; NaN when fewer than three points remain.
double fit_rate(const std::vector<double>& gaps, const std::vector<double>& residuals,
                double residual_cut, double fraction);

struct RateRun {
  PrecondKind kind = PrecondKind::P4;
  double mu = 0.0;
  double L = 0.0;
  double tau_star = 0.0;
  double rho_theory = 0.0;
  double rho_fitted = 0.0;
  int iters = 0;
  /// "ok" when E - E_g reached the stop gap, "max_iters", or "error: ...".
  std::string status;
  ConvergenceRecord record;
  /// E^n - E_g for every row of the record.
  std::vector<double> gaps;
};

struct RatesOutcome {
  Field reference;
  double reference_residual = 0.0;
  std::vector<RateRun> runs;

  /// precond,mu,L,tau_star,rho_theory,rho_fitted,iters,status
  std::string to_csv() const;
  bool all_failed() const;
};

/// Called for every iterate of every rate run.
using RateObserver = std::function<void(PrecondKind kind, const IterationRow& row, const Field& state)>;

/// Polishes the reference, computes (mu, L) per preconditioner, then runs
/// fixed-tau* P-RG from a smooth perturbation of the reference.
RatesOutcome measure_rates(const RunConfig& config, const Field& reference,
                           const RateObserver& observer = {});

}  // namespace gprg
