#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "gprg/grid.hpp"
#include "gprg/operators.hpp"
#include "gprg/precond.hpp"
#include "gprg/riemannian.hpp"

namespace gprg {

struct StageSpec {
  PreconditionerSpec precond;
  StepPolicy policy;
  int max_iters = 1000;
  /// Stop once residual_inf <= stop_residual (<= 0 disables).
  double stop_residual = 1e-10;
  /// Stop once |E^{n+1} - E^n| <= stop_energy_delta (<= 0 disables).
  double stop_energy_delta = 0.0;
  /// Stop once E^n - target_energy <= stop_energy_gap (<= 0 disables).
  double target_energy = 0.0;
  double stop_energy_gap = 0.0;

  void validate() const;
};

/// One row per iterate phi^n. tau and dnorm_p describe the step that produced
/// phi^n (zero for the initial row); dnorm_p is |d|_P.
struct IterationRow {
  int n = 0;
  double energy = 0.0;
  double lambda = 0.0;
  double residual_inf = 0.0;
  double tau = 0.0;
  double dnorm_p = 0.0;
  double wall_s = 0.0;
  /// Krylov iterations spent on P^{-1} solves for this step (not exported).
  int inner_iterations = 0;
};

enum class StopStatus { residual_met, energy_delta_met, energy_gap_met, max_iters, error };

std::string_view to_string(StopStatus status);

struct ConvergenceRecord {
  std::vector<IterationRow> rows;
  StopStatus status = StopStatus::max_iters;
  std::string message;

  /// Header n,energy,lambda,residual_inf,tau,dnorm_P,wall_s; 17 significant
  /// digits.
  std::string to_csv() const;
};

enum class InitialKind { gaussian, gaussian_winding, perturbed };

std::string_view to_string(InitialKind kind);
InitialKind parse_initial_kind(std::string_view text);

struct InitialSpec {
  InitialKind kind = InitialKind::gaussian;
  /// Winding number; for perturbed the base is the m-winding Gaussian.
  int m = 0;
  std::uint64_t seed = 0;
  double amplitude = 0.1;
};

/// Unit-norm starting field. The Gaussian width follows the Thomas-Fermi
/// radius of the harmonic trap when eta > 0. Deterministic in its inputs.
Field initial_guess(const InitialSpec& spec, const GridPtr& grid, const ProblemParams& params);

/// Smooth seeded perturbation: a random combination of low angular and
/// radial modes vanishing at R, scaled to the given discrete H1 norm.
Field smooth_perturbation(const GridPtr& grid, std::uint64_t seed, double h1_norm);

/// Solver state carried between iterations of one stage.
struct IterationState {
  Field state;
  Field h_state;
  double energy = 0.0;
  double lambda = 0.0;
  double residual = 0.0;
  GradientResult warm;
};

IterationState make_iteration_state(const OperatorSet& ops, Field state);

struct StepResult {
  IterationState next;
  IterationRow row;
  int inner_iterations = 0;
};

/// One P-RG update phi <- R(phi, -tau d) with d the Riemannian gradient under
/// the handle's metric.
StepResult step(const OperatorSet& ops, const IterationState& current,
                const Preconditioner& handle, const StepPolicy& policy);

/// Convenience form working on a bare state.
StepResult step(const OperatorSet& ops, const Field& state, const Preconditioner& handle,
                const StepPolicy& policy);

struct RunResult {
  Field final_state;
  std::vector<ConvergenceRecord> records;
  bool ok = true;
};

/// Called after every iterate; returning false stops the run.
using RunObserver = std::function<bool(int stage, const IterationRow& row, const Field& state)>;

/// Runs the stages in order, each from the previous stage's final iterate.
/// Errors inside a stage end the run with status error and the partial
/// record; the last good iterate is returned.
RunResult run(const std::vector<StageSpec>& stages, const OpsPtr& ops, const Field& initial,
              const RunObserver& observer = {});

}  // namespace gprg
