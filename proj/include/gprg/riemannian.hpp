#pragma once

#include "gprg/grid.hpp"
#include "gprg/operators.hpp"
#include "gprg/precond.hpp"

namespace gprg {

enum class StepMode { fixed, backtracking, exact_1d };

/// Step-size rule for phi -> R(phi, -tau d).
///   fixed        : tau as given
///   backtracking : tau, tau beta, tau beta^2, ... until the Armijo test
///                  E(trial) <= E(phi) - c tau |d|_P^2 holds
///   exact_1d     : bracket a minimizer of tau -> E(R(phi, -tau d)) by
///                  growth from tau, then golden-section search to rel. tol
struct StepPolicy {
  StepMode mode = StepMode::backtracking;
  double tau = 1.0;
  double shrink = 0.5;
  double armijo = 1e-4;
  int max_halvings = 60;
  double growth = 2.0;
  double tol = 1e-8;

  static StepPolicy fixed(double tau) { return {.mode = StepMode::fixed, .tau = tau}; }
  static StepPolicy backtracking(double tau = 1.0, double shrink = 0.5, double armijo = 1e-4) {
    return {.mode = StepMode::backtracking, .tau = tau, .shrink = shrink, .armijo = armijo};
  }
  static StepPolicy exact(double tau = 1.0, double growth = 2.0, double tol = 1e-8) {
    return {.mode = StepMode::exact_1d, .tau = tau, .growth = growth, .tol = tol};
  }

  void validate() const;
};

std::string_view to_string(StepMode mode);
StepMode parse_step_mode(std::string_view text);

/// v - (phi, v) / (phi, P^{-1} phi) P^{-1} phi
Field project_tangent(const Field& state, const Field& v, const Preconditioner& handle);
/// Same projection with P^{-1} phi supplied by the caller.
Field project_tangent(const Field& state, const Field& v, const Field& p_inv_state);

struct GradientResult {
  Field direction;
  /// (phi, P^{-1} H phi) / (phi, P^{-1} phi)
  double lambda = 0.0;
  /// <P d, d>
  double dnorm_p_sq = 0.0;
  /// Solves kept for warm starts at the next iterate.
  Field p_inv_state;
  Field p_inv_residual;
  int inner_iterations = 0;
};

/// Riemannian gradient P^{-1} H phi - lambda P^{-1} phi.
///
/// Evaluated as the projection of P^{-1}(H phi - lambda_tilde phi): the two
/// expressions agree exactly, but the second solves for a small right-hand
/// side and keeps full relative accuracy as the residual vanishes. h_state
/// may pass a precomputed H_phi phi; warm may pass the previous result.
GradientResult riemannian_gradient(const OperatorSet& ops, const Field& state,
                                   const Preconditioner& handle, const Field* h_state = nullptr,
                                   const GradientResult* warm = nullptr);

/// (phi + tau v) / |phi + tau v|
Field retract(const Field& state, const Field& v, double tau);

struct StepChoice {
  double tau = 0.0;
  Field trial;
  /// E(trial) - E(state), evaluated without cancellation.
  double energy_change = 0.0;
  int evaluations = 0;
};

/// Picks tau for the update R(phi, -tau d). dnorm_p_sq = <P d, d> enters the
/// Armijo test. Throws SolverError when backtracking finds no decrease.
StepChoice select_step(const OperatorSet& ops, const Field& state, const Field& direction,
                       double dnorm_p_sq, const StepPolicy& policy);

}  // namespace gprg
