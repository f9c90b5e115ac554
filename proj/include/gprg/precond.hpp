#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "gprg/grid.hpp"
#include "gprg/krylov.hpp"
#include "gprg/operators.hpp"

namespace gprg {

/// P1 = -1/2 Lap + V, P2 = H_0, P3 = H_phi,
/// P4 = E''(phi) - (lambda_tilde(phi) - sigma0) I. Each gets + shift_a I.
enum class PrecondKind { P1, P2, P3, P4 };

std::string_view to_string(PrecondKind kind);
/// Accepts "P1".."P4" (case-insensitive). Throws ConfigError otherwise.
PrecondKind parse_precond_kind(std::string_view text);

/// Inner preconditioner of the Krylov solves used for P3 and P4.
///   p2         : mode-decoupled H_0 + a
///   mean_field : mode-decoupled H_0 + a + c(r), where c(r) is the
///                angular average of the state-dependent local term
enum class InnerPrecond { p2, mean_field };

struct PreconditionerSpec {
  PrecondKind kind = PrecondKind::P2;
  double shift_a = 0.0;
  double sigma0 = 1e-3;
  double inverse_tol = 1e-12;
  int inverse_max_iter = 10000;
  InnerPrecond inner = InnerPrecond::mean_field;

  /// Throws ConfigError on a negative shift, non-positive sigma0 for P4, or
  /// a non-positive tolerance / iteration budget.
  void validate() const;
};

/// Direct solver for Theta-independent operators
///   -1/2 Lap + V + c(r) + shift - rotation * Omega L_z.
/// The angular circulant part is diagonalized by an FFT along each ring and
/// every Fourier mode leaves a tridiagonal radial system that is factored
/// once at construction.
class ModeSolver {
 public:
  ModeSolver(const OperatorSet& ops, double rotation, double shift,
             std::vector<double> radial_extra = {});
  ~ModeSolver();
  ModeSolver(const ModeSolver&) = delete;
  ModeSolver& operator=(const ModeSolver&) = delete;

  /// out = K^{-1} in
  void solve(const Field& in, Field& out) const;
  /// out = K in, evaluated mode by mode (used to cross-check the stencil path).
  void apply(const Field& in, Field& out) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct SolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Assembled P_phi with forward and inverse application. Immutable once
/// built; the state snapshot is frozen at assembly time.
class Preconditioner {
 public:
  Preconditioner(PreconditionerSpec spec, OpsPtr ops, Field state);

  const PreconditionerSpec& spec() const noexcept { return spec_; }
  const Field& state() const noexcept { return state_; }
  /// lambda_tilde of the frozen state (used by P4).
  double lambda_state() const noexcept { return lambda_state_; }

  Field apply(const Field& u) const;
  void apply(const Field& u, Field& out) const;

  /// Returns v with |P v - w|_L2 <= inverse_tol |w|_L2, or with the residual
  /// at the rounding floor of P when that is larger. The optional guess
  /// warm-starts the Krylov path. Throws ConvergenceError when the
  /// iteration budget runs out and NotCoerciveError on indefiniteness.
  Field apply_inverse(const Field& w, const Field* guess = nullptr,
                      SolveStats* stats = nullptr) const;

  /// Inverse through preconditioned CG, also for P1/P2. Used to cross-check
  /// the direct mode-decoupled path.
  Field apply_inverse_krylov(const Field& w, SolveStats* stats = nullptr) const;

  bool has_direct_inverse() const noexcept {
    return spec_.kind == PrecondKind::P1 || spec_.kind == PrecondKind::P2;
  }

 private:
  KernelTerms terms() const;
  ResidualFloor residual_floor() const;
  Field krylov_solve(const Field& w, const Field* guess, SolveStats* stats) const;

  PreconditionerSpec spec_;
  OpsPtr ops_;
  Field state_;
  double lambda_state_ = 0.0;
  std::vector<double> local_;
  std::vector<Complex> conj_local_;
  std::shared_ptr<const ModeSolver> direct_;
  std::shared_ptr<const ModeSolver> inner_;
};

Preconditioner assemble(const PreconditionerSpec& spec, const OpsPtr& ops, const Field& state);

}  // namespace gprg
