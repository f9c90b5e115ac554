#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "gprg/grid.hpp"
#include "gprg/operators.hpp"
#include "gprg/precond.hpp"

namespace gprg {

struct EigenPair {
  double value = 0.0;
  Field vector;
  double residual = 0.0;
};

/// Shared knobs of the constrained eigensolves. The LOBPCG preconditioner is
/// an inexact shift-invert (E''(phi) - lambda_tilde + shift_sigma)^{-1},
/// solved by CG to precond_tol.
struct EigenOptions {
  int max_iter = 300;
  double tol = 1e-9;
  int extra = 2;
  double shift_sigma = 1e-3;
  double precond_tol = 1e-3;
  std::uint64_t seed = 1;
};

struct TangentEigs {
  std::vector<EigenPair> pairs;
  bool converged = false;
  int iterations = 0;
};

/// k smallest eigenpairs of E''(phi) on T_phi M = {v : (phi, v) = 0}, in the
/// quadrature L2 inner product. Optional guesses seed the block.
TangentEigs hessian_tangent_eigs(const OpsPtr& ops, const Field& state, int k,
                                 const EigenOptions& options = {},
                                 const std::vector<Field>& guesses = {});

/// Orthonormal basis of span{i phi, i L_z phi} inside T_phi M. dim is 1 when
/// i L_z phi is parallel to i phi (rotationally symmetric states).
struct SymmetryBasis {
  std::vector<Field> vectors;
  int dim = 0;
};

SymmetryBasis symmetry_basis(const OperatorSet& ops, const Field& state);

/// {phi} plus the symmetry basis, L2-orthonormal: the directions deflated to
/// restrict to N_phi M.
std::vector<Field> normal_space_constraints(const OperatorSet& ops, const Field& state);

struct MorseBottVerdict {
  int symmetry_dim = 0;
  /// The dim-2 test only applies when the state carries both symmetries.
  bool applicable = false;
  bool lambda1_ok = false;
  bool lambda2_ok = false;
  bool gap_ok = false;
  bool alignment_ok = false;
  double gap = 0.0;
  std::vector<double> angles;
  bool is_morse_bott = false;
};

/// Principal angles (radians) between span(a) and span(b), both sets given
/// as arbitrary independent vectors; computed from sines for accuracy at
/// small angles.
std::vector<double> principal_angles(const std::vector<Field>& a, const std::vector<Field>& b);

MorseBottVerdict morse_bott_check(double lambda_g, const std::vector<EigenPair>& eigs,
                                  const SymmetryBasis& symmetry, double tol_degenerate,
                                  double tol_gap, double tol_angle = 1e-3);

struct PencilOptions {
  EigenOptions eig{.max_iter = 200, .tol = 1e-8, .precond_tol = 1e-2};
  /// Relative agreement of consecutive L estimates that flags convergence.
  double L_agreement = 5e-3;
  int L_levels = 3;
};

struct PencilResult {
  double mu = 0.0;
  double L = 0.0;
  bool mu_converged = false;
  bool L_converged = false;
  std::vector<double> L_estimates;
  std::vector<EigenPair> lower;
  int symmetry_dim = 0;
};

/// Extremes of <(E''(phi) - lambda_g) v, v> / <P v, v> over v in N_phi M,
/// with lambda_g = lambda_tilde(phi). guesses may seed the lower block (the
/// lowest non-symmetry tangent eigenvectors are ideal).
PencilResult pencil_extremes(const OpsPtr& ops, const Field& state, const Preconditioner& handle,
                             int k_each, const PencilOptions& options = {},
                             const std::vector<Field>& guesses = {});

struct RateEstimate {
  double tau_star = 0.0;
  double rho = 0.0;
};

/// P1-P3: tau* = 1/L, rho = sqrt(1 - mu/L). P4: tau* = 2/(L + mu),
/// rho = (L - mu)/(L + mu). Throws UsageError unless 0 < mu <= L.
RateEstimate theoretical_rate(double mu, double L, PrecondKind kind);

/// mu of the P4 pencil predicted from the tangent spectrum.
double p4_mu_closed_form(double lambda3, double lambda_g, double sigma0);

struct SpectrumReport {
  double lambda_g = 0.0;
  std::vector<double> eigs;
  MorseBottVerdict morse_bott;
  double mu = 0.0;
  double L = 0.0;
  double tau_star = 0.0;
  double rho = 0.0;
  PrecondKind precond_kind = PrecondKind::P4;
  double sigma0 = 0.0;
  /// P4 only: (lambda_3 - lambda_g) / (lambda_3 - lambda_g + sigma0).
  std::optional<double> mu_closed_form;
  std::vector<std::string> flags;

  /// Flat JSON object: lambda_g, eig_1..eig_k, gap, is_morse_bott, mu, L,
  /// tau_star, rho, precond_kind, flags (plus sigma0 and symmetry_dim).
  std::string to_json() const;
};

}  // namespace gprg
