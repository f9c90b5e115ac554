#pragma once

#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gprg/grid.hpp"

namespace gprg {

enum class PotentialKind { harmonic, radial_profile };

/// Radially symmetric trap. The harmonic trap is V = |x|^2 / 2; a radial
/// profile supplies V(r_{i+1/2}) directly, one value per radial node.
struct Potential {
  PotentialKind kind = PotentialKind::harmonic;
  std::vector<double> profile;

  static Potential harmonic() { return {}; }
  static Potential radial(std::vector<double> values) {
    return {PotentialKind::radial_profile, std::move(values)};
  }
};

/// Only f(s) = eta s is implemented; the enum keeps room for the
/// logarithmic and LHY-corrected interactions.
enum class Nonlinearity { cubic };

struct ProblemParams {
  double omega = 0.0;
  double eta = 0.0;
  Potential potential;
  Nonlinearity nonlinearity = Nonlinearity::cubic;

  /// Throws ConfigError for non-finite or negative parameters. Returns
  /// non-fatal warnings (e.g. |Omega| > 1 in a harmonic trap).
  std::vector<std::string> validate() const;
};

/// Pieces of a Theta-local, real-linear operator of the form
///   kinetic * (-1/2 Lap) + potential * V - rotation * Omega L_z + shift
///   + local(x) . + conj_local(x) conj(.)
/// evaluated in one pass over the grid.
struct KernelTerms {
  double kinetic = 0.0;
  double potential = 0.0;
  double rotation = 0.0;
  double shift = 0.0;
  std::span<const double> local;
  std::span<const Complex> conj_local;
};

/// Discretized linear machinery for one (grid, problem) pair: second-order
/// radial stencil with antipodal pole ghosts and a homogeneous Dirichlet
/// ghost row, eighth-order periodic angular stencils, sampled potential.
class OperatorSet {
 public:
  OperatorSet(GridPtr grid, ProblemParams params);

  const PolarGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  const ProblemParams& params() const noexcept { return params_; }
  const std::vector<std::string>& warnings() const noexcept { return warnings_; }

  std::span<const double> potential() const noexcept { return potential_; }

  /// Radial Laplacian coefficients of u_{i-1}, u_i and u_{i+1} at row i. At
  /// i = 0 the lower neighbour is the antipodal ghost u(r_{1/2}, Theta + pi).
  double radial_lower(int i) const noexcept { return lower_[static_cast<std::size_t>(i)]; }
  double radial_upper(int i) const noexcept { return upper_[static_cast<std::size_t>(i)]; }
  double radial_diag() const noexcept { return diag_; }

  double f(double rho) const noexcept { return params_.eta * rho; }
  double f_prime(double /*rho*/) const noexcept { return params_.eta; }
  /// F(rho) = int_0^rho f(s) ds
  double big_f(double rho) const noexcept { return 0.5 * params_.eta * rho * rho; }

  /// out = (terms applied to u). out must be distinct from u.
  void apply(const KernelTerms& terms, const Field& u, Field& out) const;

  /// L2 norm of |A| |u|, the entrywise bound on what rounding can leave in
  /// A u. Scaled by a small multiple of machine epsilon it gives the
  /// attainable residual floor of an iterative solve with this operator.
  double abs_apply_norm(const KernelTerms& terms, const Field& u) const;

 private:
  GridPtr grid_;
  ProblemParams params_;
  std::vector<std::string> warnings_;
  std::vector<double> potential_;
  std::vector<double> lower_;
  std::vector<double> upper_;
  double diag_ = 0.0;
};

using OpsPtr = std::shared_ptr<const OperatorSet>;

OpsPtr make_operators(GridPtr grid, ProblemParams params);

/// Pointwise f(|state|^2) used by H_phi.
std::vector<double> density_multiplier(const OperatorSet& ops, const Field& state);

Field apply_laplacian(const OperatorSet& ops, const Field& u);
Field apply_lz(const OperatorSet& ops, const Field& u);
/// H_0 u = -1/2 Lap u + V u - Omega L_z u
Field apply_h0(const OperatorSet& ops, const Field& u);
/// H_phi u = H_0 u + f(|state|^2) u
Field apply_h_phi(const OperatorSet& ops, const Field& state, const Field& u);
/// E''(state) u = H_phi u + f'(|state|^2)(|state|^2 u + state^2 conj(u))
Field apply_hessian(const OperatorSet& ops, const Field& state, const Field& u);

double energy(const OperatorSet& ops, const Field& state);
/// E(a/|a|) - E(b/|b|), assembled from a - b and a + b so that it keeps full
/// relative accuracy when a and b are close. For unit-norm inputs this is
/// E(a) - E(b); the normalization makes it blind to rounding in |a| and |b|.
double energy_difference(const OperatorSet& ops, const Field& a, const Field& b);

/// E'(state) = H_state state
Field euclidean_gradient(const OperatorSet& ops, const Field& state);
/// <H_state state, state>
double lambda_tilde(const OperatorSet& ops, const Field& state);
/// max_ij |H_state state - lambda_tilde state|
double residual_inf(const OperatorSet& ops, const Field& state);

}  // namespace gprg
