#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "gprg/grid.hpp"
#include "gprg/operators.hpp"
#include "gprg/precond.hpp"

namespace gprg {

enum class FdOrder { first, second };

/// Central differences of E along v:
///   first : (E(phi + h v) - E(phi - h v)) / (2h)
///   second: (E(phi + h v) - 2 E(phi) + E(phi - h v)) / h^2
/// E is evaluated on the unnormalized arguments.
double fd_directional(const OperatorSet& ops, const Field& state, const Field& v, double h,
                      FdOrder order);

/// Real pairing: a field with N complex samples becomes the 2N vector
/// (Re u_0, ..., Re u_{N-1}, Im u_0, ..., Im u_{N-1}).
Eigen::VectorXd pack(const Field& u);
Field unpack(const GridPtr& grid, const Eigen::VectorXd& x);

/// Dense forms A_ij = <A e_j, e_i> of the real-linear operators, so that
/// <A u, v> = pack(v)^T A pack(u). The action of the operator is
/// mass^{-1} A.
struct DenseSystem {
  static constexpr std::size_t kMaxNodes = 4096;

  GridPtr grid;
  Eigen::VectorXd mass;
  Eigen::MatrixXd h0;
  Eigen::MatrixXd h_phi;
  Eigen::MatrixXd hessian;
  /// Present when assemble_dense was given a preconditioner spec.
  std::optional<Eigen::MatrixXd> precond;

  /// Operator action mass^{-1} form applied to u.
  Field apply(const Eigen::MatrixXd& form, const Field& u) const;
  /// Solves form x = mass u; the inverse of apply.
  Field solve(const Eigen::MatrixXd& form, const Field& u) const;
};

/// Assembles every form by probing the stencil paths with unit vectors.
/// Throws UsageError when the grid has more than kMaxNodes nodes.
DenseSystem assemble_dense(const OpsPtr& ops, const Field& state,
                           const std::optional<PreconditionerSpec>& spec = std::nullopt);

/// Dense form of an arbitrary real-linear map on fields.
Eigen::MatrixXd dense_form(const GridPtr& grid, const std::function<Field(const Field&)>& map);

/// max |A - A^T| / max |A|
double asymmetry(const Eigen::MatrixXd& a);

/// Mass-orthonormal basis (columns) of the complement of the given fields.
Eigen::MatrixXd dense_complement(const DenseSystem& sys, const std::vector<Field>& constraints);

/// Eigenvalues of the pencil (a, b) compressed to the complement of the
/// constraints, ascending. b = mass when omitted.
Eigen::VectorXd dense_constrained_eigs(const DenseSystem& sys, const Eigen::MatrixXd& a,
                                       const std::vector<Field>& constraints,
                                       const Eigen::MatrixXd* b = nullptr);

}  // namespace gprg
