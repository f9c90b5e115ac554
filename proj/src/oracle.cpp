#include "gprg/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "gprg/error.hpp"

namespace gprg {

double fd_directional(const OperatorSet& ops, const Field& state, const Field& v, double h,
                      FdOrder order) {
  if (!(h > 0.0)) throw UsageError("fd_directional needs h > 0");
  if (max_abs(v) == 0.0) return 0.0;
  Field plus = state;
  plus.axpy(h, v);
  Field minus = state;
  minus.axpy(-h, v);
  const double ep = energy(ops, plus);
  const double em = energy(ops, minus);
  if (order == FdOrder::first) return (ep - em) / (2.0 * h);
  return (ep - 2.0 * energy(ops, state) + em) / (h * h);
}

Eigen::VectorXd pack(const Field& u) {
  const auto vals = u.values();
  const auto n = static_cast<Eigen::Index>(vals.size());
  Eigen::VectorXd x(2 * n);
  for (Eigen::Index k = 0; k < n; ++k) {
    x(k) = vals[static_cast<std::size_t>(k)].real();
    x(n + k) = vals[static_cast<std::size_t>(k)].imag();
  }
  return x;
}

Field unpack(const GridPtr& grid, const Eigen::VectorXd& x) {
  Field u(grid);
  auto vals = u.values();
  const auto n = static_cast<Eigen::Index>(vals.size());
  if (x.size() != 2 * n) throw UsageError("unpack: vector length does not match the grid");
  for (Eigen::Index k = 0; k < n; ++k) vals[static_cast<std::size_t>(k)] = {x(k), x(n + k)};
  return u;
}

Eigen::MatrixXd dense_form(const GridPtr& grid, const std::function<Field(const Field&)>& map) {
  const auto n = static_cast<Eigen::Index>(grid->size());
  const int nt = grid->n_theta();
  Eigen::MatrixXd a(2 * n, 2 * n);
  Field e(grid);
  for (Eigen::Index col = 0; col < 2 * n; ++col) {
    const Eigen::Index k = col % n;
    e.set_zero();
    e.values()[static_cast<std::size_t>(k)] = col < n ? Complex(1.0, 0.0) : Complex(0.0, 1.0);
    const Field image = map(e);
    const auto vals = image.values();
    for (Eigen::Index row = 0; row < n; ++row) {
      const double w = grid->weight(static_cast<int>(row / nt));
      a(row, col) = w * vals[static_cast<std::size_t>(row)].real();
      a(n + row, col) = w * vals[static_cast<std::size_t>(row)].imag();
    }
  }
  return a;
}

double asymmetry(const Eigen::MatrixXd& a) {
  const double top = a.cwiseAbs().maxCoeff();
  return top > 0.0 ? (a - a.transpose()).cwiseAbs().maxCoeff() / top : 0.0;
}

DenseSystem assemble_dense(const OpsPtr& ops, const Field& state,
                           const std::optional<PreconditionerSpec>& spec) {
  const GridPtr& grid = ops->grid_ptr();
  if (grid->size() > DenseSystem::kMaxNodes)
    throw UsageError("assemble_dense is limited to n_r * n_theta <= 4096");
  DenseSystem sys;
  sys.grid = grid;
  const auto n = static_cast<Eigen::Index>(grid->size());
  sys.mass.resize(2 * n);
  for (Eigen::Index k = 0; k < n; ++k)
    sys.mass(k) = sys.mass(n + k) = grid->weight(static_cast<int>(k / grid->n_theta()));
  sys.h0 = dense_form(grid, [&](const Field& u) { return apply_h0(*ops, u); });
  sys.h_phi = dense_form(grid, [&](const Field& u) { return apply_h_phi(*ops, state, u); });
  sys.hessian = dense_form(grid, [&](const Field& u) { return apply_hessian(*ops, state, u); });
  if (spec) {
    const Preconditioner p(*spec, ops, state);
    sys.precond = dense_form(grid, [&](const Field& u) { return p.apply(u); });
  }
  return sys;
}

Field DenseSystem::apply(const Eigen::MatrixXd& form, const Field& u) const {
  const Eigen::VectorXd y = (form * pack(u)).cwiseQuotient(mass);
  return unpack(grid, y);
}

Field DenseSystem::solve(const Eigen::MatrixXd& form, const Field& u) const {
  const Eigen::VectorXd rhs = pack(u).cwiseProduct(mass);
  return unpack(grid, form.partialPivLu().solve(rhs));
}

Eigen::MatrixXd dense_complement(const DenseSystem& sys, const std::vector<Field>& constraints) {
  const Eigen::Index n = sys.mass.size();
  const Eigen::VectorXd sq = sys.mass.cwiseSqrt();
  // In the scaled coordinates y = M^{1/2} x the mass inner product is
  // Euclidean; a full QR of the constraint columns splits off the complement.
  Eigen::MatrixXd c(n, static_cast<Eigen::Index>(constraints.size()));
  for (std::size_t k = 0; k < constraints.size(); ++k)
    c.col(static_cast<Eigen::Index>(k)) = pack(constraints[k]).cwiseProduct(sq);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(c);
  const Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd z = q.rightCols(n - c.cols());
  return sq.cwiseInverse().asDiagonal() * z;
}

Eigen::VectorXd dense_constrained_eigs(const DenseSystem& sys, const Eigen::MatrixXd& a,
                                       const std::vector<Field>& constraints,
                                       const Eigen::MatrixXd* b) {
  const Eigen::MatrixXd z = dense_complement(sys, constraints);
  Eigen::MatrixXd ar = z.transpose() * a * z;
  ar = 0.5 * (ar + ar.transpose()).eval();
  if (!b) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(ar, Eigen::EigenvaluesOnly);
    return es.eigenvalues();
  }
  Eigen::MatrixXd br = z.transpose() * (*b) * z;
  br = 0.5 * (br + br.transpose()).eval();
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> es(ar, br, Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

}  // namespace gprg
