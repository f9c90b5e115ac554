#include "gprg/lobpcg.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "gprg/error.hpp"

namespace gprg {

void project_out(Field& v, const std::vector<Field>& constraints) {
  for (const Field& c : constraints) v.axpy(-inner_l2(v, c), c);
}

std::vector<Field> orthonormalize(std::vector<Field> vectors, double drop_tol) {
  std::vector<Field> out;
  for (Field& v : vectors) {
    const double n0 = norm_l2(v);
    if (n0 == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) project_out(v, out);
    const double n = norm_l2(v);
    if (n <= drop_tol * n0) continue;
    v *= 1.0 / n;
    out.push_back(std::move(v));
  }
  return out;
}

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Block {
  std::vector<Field> x, ax, bx;
  std::size_t size() const { return x.size(); }
};

std::vector<Field> combine(const std::vector<const Field*>& basis, const MatrixXd& c) {
  std::vector<Field> out;
  out.reserve(static_cast<std::size_t>(c.cols()));
  for (Eigen::Index j = 0; j < c.cols(); ++j) {
    Field f(basis.front()->grid_ptr());
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      if (c(i, j) != 0.0) f.axpy(c(i, j), *basis[static_cast<std::size_t>(i)]);
    out.push_back(std::move(f));
  }
  return out;
}

MatrixXd gram(const std::vector<const Field*>& u, const std::vector<const Field*>& v) {
  MatrixXd g(u.size(), v.size());
  for (std::size_t i = 0; i < u.size(); ++i)
    for (std::size_t j = 0; j < v.size(); ++j) g(i, j) = inner_l2(*u[i], *v[j]);
  return g;
}

// Returns Q with Q^T G Q = I on the numerically independent part of G.
MatrixXd svqb(const MatrixXd& g) {
  const Eigen::Index n = g.rows();
  VectorXd d(n);
  for (Eigen::Index i = 0; i < n; ++i) d(i) = g(i, i) > 0.0 ? 1.0 / std::sqrt(g(i, i)) : 0.0;
  MatrixXd scaled = d.asDiagonal() * g * d.asDiagonal();
  scaled = 0.5 * (scaled + scaled.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(scaled);
  const VectorXd& lam = es.eigenvalues();
  const double top = lam.maxCoeff();
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < n; ++i)
    if (lam(i) > 1e-12 * top) keep.push_back(i);
  MatrixXd q(n, static_cast<Eigen::Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k)
    q.col(static_cast<Eigen::Index>(k)) =
        d.asDiagonal() * es.eigenvectors().col(keep[k]) / std::sqrt(lam(keep[k]));
  return q;
}

}  // namespace

LobpcgResult lobpcg(const FieldMap& A_in, const FieldMap& B, const FieldMap& T,
                    const std::vector<Field>& constraints, std::vector<Field> initial, int nev,
                    const LobpcgOptions& options) {
  const std::size_t m = initial.size();
  if (nev < 1 || static_cast<std::size_t>(nev) > m)
    throw UsageError("lobpcg needs 1 <= nev <= block size");
  const double sign = options.largest ? -1.0 : 1.0;
  auto apply_a = [&](const Field& in, Field& out) {
    A_in(in, out);
    if (sign < 0.0) out *= -1.0;
  };
  auto apply_b = [&](const Field& in, Field& out) {
    if (B) B(in, out);
    else out = in;
  };
  auto fill = [&](std::vector<Field>& xs) {
    Block b;
    for (Field& v : xs) project_out(v, constraints);
    b.x = std::move(xs);
    for (const Field& v : b.x) {
      Field av(v.grid_ptr()), bv(v.grid_ptr());
      apply_a(v, av);
      apply_b(v, bv);
      b.ax.push_back(std::move(av));
      b.bx.push_back(std::move(bv));
    }
    return b;
  };

  auto ptrs = [](const std::vector<const Block*>& blocks, int which) {
    std::vector<const Field*> out;
    for (const Block* b : blocks) {
      const auto& src = which == 0 ? b->x : which == 1 ? b->ax : b->bx;
      for (const Field& f : src) out.push_back(&f);
    }
    return out;
  };

  Block X = fill(initial);
  Block P;
  VectorXd theta;
  LobpcgResult result;
  std::vector<double> res(m, 1.0);

  Block W;
  for (int iter = 0; iter <= options.max_iter; ++iter) {
    // Rayleigh-Ritz on span{X, W, P}.
    std::vector<const Block*> blocks{&X};
    if (W.size()) blocks.push_back(&W);
    if (P.size()) blocks.push_back(&P);
    const auto sx = ptrs(blocks, 0), sa = ptrs(blocks, 1), sb = ptrs(blocks, 2);
    MatrixXd gb = gram(sx, sb);
    gb = 0.5 * (gb + gb.transpose()).eval();
    MatrixXd ga = gram(sx, sa);
    ga = 0.5 * (ga + ga.transpose()).eval();
    const MatrixXd q = svqb(gb);
    if (q.cols() < static_cast<Eigen::Index>(m)) {
      if (P.size()) {
        // Drop the search directions and retry with a smaller basis.
        P = Block{};
        continue;
      }
      throw SolverError("lobpcg basis lost rank");
    }
    MatrixXd red = q.transpose() * ga * q;
    red = 0.5 * (red + red.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(red);
    const MatrixXd c = q * es.eigenvectors().leftCols(static_cast<Eigen::Index>(m));
    theta = es.eigenvalues().head(static_cast<Eigen::Index>(m));

    Block Xn;
    Xn.x = combine(sx, c);
    Xn.ax = combine(sa, c);
    Xn.bx = combine(sb, c);
    if (W.size() || P.size()) {
      // P = the non-X part of the update.
      std::vector<const Block*> rest;
      if (W.size()) rest.push_back(&W);
      if (P.size()) rest.push_back(&P);
      const MatrixXd cr = c.bottomRows(c.rows() - static_cast<Eigen::Index>(X.size()));
      Block Pn;
      Pn.x = combine(ptrs(rest, 0), cr);
      Pn.ax = combine(ptrs(rest, 1), cr);
      Pn.bx = combine(ptrs(rest, 2), cr);
      P = std::move(Pn);
    }
    X = std::move(Xn);
    for (Field& v : X.x) project_out(v, constraints);

    // Residuals and convergence.
    std::vector<Field> r_active;
    std::vector<std::size_t> active;
    bool all_conv = true;
    for (std::size_t i = 0; i < m; ++i) {
      Field r = X.ax[i];
      r.axpy(-theta(static_cast<Eigen::Index>(i)), X.bx[i]);
      // The operator is compressed to the complement of the constraints.
      project_out(r, constraints);
      const double scale =
          std::max(norm_l2(X.ax[i]), std::abs(theta(static_cast<Eigen::Index>(i))) * norm_l2(X.bx[i]));
      res[i] = scale > 0.0 ? norm_l2(r) / scale : 0.0;
      if (res[i] > options.tol) {
        if (static_cast<int>(i) < nev) all_conv = false;
        active.push_back(i);
        r_active.push_back(std::move(r));
      }
    }
    result.iterations = iter;
    if (all_conv) {
      result.converged = true;
      break;
    }
    if (iter == options.max_iter) break;

    std::vector<Field> w;
    for (Field& r : r_active) {
      Field z(r.grid_ptr());
      if (T) T(r, z);
      else z = r;
      // Shift-invert preconditioners return mostly the Ritz vector itself;
      // removing the X part explicitly keeps the new direction resolved.
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t i = 0; i < m; ++i) z.axpy(-inner_l2(z, X.bx[i]), X.x[i]);
      const double nz = norm_l2(z);
      if (nz > 0.0) z *= 1.0 / nz;
      w.push_back(std::move(z));
    }
    W = fill(w);
    // Keep only the P directions of active vectors.
    if (P.size()) {
      Block Pa;
      for (std::size_t i : active) {
        Pa.x.push_back(std::move(P.x[i]));
        Pa.ax.push_back(std::move(P.ax[i]));
        Pa.bx.push_back(std::move(P.bx[i]));
      }
      P = std::move(Pa);
    }
  }

  for (int i = 0; i < nev; ++i) {
    result.values.push_back(sign * theta(i));
    result.vectors.push_back(X.x[static_cast<std::size_t>(i)]);
    result.residuals.push_back(res[static_cast<std::size_t>(i)]);
  }
  return result;
}

}  // namespace gprg
