#include <doctest.h>

#include "gprg/error.hpp"
#include "gprg/oracle.hpp"
#include "gprg/riemannian.hpp"
#include "gprg/spectral.hpp"
#include "support.hpp"

using namespace gprg;
using gprg::test::rel;

namespace {

struct Small {
  OpsPtr ops;
  Field phi;
};

/// Converged rotating state on a coarse grid, small enough for dense algebra.
Small small_state(int n_r, int n_theta) {
  RunConfig c;
  c.grid = {n_r, n_theta, 6.0};
  c.problem = test::params(0.7, 60);
  c.initial = {InitialKind::perturbed, 1, 2, 0.2};
  StageConfig s;
  s.spec.precond.kind = PrecondKind::P3;
  s.spec.max_iters = 2000;
  s.spec.stop_residual = 1e-13;
  c.stages = {s};
  const OpsPtr ops = config_operators(c);
  return {ops, on_grid(solve(c).final_state, ops->grid_ptr())};
}

PreconditionerSpec spec_of(PrecondKind k) {
  PreconditionerSpec s;
  s.kind = k;
  s.sigma0 = 0.1;
  return s;
}

}  // namespace

TEST_SUITE("oracle") {

TEST_CASE("finite differences") {
  const GridPtr g = build_polar_grid(8, 16, 3.0);
  const OpsPtr lin = make_operators(g, test::params(0.4, 0));
  const Field phi = test::random_unit(g, 1), v = random_field(g, 2);
  CHECK(fd_directional(*lin, phi, Field(g), 1e-3, FdOrder::first) == 0.0);
  CHECK_THROWS_AS(fd_directional(*lin, phi, v, 0.0, FdOrder::first), UsageError);
  // The linear energy is quadratic, so both quotients are exact up to rounding.
  CHECK(rel(fd_directional(*lin, phi, v, 0.1, FdOrder::first), inner_l2(apply_h0(*lin, phi), v)) <= 1e-10);
  CHECK(rel(fd_directional(*lin, phi, v, 0.1, FdOrder::second), inner_l2(apply_h0(*lin, v), v)) <= 1e-10);
}

TEST_CASE("pack and unpack") {
  const GridPtr g = build_polar_grid(4, 16, 1.0);
  const Field u = random_field(g, 5);
  const Eigen::VectorXd x = pack(u);
  REQUIRE(x.size() == 128);
  CHECK(x(0) == u(0, 0).real());
  CHECK(x(64) == u(0, 0).imag());
  CHECK(x(17) == u(1, 1).real());
  CHECK(max_abs(unpack(g, x) - u) == 0.0);
}

TEST_CASE("dense forms reproduce the stencil operators") {
  for (auto [nr, nt] : {std::pair{8, 16}, {16, 32}}) {
    CAPTURE(nr);
    const GridPtr g = build_polar_grid(nr, nt, 5.0);
    const OpsPtr ops = make_operators(g, test::params(0.8, 300));
    const Field phi = test::random_unit(g, 3);
    const DenseSystem sys = assemble_dense(ops, phi);
    for (int i = 0; i < nr; ++i) {
      CHECK(sys.mass(i * nt) == g->weight(i));
      CHECK(sys.mass(nr * nt + i * nt + 1) == g->weight(i));
    }
    for (const Eigen::MatrixXd* m : {&sys.h0, &sys.h_phi, &sys.hessian}) CHECK(asymmetry(*m) <= 1e-12);
    for (std::uint64_t s = 0; s < 3; ++s) {
      const Field u = random_field(g, 10 + s);
      const Field a = apply_h0(*ops, u), b = apply_h_phi(*ops, phi, u), c = apply_hessian(*ops, phi, u);
      CHECK(max_abs(sys.apply(sys.h0, u) - a) <= 1e-12 * max_abs(a));
      CHECK(max_abs(sys.apply(sys.h_phi, u) - b) <= 1e-12 * max_abs(b));
      CHECK(max_abs(sys.apply(sys.hessian, u) - c) <= 1e-12 * max_abs(c));
      const double quad = pack(u).dot(sys.hessian * pack(u));
      CHECK(rel(quad, inner_l2(c, u)) <= 1e-12);
    }
  }
}

TEST_CASE("dense assembly refuses large grids") {
  const GridPtr g = build_polar_grid(65, 64, 5.0);
  const OpsPtr ops = make_operators(g, {});
  CHECK_THROWS_AS(assemble_dense(ops, test::random_unit(g, 1)), UsageError);
}

TEST_CASE("preconditioners, projection and gradient against dense algebra") {
  const Small s = small_state(8, 16);
  const GridPtr g = s.ops->grid_ptr();
  const Field w = random_field(g, 4);
  Field near = s.phi;
  near += smooth_perturbation(g, 2, 0.05);
  near = test::unit(near);
  for (PrecondKind k : {PrecondKind::P1, PrecondKind::P2, PrecondKind::P3, PrecondKind::P4}) {
    CAPTURE(to_string(k));
    const DenseSystem sys = assemble_dense(s.ops, near, spec_of(k));
    const Preconditioner h(spec_of(k), s.ops, near);
    CHECK(asymmetry(*sys.precond) <= 1e-12);
    const Field dense_inv = sys.solve(*sys.precond, w);
    CHECK(norm_l2(h.apply_inverse(w) - dense_inv) <= 1e-10 * norm_l2(dense_inv));

    const Field pinv_phi = sys.solve(*sys.precond, near);
    const Field pv = w - (inner_l2(near, w) / inner_l2(near, pinv_phi)) * pinv_phi;
    CHECK(norm_l2(project_tangent(near, w, h) - pv) <= 1e-10 * norm_l2(pv));

    const Field pinv_h = sys.solve(*sys.precond, sys.apply(sys.h_phi, near));
    const double lambda = inner_l2(near, pinv_h) / inner_l2(near, pinv_phi);
    const Field d = pinv_h - lambda * pinv_phi;
    const GradientResult gr = riemannian_gradient(*s.ops, near, h);
    CHECK(norm_l2(gr.direction - d) <= 1e-10 * norm_l2(d));
    CHECK(rel(gr.lambda, lambda) <= 1e-12);
  }
}

TEST_CASE("tangent eigenvalues and pencil extremes against dense algebra") {
  const Small s = small_state(8, 16);
  CHECK(residual_inf(*s.ops, s.phi) <= 1e-11);
  const DenseSystem sys = assemble_dense(s.ops, s.phi, spec_of(PrecondKind::P4));
  const Eigen::VectorXd dense = dense_constrained_eigs(sys, sys.hessian, {s.phi});
  const TangentEigs te = hessian_tangent_eigs(s.ops, s.phi, 5);
  REQUIRE(te.converged);
  for (int i = 0; i < 5; ++i) CHECK(std::abs(te.pairs[static_cast<std::size_t>(i)].value - dense(i)) <= 1e-9);

  const double lg = lambda_tilde(*s.ops, s.phi);
  const Eigen::MatrixXd shifted = sys.hessian - lg * Eigen::MatrixXd(sys.mass.asDiagonal());
  const std::vector<Field> cons = normal_space_constraints(*s.ops, s.phi);
  for (PrecondKind k : {PrecondKind::P1, PrecondKind::P3, PrecondKind::P4}) {
    CAPTURE(to_string(k));
    const DenseSystem pk = assemble_dense(s.ops, s.phi, spec_of(k));
    const Eigen::VectorXd pencil = dense_constrained_eigs(sys, shifted, cons, &*pk.precond);
    const PencilResult pr = pencil_extremes(s.ops, s.phi, Preconditioner(spec_of(k), s.ops, s.phi), 2);
    CHECK(rel(pr.mu, pencil(0)) <= 1e-6);
    CHECK(rel(pr.L, pencil(pencil.size() - 1)) <= 1e-6);
  }
}

TEST_CASE("dense complement is mass-orthonormal") {
  const Small s = small_state(8, 16);
  const DenseSystem sys = assemble_dense(s.ops, s.phi);
  const std::vector<Field> cons = normal_space_constraints(*s.ops, s.phi);
  const Eigen::MatrixXd q = dense_complement(sys, cons);
  CHECK(q.cols() == q.rows() - static_cast<Eigen::Index>(cons.size()));
  const Eigen::MatrixXd gram = q.transpose() * sys.mass.asDiagonal() * q;
  CHECK((gram - Eigen::MatrixXd::Identity(q.cols(), q.cols())).cwiseAbs().maxCoeff() <= 1e-12);
  for (const Field& c : cons)
    CHECK((q.transpose() * sys.mass.asDiagonal() * pack(c)).cwiseAbs().maxCoeff() <= 1e-12);
}

}
