#include <doctest.h>

#include "gprg/error.hpp"
#include "gprg/oracle.hpp"
#include "gprg/precond.hpp"
#include "support.hpp"

using namespace gprg;
using gprg::test::rel;

namespace {

PreconditionerSpec spec_of(PrecondKind kind, double sigma0 = 1e-3, double shift = 0.0) {
  PreconditionerSpec s;
  s.kind = kind;
  s.sigma0 = sigma0;
  s.shift_a = shift;
  return s;
}

constexpr PrecondKind kAll[] = {PrecondKind::P1, PrecondKind::P2, PrecondKind::P3, PrecondKind::P4};

}  // namespace

TEST_SUITE("precond") {

TEST_CASE("parse and print kinds") {
  for (PrecondKind k : kAll) CHECK(parse_precond_kind(to_string(k)) == k);
  CHECK(parse_precond_kind("p3") == PrecondKind::P3);
  CHECK_THROWS_AS(parse_precond_kind("P5"), ConfigError);
}

TEST_CASE("spec validation") {
  CHECK_NOTHROW(spec_of(PrecondKind::P4).validate());
  CHECK_THROWS_AS(spec_of(PrecondKind::P2, 1e-3, -1.0).validate(), ConfigError);
  CHECK_THROWS_AS(spec_of(PrecondKind::P4, 0.0).validate(), ConfigError);
  PreconditionerSpec s;
  s.inverse_tol = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.inverse_max_iter = 0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("forward operators match their definitions") {
  const GridPtr g = build_polar_grid(12, 32, 5.0);
  const OpsPtr ops = make_operators(g, test::params(0.8, 200));
  const Field phi = test::unit(initial_guess({InitialKind::perturbed, 1, 3, 0.2}, g, ops->params()));
  const Field u = random_field(g, 9);
  const double lt = lambda_tilde(*ops, phi);
  Field p1 = apply_h0(*ops, u);
  p1.axpy(0.8, apply_lz(*ops, u));
  Field p4 = apply_hessian(*ops, phi, u);
  p4.axpy(-(lt - 1e-2), u);
  const Field expect[] = {p1 + 0.25 * u, apply_h0(*ops, u) + 0.25 * u,
                          apply_h_phi(*ops, phi, u) + 0.25 * u, p4 + 0.25 * u};
  for (int k = 0; k < 4; ++k) {
    const Preconditioner p(spec_of(kAll[k], 1e-2, 0.25), ops, phi);
    CHECK(max_abs(p.apply(u) - expect[k]) <= 1e-12 * max_abs(expect[k]));
  }
}

TEST_CASE("inverse round trip and direct against Krylov") {
  const test::Fixture& fx = test::fixture();
  const Field w = random_field(fx.ops->grid_ptr(), 5);
  for (PrecondKind k : kAll) {
    CAPTURE(to_string(k));
    const Preconditioner p(spec_of(k, 0.1), fx.ops, fx.phi);
    const Field v = p.apply_inverse(w);
    CHECK(norm_l2(p.apply(v) - w) <= 1e-10 * norm_l2(w));
    const Field vk = p.apply_inverse_krylov(w);
    CHECK(norm_l2(v - vk) <= 1e-10 * norm_l2(v));
  }
}

TEST_CASE("P4 inverse on the phase direction") {
  const test::Fixture& fx = test::fixture();
  for (double s0 : {1e-3, 1e-2, 0.1}) {
    const Preconditioner p(spec_of(PrecondKind::P4, s0), fx.ops, fx.phi);
    const Field iphi = times_i(fx.phi);
    const Field v = p.apply_inverse(iphi);
    CHECK(norm_l2(v - (1.0 / s0) * iphi) <= 1e-6 / s0);
  }
}

TEST_CASE("symmetric and coercive at the ground state") {
  const test::Fixture& fx = test::fixture();
  const GridPtr g = fx.ops->grid_ptr();
  for (PrecondKind k : kAll) {
    CAPTURE(to_string(k));
    const Preconditioner p(spec_of(k, 1e-2), fx.ops, fx.phi);
    for (std::uint64_t s = 0; s < 5; ++s) {
      const Field u = random_field(g, s), v = random_field(g, 50 + s);
      CHECK(rel(inner_l2(p.apply(u), v), inner_l2(u, p.apply(v))) <= 1e-11);
      CHECK(inner_l2(p.apply(u), u) > 0.0);
    }
  }
}

TEST_CASE("dense preconditioner spectra are positive") {
  const GridPtr g = build_polar_grid(8, 16, 6.0);
  const OpsPtr ops = make_operators(g, test::params(0.7, 60));
  RunConfig c;
  c.grid = {8, 16, 6.0};
  c.problem = ops->params();
  c.initial = {InitialKind::perturbed, 0, 1, 0.3};
  StageConfig st;
  st.spec.precond.kind = PrecondKind::P3;
  st.spec.max_iters = 500;
  st.spec.stop_residual = 1e-12;
  c.stages = {st};
  const Field phi = solve(c).final_state;
  for (PrecondKind k : kAll) {
    CAPTURE(to_string(k));
    const DenseSystem sys = assemble_dense(ops, phi, spec_of(k, 1e-3));
    CHECK(asymmetry(*sys.precond) <= 1e-12);
    const Eigen::VectorXd ev = dense_constrained_eigs(sys, *sys.precond, {});
    CHECK(ev(0) > 0.0);
  }
}

TEST_CASE("rotation equivariance") {
  const test::Fixture& fx = test::fixture();
  const Field w = random_field(fx.ops->grid_ptr(), 8);
  const int k = 9;
  for (PrecondKind kind : kAll) {
    CAPTURE(to_string(kind));
    const Preconditioner a(spec_of(kind, 0.1), fx.ops, fx.phi);
    const Preconditioner b(spec_of(kind, 0.1), fx.ops, rotate_by_index(fx.phi, k));
    const Field lhs = b.apply(rotate_by_index(w, k));
    CHECK(max_abs(lhs - rotate_by_index(a.apply(w), k)) <= 1e-12 * max_abs(lhs));
    const Field inv = b.apply_inverse(rotate_by_index(w, k));
    CHECK(norm_l2(inv - rotate_by_index(a.apply_inverse(w), k)) <= 1e-9 * norm_l2(inv));
  }
}

TEST_CASE("P4 away from a minimizer is rejected") {
  const GridPtr g = build_polar_grid(16, 32, 6.0);
  const OpsPtr ops = make_operators(g, test::params(0.7, 60));
  const Field phi = test::random_unit(g, 4);
  const Field w = random_field(g, 5);
  CHECK_THROWS_AS(Preconditioner(spec_of(PrecondKind::P4, 1e-3), ops, phi).apply_inverse(w),
                  NotCoerciveError);
}

TEST_CASE("state on a different grid is a usage error") {
  const OpsPtr ops = make_operators(build_polar_grid(8, 16, 2.0), {});
  const Field phi = test::random_unit(build_polar_grid(8, 32, 2.0), 1);
  CHECK_THROWS_AS(Preconditioner(spec_of(PrecondKind::P3), ops, phi), UsageError);
}

TEST_CASE("mode solver matches the stencil operator") {
  const GridPtr g = build_polar_grid(20, 64, 6.0);
  const OpsPtr ops = make_operators(g, test::params(0.6, 0));
  std::vector<double> extra(20);
  for (int i = 0; i < 20; ++i) extra[static_cast<std::size_t>(i)] = 1.0 + std::sin(g->r(i));
  const ModeSolver ms(*ops, 1.0, 0.3, extra);
  const Field u = random_field(g, 2);
  Field expect = apply_h0(*ops, u);
  for (int i = 0; i < 20; ++i)
    for (int j = 0; j < 64; ++j) expect(i, j) += (0.3 + extra[static_cast<std::size_t>(i)]) * u(i, j);
  Field out(g);
  ms.apply(u, out);
  CHECK(max_abs(out - expect) <= 1e-11 * max_abs(expect));
  Field back(g);
  ms.solve(expect, back);
  CHECK(max_abs(back - u) <= 1e-11 * max_abs(u));
}

TEST_CASE("solve statistics are reported") {
  const test::Fixture& fx = test::fixture();
  const Preconditioner p(spec_of(PrecondKind::P3), fx.ops, fx.phi);
  SolveStats st;
  (void)p.apply_inverse(random_field(fx.ops->grid_ptr(), 3), nullptr, &st);
  CHECK(st.iterations > 0);
  CHECK(st.relative_residual <= 1e-10);
}

}
