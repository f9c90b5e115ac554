#include <doctest.h>

#include <json.hpp>

#include "gprg/error.hpp"
#include "gprg/spectral.hpp"
#include "support.hpp"

using namespace gprg;
using gprg::test::rel;

namespace {

struct FixtureSpectrum {
  TangentEigs tangent;
  SymmetryBasis symmetry;
};

const FixtureSpectrum& fixture_spectrum() {
  static const FixtureSpectrum s = [] {
    const test::Fixture& fx = test::fixture();
    return FixtureSpectrum{hessian_tangent_eigs(fx.ops, fx.phi, 5), symmetry_basis(*fx.ops, fx.phi)};
  }();
  return s;
}

Field project_normal(Field v, const std::vector<Field>& constraints) {
  for (const Field& c : constraints) v.axpy(-inner_l2(v, c), c);
  return v;
}

}  // namespace

TEST_SUITE("spectral") {

TEST_CASE("theoretical rates reproduce the tabulated values") {
  const RateEstimate p4 = theoretical_rate(0.17397014, 1.0, PrecondKind::P4);
  CHECK(std::abs(p4.tau_star - 1.70362084) <= 1e-8);
  CHECK(std::abs(p4.rho - 0.70362084) <= 1e-8);
  const RateEstimate p3 = theoretical_rate(3.168e-5, 1.65411833, PrecondKind::P3);
  CHECK(std::abs(p3.rho - 0.99999042) <= 1e-8);
  CHECK(rel(p3.tau_star, 1.0 / 1.65411833) <= 1e-15);
  CHECK_THROWS_AS(theoretical_rate(0.0, 1.0, PrecondKind::P1), UsageError);
  CHECK_THROWS_AS(theoretical_rate(2.0, 1.0, PrecondKind::P2), UsageError);
}

TEST_CASE("P4 closed form") {
  CHECK(rel(p4_mu_closed_form(6.68344588, 6.68323527, 1e-3), 0.17397014) <= 1e-5);
  CHECK(rel(p4_mu_closed_form(2.0, 1.0, 1.0), 0.5) <= 1e-15);
}

TEST_CASE("tangent spectrum at the fixture") {
  const test::Fixture& fx = test::fixture();
  const FixtureSpectrum& s = fixture_spectrum();
  REQUIRE(s.tangent.converged);
  REQUIRE(s.tangent.pairs.size() == 5);
  CHECK(s.symmetry.dim == 2);
  for (std::size_t i = 0; i < 5; ++i) {
    const EigenPair& p = s.tangent.pairs[i];
    CHECK(std::abs(inner_l2(p.vector, fx.phi)) <= 1e-10);
    CHECK(std::abs(norm_l2(p.vector) - 1.0) <= 1e-10);
    const double rq = inner_l2(apply_hessian(*fx.ops, fx.phi, p.vector), p.vector);
    CHECK(rel(rq, p.value) <= 1e-10);
    if (i > 0) CHECK(p.value >= s.tangent.pairs[i - 1].value - 1e-12);
  }
  CHECK(rel(s.tangent.pairs[0].value, fx.lambda) <= 1e-8);
  CHECK(rel(s.tangent.pairs[1].value, fx.lambda) <= 1e-8);
  const MorseBottVerdict mb = morse_bott_check(fx.lambda, s.tangent.pairs, s.symmetry, 1e-6, 1e-5);
  CHECK(mb.is_morse_bott);
  CHECK(mb.gap > 1e-3);
  for (double a : mb.angles) CHECK(a <= 1e-4);
}

TEST_CASE("synthetic Morse-Bott violations") {
  const FixtureSpectrum& s = fixture_spectrum();
  const double lg = test::fixture().lambda;
  std::vector<EigenPair> eigs = s.tangent.pairs;
  eigs[1].value = lg * (1 + 1e-3);
  MorseBottVerdict v = morse_bott_check(lg, eigs, s.symmetry, 1e-6, 1e-5);
  CHECK_FALSE(v.lambda2_ok);
  CHECK_FALSE(v.is_morse_bott);
  eigs = s.tangent.pairs;
  eigs[2].value = lg + 1e-7;
  v = morse_bott_check(lg, eigs, s.symmetry, 1e-6, 1e-5);
  CHECK_FALSE(v.gap_ok);
  eigs = s.tangent.pairs;
  std::swap(eigs[1].vector, eigs[2].vector);
  v = morse_bott_check(lg, eigs, s.symmetry, 1e-6, 1e-5);
  CHECK_FALSE(v.alignment_ok);
  CHECK_FALSE(v.is_morse_bott);
  CHECK_THROWS_AS(morse_bott_check(lg, {eigs[0], eigs[1]}, s.symmetry, 1e-6, 1e-5), UsageError);
}

TEST_CASE("radially symmetric state has a one-dimensional symmetry orbit") {
  const GridPtr g = build_polar_grid(16, 32, 8.0);
  const OpsPtr ops = make_operators(g, {});
  StageSpec st;
  st.precond.kind = PrecondKind::P2;
  st.stop_residual = 1e-12;
  const Field phi = run({st}, ops, test::oscillator_ground(g)).final_state;
  REQUIRE(residual_inf(*ops, phi) <= 1e-12);
  const SymmetryBasis sb = symmetry_basis(*ops, phi);
  CHECK(sb.dim == 1);
  const TangentEigs te = hessian_tangent_eigs(ops, phi, 3);
  const MorseBottVerdict v = morse_bott_check(lambda_tilde(*ops, phi), te.pairs, sb, 1e-3, 1e-5);
  CHECK_FALSE(v.applicable);
  CHECK_FALSE(v.is_morse_bott);
  CHECK(normal_space_constraints(*ops, phi).size() == 2);
}

TEST_CASE("principal angles") {
  const GridPtr g = build_polar_grid(8, 16, 2.0);
  const Field a = random_field(g, 1), b = random_field(g, 2);
  const std::vector<double> same = principal_angles({a, b}, {a + b, a - 2.0 * b});
  for (double x : same) CHECK(x <= 1e-7);
  Field c = b;
  c.axpy(-inner_l2(c, a) / inner_l2(a, a), a);
  const std::vector<double> orth = principal_angles({a}, {c});
  CHECK(std::abs(orth[0] - std::numbers::pi / 2) <= 1e-12);
}

TEST_CASE("pencil extremes bracket random Rayleigh quotients") {
  const test::Fixture& fx = test::fixture();
  const std::vector<Field> cons = normal_space_constraints(*fx.ops, fx.phi);
  const FixtureSpectrum& s = fixture_spectrum();
  std::vector<Field> guesses{s.tangent.pairs[2].vector, s.tangent.pairs[3].vector};
  for (PrecondKind k : {PrecondKind::P2, PrecondKind::P4}) {
    CAPTURE(to_string(k));
    PreconditionerSpec ps;
    ps.kind = k;
    ps.sigma0 = 1e-2;
    const Preconditioner h(ps, fx.ops, fx.phi);
    const PencilResult pr = pencil_extremes(fx.ops, fx.phi, h, 2, {}, guesses);
    CHECK(pr.symmetry_dim == 2);
    REQUIRE(pr.mu > 0.0);
    REQUIRE(pr.L >= pr.mu);
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const Field v = project_normal(seed % 2 ? random_field(fx.ops->grid_ptr(), seed)
                                              : smooth_perturbation(fx.ops->grid_ptr(), seed, 1.0),
                                     cons);
      Field hv = apply_hessian(*fx.ops, fx.phi, v);
      hv.axpy(-fx.lambda, v);
      const double q = inner_l2(hv, v) / inner_l2(h.apply(v), v);
      CHECK(q >= pr.mu * (1 - 1e-6));
      CHECK(q <= pr.L * (1 + 1e-6));
    }
    if (k == PrecondKind::P4) {
      const double closed = p4_mu_closed_form(s.tangent.pairs[2].value, fx.lambda, 1e-2);
      CHECK(rel(pr.mu, closed) <= 1e-4);
      CHECK(std::abs(pr.L - 1.0) <= 1e-3);
    }
  }
}

TEST_CASE("report JSON") {
  SpectrumReport r;
  r.lambda_g = 6.5;
  r.eigs = {6.5, 6.5, 6.6};
  r.mu = 0.1;
  r.L = 1.0;
  r.precond_kind = PrecondKind::P4;
  r.sigma0 = 1e-3;
  r.mu_closed_form = 0.099;
  r.flags = {"mu_not_converged"};
  const auto j = nlohmann::json::parse(r.to_json());
  for (const char* key : {"lambda_g", "eig_1", "eig_2", "eig_3", "gap", "is_morse_bott", "mu", "L",
                          "tau_star", "rho", "precond_kind", "flags", "sigma0", "mu_closed_form"})
    CHECK_MESSAGE(j.contains(key), key);
  CHECK(j["precond_kind"] == "P4");
  CHECK(j["flags"][0] == "mu_not_converged");
  CHECK(j["eig_3"].get<double>() == 6.6);
  r.mu_closed_form.reset();
  CHECK_FALSE(nlohmann::json::parse(r.to_json()).contains("mu_closed_form"));
}

}
