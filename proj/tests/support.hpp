#pragma once

#include <cmath>
#include <numbers>

#include "gprg/driver.hpp"
#include "gprg/grid.hpp"
#include "gprg/operators.hpp"
#include "gprg/random.hpp"
#include "gprg/solver.hpp"

namespace gprg::test {

inline double rel(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

inline double max_diff(const Field& a, const Field& b) { return max_abs(a - b); }

inline Field unit(Field u) {
  u *= 1.0 / norm_l2(u);
  return u;
}

inline Field random_unit(const GridPtr& g, std::uint64_t seed) { return unit(random_field(g, seed)); }

/// Normalized ground state e^{-r^2/2}/sqrt(pi) of -1/2 Lap + r^2/2.
inline Field oscillator_ground(const GridPtr& g) {
  return sample(g, [](double r, double) {
    return Complex(std::exp(-0.5 * r * r) / std::sqrt(std::numbers::pi), 0.0);
  });
}

inline ProblemParams params(double omega, double eta) {
  ProblemParams p;
  p.omega = omega;
  p.eta = eta;
  return p;
}

/// Small rotating condensate with a vortex pair, converged to residual
/// 1e-12. Computed once per process.
struct Fixture {
  OpsPtr ops;
  Field phi;
  double lambda = 0.0;
};

inline const Fixture& fixture() {
  static const Fixture fx = [] {
    RunConfig c;
    c.grid = {24, 64, 8.0};
    c.problem = params(0.7, 60.0);
    c.initial = {InitialKind::perturbed, 0, 1, 0.3};
    StageConfig s1, s2;
    s1.spec.precond.kind = PrecondKind::P3;
    s1.spec.max_iters = 400;
    s1.spec.stop_residual = 1e-5;
    s2.spec.precond.kind = PrecondKind::P4;
    s2.spec.precond.sigma0 = 0.1;
    s2.spec.max_iters = 400;
    s2.spec.stop_residual = 1e-12;
    c.stages = {s1, s2};
    const SolveOutcome r = solve(c);
    OpsPtr ops = config_operators(c);
    return Fixture{ops, on_grid(r.final_state, ops->grid_ptr()), r.lambda};
  }();
  return fx;
}

}  // namespace gprg::test
