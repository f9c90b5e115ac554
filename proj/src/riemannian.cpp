#include "gprg/riemannian.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "gprg/error.hpp"

namespace gprg {

void StepPolicy::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("step tau must be positive");
  if (mode == StepMode::backtracking) {
    if (!(shrink > 0.0 && shrink < 1.0)) throw ConfigError("step shrink must lie in (0, 1)");
    if (!(armijo > 0.0 && armijo < 1.0)) throw ConfigError("step armijo must lie in (0, 1)");
    if (max_halvings < 1) throw ConfigError("step max_halvings must be positive");
  }
  if (mode == StepMode::exact_1d) {
    if (!(growth > 1.0)) throw ConfigError("step growth must exceed 1");
    if (!(tol > 0.0 && tol < 1.0)) throw ConfigError("step tol must lie in (0, 1)");
  }
}

std::string_view to_string(StepMode mode) {
  switch (mode) {
    case StepMode::fixed: return "fixed";
    case StepMode::backtracking: return "backtracking";
    case StepMode::exact_1d: return "exact_1d";
  }
  return "?";
}

StepMode parse_step_mode(std::string_view text) {
  if (text == "fixed") return StepMode::fixed;
  if (text == "backtracking") return StepMode::backtracking;
  if (text == "exact_1d" || text == "exact") return StepMode::exact_1d;
  throw ConfigError("unknown step mode '" + std::string(text) +
                    "' (expected fixed, backtracking or exact_1d)");
}

namespace {

constexpr double kDegenerate = 1e-14;

double metric_denominator(const Field& state, const Field& p_inv_state) {
  const double den = inner_l2(state, p_inv_state);
  if (!(std::abs(den) >= kDegenerate) || den < 0.0)
    throw NotCoerciveError("degenerate projection denominator (phi, P^-1 phi) = " +
                           std::to_string(den));
  return den;
}

}  // namespace

Field project_tangent(const Field& state, const Field& v, const Field& p_inv_state) {
  require_same_grid(state, v);
  const double den = metric_denominator(state, p_inv_state);
  Field out = v;
  out.axpy(-inner_l2(state, v) / den, p_inv_state);
  return out;
}

Field project_tangent(const Field& state, const Field& v, const Preconditioner& handle) {
  return project_tangent(state, v, handle.apply_inverse(state));
}

GradientResult riemannian_gradient(const OperatorSet& ops, const Field& state,
                                   const Preconditioner& handle, const Field* h_state,
                                   const GradientResult* warm) {
  const Field hphi = h_state ? *h_state : euclidean_gradient(ops, state);
  const double lt = inner_l2(hphi, state);
  Field residual = hphi;
  residual.axpy(-lt, state);

  GradientResult out;
  SolveStats stats;
  const bool warm_ok = warm && !warm->p_inv_state.empty();
  out.p_inv_state =
      handle.apply_inverse(state, warm_ok ? &warm->p_inv_state : nullptr, &stats);
  out.inner_iterations += stats.iterations;
  out.p_inv_residual =
      handle.apply_inverse(residual, warm_ok ? &warm->p_inv_residual : nullptr, &stats);
  out.inner_iterations += stats.iterations;

  const double den = metric_denominator(state, out.p_inv_state);
  const double c = inner_l2(state, out.p_inv_residual) / den;
  out.lambda = lt + c;
  out.direction = out.p_inv_residual;
  out.direction.axpy(-c, out.p_inv_state);
  // P d = r - c phi and (phi, d) = 0, so <P d, d> = <r, d>.
  out.dnorm_p_sq = inner_l2(residual, out.direction);
  return out;
}

Field retract(const Field& state, const Field& v, double tau) {
  require_same_grid(state, v);
  if (tau == 0.0) return state;
  Field out = state;
  out.axpy(tau, v);
  const double n = norm_l2(out);
  if (!(n > 1e-14)) throw SolverError("retraction of a vanishing field");
  out *= 1.0 / n;
  return out;
}

namespace {

struct Trial {
  double tau;
  double change;
  Field field;
};

Trial evaluate(const OperatorSet& ops, const Field& state, const Field& direction, double tau) {
  Field f = retract(state, direction, -tau);
  const double change = energy_difference(ops, f, state);
  return {tau, change, std::move(f)};
}

StepChoice accept(Trial t, int evaluations) {
  return {t.tau, std::move(t.field), t.change, evaluations};
}

StepChoice exact_search(const OperatorSet& ops, const Field& state, const Field& direction,
                        const StepPolicy& policy) {
  int evals = 0;
  auto eval = [&](double tau) {
    ++evals;
    return evaluate(ops, state, direction, tau);
  };
  constexpr int kMaxBracket = 80;

  // Bracket lo < mid < hi with g(mid) below both ends; g(0) = 0.
  double lo = 0.0, g_lo = 0.0;
  Trial mid = eval(policy.tau);
  Trial best = mid;
  double hi, g_hi;
  if (mid.change < 0.0) {
    Trial next = eval(mid.tau * policy.growth);
    int k = 0;
    while (next.change < mid.change && k++ < kMaxBracket) {
      lo = mid.tau;
      g_lo = mid.change;
      mid = std::move(next);
      next = eval(mid.tau * policy.growth);
    }
    hi = next.tau;
    g_hi = next.change;
    if (next.change < mid.change) mid = std::move(next);
  } else {
    int k = 0;
    hi = mid.tau;
    g_hi = mid.change;
    mid = eval(mid.tau * 0.5);
    while (!(mid.change < 0.0) && k++ < kMaxBracket) {
      hi = mid.tau;
      g_hi = mid.change;
      mid = eval(mid.tau * 0.5);
    }
    if (!(mid.change < 0.0))
      throw SolverError("exact line search found no energy decrease along the direction");
  }
  (void)g_lo;
  (void)g_hi;
  if (mid.change < best.change) best = mid;

  // Golden-section search on [lo, hi].
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  Trial t1 = eval(x1);
  Trial t2 = eval(x2);
  while (b - a > policy.tol * b) {
    if (t1.change < t2.change) {
      b = x2;
      x2 = x1;
      t2 = std::move(t1);
      x1 = b - invphi * (b - a);
      t1 = eval(x1);
    } else {
      a = x1;
      x1 = x2;
      t1 = std::move(t2);
      x2 = a + invphi * (b - a);
      t2 = eval(x2);
    }
  }
  if (t1.change < best.change) best = std::move(t1);
  if (t2.change < best.change) best = std::move(t2);
  return accept(std::move(best), evals);
}

}  // namespace

StepChoice select_step(const OperatorSet& ops, const Field& state, const Field& direction,
                       double dnorm_p_sq, const StepPolicy& policy) {
  require_same_grid(state, direction);
  if (max_abs(direction) == 0.0) return {policy.tau, state, 0.0, 0};

  switch (policy.mode) {
    case StepMode::fixed:
      return accept(evaluate(ops, state, direction, policy.tau), 1);
    case StepMode::backtracking: {
      double tau = policy.tau;
      double best_change = 0.0;
      for (int k = 0; k <= policy.max_halvings; ++k) {
        Trial t = evaluate(ops, state, direction, tau);
        if (t.change <= -policy.armijo * tau * dnorm_p_sq) return accept(std::move(t), k + 1);
        best_change = k == 0 ? t.change : std::min(best_change, t.change);
        tau *= policy.shrink;
      }
      throw SolverError("backtracking found no sufficient decrease after " +
                        std::to_string(policy.max_halvings) +
                        " reductions (best energy change " + std::to_string(best_change) +
                        ", <Pd,d> = " + std::to_string(dnorm_p_sq) +
                        "); the direction is not a descent direction");
    }
    case StepMode::exact_1d:
      return exact_search(ops, state, direction, policy);
  }
  throw UsageError("unknown step mode");
}

}  // namespace gprg
