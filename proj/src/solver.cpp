#include "gprg/solver.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "gprg/error.hpp"
#include "gprg/random.hpp"

namespace gprg {

void StageSpec::validate() const {
  precond.validate();
  policy.validate();
  if (max_iters < 0) throw ConfigError("stage max_iters must be non-negative");
  if (!std::isfinite(stop_residual) || !std::isfinite(stop_energy_delta) ||
      !std::isfinite(stop_energy_gap))
    throw ConfigError("stage stop thresholds must be finite");
}

std::string_view to_string(StopStatus status) {
  switch (status) {
    case StopStatus::residual_met: return "residual_met";
    case StopStatus::energy_delta_met: return "energy_delta_met";
    case StopStatus::energy_gap_met: return "energy_gap_met";
    case StopStatus::max_iters: return "max_iters";
    case StopStatus::error: return "error";
  }
  return "?";
}

std::string ConvergenceRecord::to_csv() const {
  std::string out = "n,energy,lambda,residual_inf,tau,dnorm_P,wall_s\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.n, r.energy,
                  r.lambda, r.residual_inf, r.tau, r.dnorm_p, r.wall_s);
    out += buf;
  }
  return out;
}

std::string_view to_string(InitialKind kind) {
  switch (kind) {
    case InitialKind::gaussian: return "gaussian";
    case InitialKind::gaussian_winding: return "gaussian_winding";
    case InitialKind::perturbed: return "perturbed";
  }
  return "?";
}

InitialKind parse_initial_kind(std::string_view text) {
  if (text == "gaussian") return InitialKind::gaussian;
  if (text == "gaussian_winding") return InitialKind::gaussian_winding;
  if (text == "perturbed") return InitialKind::perturbed;
  throw ConfigError("unknown initial kind '" + std::string(text) +
                    "' (expected gaussian, gaussian_winding or perturbed)");
}

namespace {

double gaussian_width(const GridPtr& grid, const ProblemParams& params) {
  if (params.potential.kind != PotentialKind::harmonic) return grid->radius() / 4.0;
  if (params.eta <= 0.0) return 1.0;
  const double w2 = std::max(1.0 - params.omega * params.omega, 0.05);
  const double mu = std::sqrt(w2 * params.eta / std::numbers::pi);
  const double r_tf = std::sqrt(2.0 * mu / w2);
  return std::max(1.0, 0.5 * r_tf);
}

}  // namespace

Field initial_guess(const InitialSpec& spec, const GridPtr& grid, const ProblemParams& params) {
  const double s = gaussian_width(grid, params);
  const int m = spec.kind == InitialKind::gaussian ? 0 : spec.m;
  Field out = sample(grid, [&](double r, double t) {
    const double g = std::pow(r / s, std::abs(m)) * std::exp(-r * r / (2.0 * s * s));
    return g * std::polar(1.0, m * t);
  });
  if (spec.kind == InitialKind::perturbed) {
    Normal normal(spec.seed);
    for (auto& z : out.values()) {
      const double a = normal();
      const double b = normal();
      z *= Complex(1.0 + spec.amplitude * a, spec.amplitude * b);
    }
  }
  out *= 1.0 / norm_l2(out);
  return out;
}

Field smooth_perturbation(const GridPtr& grid, std::uint64_t seed, double h1_norm) {
  constexpr int kModes = 4;
  constexpr int kRadial = 4;
  Normal normal(seed);
  const double R = grid->radius();
  Field out(grid);
  for (int m = -kModes; m <= kModes; ++m)
    for (int k = 1; k <= kRadial; ++k) {
      const double scale = 1.0 / (1.0 + std::abs(m) + k);
      const Complex c(normal() * scale, normal() * scale);
      out += sample(grid, [&](double r, double t) {
        const double g = std::pow(r / R, std::abs(m)) * std::cos((k - 0.5) * std::numbers::pi * r / R);
        return c * g * std::polar(1.0, m * t);
      });
    }
  out *= h1_norm / norm_h1_discrete(out);
  return out;
}

namespace {

double energy_from_h(const OperatorSet& ops, const Field& state, const Field& h_state) {
  // E = 1/2 <H_phi phi, phi> - 1/2 sum w f(rho) rho + 1/2 sum w F(rho)
  const PolarGrid& g = ops.grid();
  double correction = 0.0;
  for (int i = 0; i < g.n_r(); ++i) {
    double s = 0.0;
    for (const auto& z : state.row(i)) {
      const double rho = std::norm(z);
      s += ops.big_f(rho) - ops.f(rho) * rho;
    }
    correction += g.weight(i) * s;
  }
  return 0.5 * (inner_l2(h_state, state) + correction);
}

double residual_from_h(const Field& state, const Field& h_state, double lambda) {
  double m = 0.0;
  const auto hv = h_state.values();
  const auto sv = state.values();
  for (std::size_t k = 0; k < hv.size(); ++k) m = std::max(m, std::abs(hv[k] - lambda * sv[k]));
  return m;
}

}  // namespace

IterationState make_iteration_state(const OperatorSet& ops, Field state) {
  IterationState s;
  s.h_state = euclidean_gradient(ops, state);
  s.lambda = inner_l2(s.h_state, state);
  s.energy = energy_from_h(ops, state, s.h_state);
  s.residual = residual_from_h(state, s.h_state, s.lambda);
  s.state = std::move(state);
  return s;
}

StepResult step(const OperatorSet& ops, const IterationState& current,
                const Preconditioner& handle, const StepPolicy& policy) {
  GradientResult grad = riemannian_gradient(ops, current.state, handle, &current.h_state,
                                            current.warm.p_inv_state.empty() ? nullptr
                                                                             : &current.warm);
  StepChoice choice =
      select_step(ops, current.state, grad.direction, grad.dnorm_p_sq, policy);

  StepResult out;
  out.inner_iterations = grad.inner_iterations;
  const int inner = grad.inner_iterations;
  out.next = make_iteration_state(ops, std::move(choice.trial));
  out.next.warm = std::move(grad);
  out.row.energy = out.next.energy;
  out.row.lambda = out.next.lambda;
  out.row.residual_inf = out.next.residual;
  out.row.tau = choice.tau;
  out.row.dnorm_p = std::sqrt(std::max(out.next.warm.dnorm_p_sq, 0.0));
  out.row.inner_iterations = inner;

  // Divergence guard on the accurately evaluated change.
  if (choice.energy_change > 1e-10 * std::abs(current.energy))
    throw SolverError("energy increased by " + std::to_string(choice.energy_change) +
                      " on an accepted step (tau = " + std::to_string(choice.tau) +
                      "); the inverse solves are likely too loose or tau too large");
  return out;
}

StepResult step(const OperatorSet& ops, const Field& state, const Preconditioner& handle,
                const StepPolicy& policy) {
  return step(ops, make_iteration_state(ops, state), handle, policy);
}

RunResult run(const std::vector<StageSpec>& stages, const OpsPtr& ops, const Field& initial,
              const RunObserver& observer) {
  if (stages.empty()) throw UsageError("run needs at least one stage");
  for (const auto& s : stages) s.validate();
  require_same_grid(initial, Field(ops->grid_ptr()));

  RunResult result;
  Field start = initial;
  start *= 1.0 / norm_l2(start);
  IterationState cur = make_iteration_state(*ops, std::move(start));

  for (std::size_t k = 0; k < stages.size(); ++k) {
    const StageSpec& spec = stages[k];
    ConvergenceRecord rec;
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    };
    cur.warm = {};
    IterationRow row{0, cur.energy, cur.lambda, cur.residual, 0.0, 0.0, 0.0};

    auto stop_check = [&](const IterationRow& r, double delta) {
      if (spec.stop_residual > 0.0 && r.residual_inf <= spec.stop_residual) {
        rec.status = StopStatus::residual_met;
        return true;
      }
      if (spec.stop_energy_gap > 0.0 && r.energy - spec.target_energy <= spec.stop_energy_gap) {
        rec.status = StopStatus::energy_gap_met;
        return true;
      }
      if (spec.stop_energy_delta > 0.0 && r.n > 0 && std::abs(delta) <= spec.stop_energy_delta) {
        rec.status = StopStatus::energy_delta_met;
        return true;
      }
      return false;
    };

    rec.rows.push_back(row);
    bool stopped = stop_check(row, 0.0);
    if (observer && !observer(static_cast<int>(k), row, cur.state)) stopped = true;

    try {
      std::shared_ptr<const Preconditioner> fixed;
      const bool state_free = spec.precond.kind == PrecondKind::P1 ||
                              spec.precond.kind == PrecondKind::P2;
      if (state_free) fixed = std::make_shared<const Preconditioner>(spec.precond, ops, cur.state);
      for (int n = 1; !stopped && n <= spec.max_iters; ++n) {
        StepResult sr = state_free
                            ? step(*ops, cur, *fixed, spec.policy)
                            : step(*ops, cur, Preconditioner(spec.precond, ops, cur.state),
                                   spec.policy);
        const double delta = sr.next.energy - cur.energy;
        cur = std::move(sr.next);
        sr.row.n = n;
        sr.row.wall_s = elapsed();
        rec.rows.push_back(sr.row);
        stopped = stop_check(sr.row, delta);
        if (observer && !observer(static_cast<int>(k), sr.row, cur.state)) stopped = true;
      }
      if (!stopped) rec.status = StopStatus::max_iters;
    } catch (const std::exception& e) {
      rec.status = StopStatus::error;
      rec.message = e.what();
      result.ok = false;
      result.records.push_back(std::move(rec));
      break;
    }
    result.records.push_back(std::move(rec));
  }
  result.final_state = cur.state;
  return result;
}

}  // namespace gprg
