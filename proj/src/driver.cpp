#include "gprg/driver.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "gprg/error.hpp"
#include "gprg/io.hpp"

namespace gprg {

GridPtr stage_grid(const RunConfig& c, std::size_t k) {
  const StageConfig& st = c.stages.at(k);
  return build_polar_grid(st.n_r ? st.n_r : c.grid.n_r, st.n_theta ? st.n_theta : c.grid.n_theta,
                          c.grid.radius);
}

GridPtr config_grid(const RunConfig& c) {
  return build_polar_grid(c.grid.n_r, c.grid.n_theta, c.grid.radius);
}

OpsPtr config_operators(const RunConfig& c) { return make_operators(config_grid(c), c.problem); }

Field on_grid(const Field& u, const GridPtr& grid) {
  Field out = u.grid().same_shape(*grid) && u.grid().radius() == grid->radius()
                  ? Field(grid, std::vector<Complex>(u.values().begin(), u.values().end()))
                  : resample(u, grid);
  out *= 1.0 / norm_l2(out);
  return out;
}

SolveOutcome solve(const RunConfig& c, const Field* start, const RunObserver& observer) {
  if (c.stages.empty()) throw ConfigError("the config defines no [[stage]]");
  SolveOutcome out;
  GridPtr grid = stage_grid(c, 0);
  Field state;
  if (start) state = on_grid(*start, grid);
  else if (!c.initial_field.empty()) state = on_grid(read_field(c.initial_field), grid);
  else state = initial_guess(c.initial, grid, c.problem);

  OpsPtr ops;
  for (std::size_t k = 0; k < c.stages.size(); ++k) {
    GridPtr g = stage_grid(c, k);
    if (!ops || !ops->grid().same_shape(*g)) {
      ops = make_operators(g, c.problem);
      state = on_grid(state, g);
    }
    const auto stage_observer = [&](int, const IterationRow& row, const Field& s) {
      return observer ? observer(static_cast<int>(k), row, s) : true;
    };
    RunResult r = run({c.stages[k].spec}, ops, state, stage_observer);
    state = std::move(r.final_state);
    for (auto& rec : r.records) out.records.push_back(std::move(rec));
    if (!r.ok) {
      out.ok = false;
      break;
    }
  }
  out.final_state = on_grid(state, ops->grid_ptr());
  if (!ops->grid().same_shape(*config_grid(c))) {
    ops = config_operators(c);
    out.final_state = on_grid(out.final_state, ops->grid_ptr());
  }
  out.energy = energy(*ops, out.final_state);
  out.lambda = lambda_tilde(*ops, out.final_state);
  out.residual = residual_inf(*ops, out.final_state);
  return out;
}

SpectrumOutcome analyze_spectrum(const RunConfig& c, const Field& field) {
  const OpsPtr ops = config_operators(c);
  if (!field.grid().same_shape(ops->grid()) || field.grid().radius() != ops->grid().radius())
    throw ConfigError("field snapshot grid " + std::to_string(field.grid().n_r()) + "x" +
                      std::to_string(field.grid().n_theta()) + " does not match the config grid " +
                      std::to_string(c.grid.n_r) + "x" + std::to_string(c.grid.n_theta));
  const Field phi = on_grid(field, ops->grid_ptr());

  SpectrumOutcome out;
  out.lambda_g = lambda_tilde(*ops, phi);
  EigenOptions eo;
  eo.max_iter = c.spectrum.max_iter;
  eo.tol = c.spectrum.tol;
  out.tangent = hessian_tangent_eigs(ops, phi, c.spectrum.k, eo);
  const SymmetryBasis sb = symmetry_basis(*ops, phi);
  out.morse_bott = morse_bott_check(out.lambda_g, out.tangent.pairs, sb, c.spectrum.tol_degenerate,
                                    c.spectrum.tol_gap);

  std::vector<Field> guesses;
  for (std::size_t i = static_cast<std::size_t>(sb.dim);
       i < out.tangent.pairs.size() && guesses.size() < 2; ++i)
    guesses.push_back(out.tangent.pairs[i].vector);
  const double lambda3 = out.tangent.pairs.size() > static_cast<std::size_t>(sb.dim)
                             ? out.tangent.pairs[static_cast<std::size_t>(sb.dim)].value
                             : std::numeric_limits<double>::quiet_NaN();

  for (PrecondKind kind : c.spectrum.preconditioners) {
    const std::vector<double> sigmas =
        kind == PrecondKind::P4 ? c.spectrum.sigma0 : std::vector<double>{0.0};
    for (double sigma0 : sigmas) {
      PreconditionerSpec ps;
      ps.kind = kind;
      if (kind == PrecondKind::P4) ps.sigma0 = sigma0;
      const Preconditioner handle(ps, ops, phi);
      PencilResult pr = pencil_extremes(ops, phi, handle, 2, {}, guesses);

      SpectrumReport rep;
      rep.lambda_g = out.lambda_g;
      for (const EigenPair& p : out.tangent.pairs) rep.eigs.push_back(p.value);
      rep.morse_bott = out.morse_bott;
      rep.mu = pr.mu;
      rep.L = pr.L;
      rep.precond_kind = kind;
      rep.sigma0 = kind == PrecondKind::P4 ? sigma0 : 0.0;
      if (kind == PrecondKind::P4) rep.mu_closed_form = p4_mu_closed_form(lambda3, out.lambda_g, sigma0);
      try {
        const RateEstimate re = theoretical_rate(pr.mu, pr.L, kind);
        rep.tau_star = re.tau_star;
        rep.rho = re.rho;
      } catch (const UsageError&) {
        rep.tau_star = rep.rho = std::numeric_limits<double>::quiet_NaN();
        rep.flags.push_back("rate_undefined");
      }
      if (!out.tangent.converged) rep.flags.push_back("tangent_eigs_not_converged");
      if (!pr.mu_converged) rep.flags.push_back("mu_not_converged");
      if (!pr.L_converged) rep.flags.push_back("L_not_converged");
      if (!out.morse_bott.applicable) rep.flags.push_back("morse_bott_not_applicable");
      out.pencils.push_back(std::move(pr));
      out.reports.push_back(std::move(rep));
    }
  }
  return out;
}

double fit_rate(const std::vector<double>& gaps, const std::vector<double>& residuals,
                double residual_cut, double fraction) {
  const std::size_t n = std::min(gaps.size(), residuals.size());
  std::size_t first = 0;
  while (first < n && !(residuals[first] < residual_cut)) ++first;
  if (first == n) first = 0;
  const std::size_t count = n - first;
  const std::size_t begin = n - static_cast<std::size_t>(std::ceil(fraction * count));
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  int m = 0;
  for (std::size_t i = begin; i < n; ++i) {
    if (!(gaps[i] > 0.0)) continue;
    const double x = static_cast<double>(i);
    const double y = 0.5 * std::log10(gaps[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++m;
  }
  if (m < 3) return std::numeric_limits<double>::quiet_NaN();
  const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  return std::pow(10.0, slope);
}

RatesOutcome measure_rates(const RunConfig& c, const Field& reference,
                           const RateObserver& observer) {
  const OpsPtr ops = config_operators(c);
  const RatesConfig& rc = c.rates;
  RatesOutcome out;
  out.reference = on_grid(reference, ops->grid_ptr());

  if (rc.reference_max_iters > 0 && residual_inf(*ops, out.reference) > rc.reference_residual) {
    StageSpec polish;
    polish.precond.kind = PrecondKind::P4;
    polish.precond.sigma0 = rc.sigma0;
    polish.max_iters = rc.reference_max_iters;
    polish.stop_residual = rc.reference_residual;
    out.reference = run({polish}, ops, out.reference).final_state;
  }
  const Field& ref = out.reference;
  out.reference_residual = residual_inf(*ops, ref);

  const SymmetryBasis sb = symmetry_basis(*ops, ref);
  const TangentEigs te = hessian_tangent_eigs(ops, ref, sb.dim + 2);
  std::vector<Field> guesses;
  for (std::size_t i = static_cast<std::size_t>(sb.dim); i < te.pairs.size(); ++i)
    guesses.push_back(te.pairs[i].vector);

  Field start = ref;
  start += smooth_perturbation(ops->grid_ptr(), rc.seed, rc.perturbation_h1);
  start *= 1.0 / norm_l2(start);

  for (PrecondKind kind : rc.preconditioners) {
    RateRun rr;
    rr.kind = kind;
    try {
      PreconditionerSpec ps;
      ps.kind = kind;
      ps.sigma0 = rc.sigma0;
      const Preconditioner handle(ps, ops, ref);
      const PencilResult pr = pencil_extremes(ops, ref, handle, 2, {}, guesses);
      rr.mu = pr.mu;
      rr.L = pr.L;
      const RateEstimate re = theoretical_rate(pr.mu, pr.L, kind);
      rr.tau_star = re.tau_star;
      rr.rho_theory = re.rho;

      StageSpec st;
      st.precond = ps;
      st.policy = StepPolicy::fixed(re.tau_star);
      st.max_iters = rc.max_iters;
      st.stop_residual = 0.0;
      bool reached = false;
      std::vector<double> residuals;
      const RunResult r = run({st}, ops, start, [&](int, const IterationRow& row, const Field& s) {
        const double gap = energy_difference(*ops, s, ref);
        rr.gaps.push_back(gap);
        residuals.push_back(row.residual_inf);
        if (observer) observer(kind, row, s);
        if (gap <= rc.stop_energy_gap) reached = true;
        return !reached;
      });
      rr.record = r.records.front();
      rr.iters = static_cast<int>(rr.record.rows.size()) - 1;
      rr.rho_fitted = fit_rate(rr.gaps, residuals, rc.fit_residual, rc.fit_fraction);
      if (!r.ok) rr.status = "error: " + rr.record.message;
      else rr.status = reached ? "ok" : "max_iters";
    } catch (const std::exception& e) {
      rr.status = std::string("error: ") + e.what();
      if (rr.rho_fitted == 0.0) rr.rho_fitted = std::numeric_limits<double>::quiet_NaN();
    }
    out.runs.push_back(std::move(rr));
  }
  return out;
}

std::string RatesOutcome::to_csv() const {
  std::string s = "precond,mu,L,tau_star,rho_theory,rho_fitted,iters,status\n";
  char buf[512];
  for (const RateRun& r : runs) {
    std::string status = r.status;
    for (char& ch : status)
      if (ch == ',' || ch == '\n' || ch == '"') ch = ';';
    std::snprintf(buf, sizeof buf, "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%d,",
                  std::string(to_string(r.kind)).c_str(), r.mu, r.L, r.tau_star, r.rho_theory,
                  r.rho_fitted, r.iters);
    s += buf + status + "\n";
  }
  return s;
}

bool RatesOutcome::all_failed() const {
  for (const RateRun& r : runs)
    if (!r.status.starts_with("error")) return false;
  return !runs.empty();
}

}  // namespace gprg
