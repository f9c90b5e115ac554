#include "gprg/operators.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "gprg/error.hpp"
#include "gprg/stencil.hpp"

namespace gprg {

std::vector<std::string> ProblemParams::validate() const {
  std::vector<std::string> warnings;
  if (!std::isfinite(omega)) throw ConfigError("problem.omega must be finite");
  if (omega < 0.0) throw ConfigError("problem.omega must be non-negative");
  if (!std::isfinite(eta)) throw ConfigError("problem.eta must be finite");
  if (eta < 0.0) throw ConfigError("problem.eta must be non-negative");
  if (potential.kind == PotentialKind::harmonic && std::abs(omega) > 1.0)
    warnings.emplace_back("|omega| > 1 in a harmonic trap: the energy is unbounded below "
                          "in the continuum limit");
  if (potential.kind == PotentialKind::radial_profile) {
    for (double v : potential.profile)
      if (!std::isfinite(v)) throw ConfigError("problem.potential profile has non-finite values");
  }
  return warnings;
}

OperatorSet::OperatorSet(GridPtr grid, ProblemParams params)
    : grid_(std::move(grid)), params_(std::move(params)) {
  warnings_ = params_.validate();
  const int nr = grid_->n_r();
  const double h = grid_->h_r();

  potential_.resize(static_cast<std::size_t>(nr));
  if (params_.potential.kind == PotentialKind::harmonic) {
    for (int i = 0; i < nr; ++i) potential_[i] = 0.5 * grid_->r(i) * grid_->r(i);
  } else {
    if (params_.potential.profile.size() != static_cast<std::size_t>(nr))
      throw ConfigError("potential profile has " +
                        std::to_string(params_.potential.profile.size()) +
                        " values but the grid has " + std::to_string(nr) + " radial nodes");
    potential_ = params_.potential.profile;
  }

  // Central differences for u_rr + u_r / r. On the staggered grid the pole
  // coefficient 1/h^2 - 1/(2 h r_{1/2}) vanishes, so the antipodal ghost
  // carries zero weight; it is kept explicit so the stencil stays generic.
  lower_.resize(static_cast<std::size_t>(nr));
  upper_.resize(static_cast<std::size_t>(nr));
  for (int i = 0; i < nr; ++i) {
    const double r = grid_->r(i);
    lower_[i] = 1.0 / (h * h) - 1.0 / (2.0 * h * r);
    upper_[i] = 1.0 / (h * h) + 1.0 / (2.0 * h * r);
  }
  diag_ = -2.0 / (h * h);
}

OpsPtr make_operators(GridPtr grid, ProblemParams params) {
  return std::make_shared<const OperatorSet>(std::move(grid), std::move(params));
}

void OperatorSet::apply(const KernelTerms& t, const Field& u, Field& out) const {
  if (u.empty() || !u.grid().same_shape(*grid_))
    throw UsageError("field does not live on the operator grid");
  if (out.empty() || !out.grid().same_shape(*grid_)) out = Field(grid_);
  if (&out == &u) throw UsageError("operator output aliases its input");

  const int nr = grid_->n_r();
  const int nt = grid_->n_theta();
  const int half = nt / 2;
  constexpr int w = stencil::kHalfWidth;
  const double ht = grid_->h_theta();
  const double inv_ht = 1.0 / ht;
  const double inv_ht2 = 1.0 / (ht * ht);
  const double kin = -0.5 * t.kinetic;
  const double rot = t.rotation * params_.omega;
  const bool has_local = !t.local.empty();
  const bool has_conj = !t.conj_local.empty();
  const bool need_angular_first = rot != 0.0;

  const double c1[5] = {0.0, stencil::kFirst[1], stencil::kFirst[2], stencil::kFirst[3],
                        stencil::kFirst[4]};
  const double c2[5] = {0.0, stencil::kSecond[1], stencil::kSecond[2], stencil::kSecond[3],
                        stencil::kSecond[4]};

  std::vector<Complex> pad(static_cast<std::size_t>(nt + 2 * w));
  std::vector<Complex> ghost(static_cast<std::size_t>(nt));

  for (int i = 0; i < nr; ++i) {
    const auto ui = u.row(i);
    std::copy(ui.begin(), ui.end(), pad.begin() + w);
    for (int k = 0; k < w; ++k) {
      pad[k] = ui[nt - w + k];
      pad[nt + w + k] = ui[k];
    }

    const Complex* below;
    if (i > 0) {
      below = u.row(i - 1).data();
    } else {
      for (int j = 0; j < nt; ++j) ghost[j] = ui[(j + half) % nt];
      below = ghost.data();
    }
    const Complex* above = i + 1 < nr ? u.row(i + 1).data() : nullptr;

    const double r = grid_->r(i);
    const double lo = lower_[i];
    const double up = upper_[i];
    const double ang = inv_ht2 / (r * r);
    const double diag_scalar = t.potential * potential_[i] + t.shift;
    const std::size_t base = static_cast<std::size_t>(i) * nt;
    auto oi = out.row(i);

    for (int j = 0; j < nt; ++j) {
      const Complex* p = pad.data() + w + j;
      const Complex p0 = p[0];
      Complex d2 = c2[1] * ((p[1] - p0) + (p[-1] - p0));
      d2 += c2[2] * ((p[2] - p0) + (p[-2] - p0));
      d2 += c2[3] * ((p[3] - p0) + (p[-3] - p0));
      d2 += c2[4] * ((p[4] - p0) + (p[-4] - p0));

      Complex lap = lo * below[j] + diag_ * p0 + ang * d2;
      if (above) lap += up * above[j];

      double diag_total = diag_scalar;
      if (has_local) diag_total += t.local[base + j];
      Complex value = kin * lap + diag_total * p0;

      if (need_angular_first) {
        Complex d1 = c1[1] * (p[1] - p[-1]);
        d1 += c1[2] * (p[2] - p[-2]);
        d1 += c1[3] * (p[3] - p[-3]);
        d1 += c1[4] * (p[4] - p[-4]);
        d1 *= inv_ht;
        // -Omega L_z u = i Omega D_Theta u
        value += rot * Complex(-d1.imag(), d1.real());
      }
      if (has_conj) {
        const Complex c = t.conj_local[base + j];
        // c * conj(p0)
        value += Complex(c.real() * p0.real() + c.imag() * p0.imag(),
                         c.imag() * p0.real() - c.real() * p0.imag());
      }
      oi[j] = value;
    }
  }
}

double OperatorSet::abs_apply_norm(const KernelTerms& t, const Field& u) const {
  const int nr = grid_->n_r();
  const int nt = grid_->n_theta();
  const int half = nt / 2;
  const double ht = grid_->h_theta();
  const double kin = std::abs(0.5 * t.kinetic);
  const double rot = std::abs(t.rotation * params_.omega) / ht;
  double total = 0.0;
  std::vector<double> a(static_cast<std::size_t>(nt));
  for (int i = 0; i < nr; ++i) {
    const auto ui = u.row(i);
    for (int j = 0; j < nt; ++j) a[j] = std::abs(ui[j]);
    const double r = grid_->r(i);
    const double ang = 1.0 / (ht * ht * r * r);
    const std::size_t base = static_cast<std::size_t>(i) * nt;
    double row = 0.0;
    for (int j = 0; j < nt; ++j) {
      double d2 = 0.0, d1 = 0.0;
      for (int k = 1; k <= stencil::kHalfWidth; ++k) {
        const double s = a[(j + k) % nt] + a[(j - k + nt) % nt];
        d2 += std::abs(stencil::kSecond[k]) * (s + 2.0 * a[j]);
        d1 += std::abs(stencil::kFirst[k]) * s;
      }
      const double below =
          i > 0 ? std::abs(u.row(i - 1)[j]) : std::abs(ui[(j + half) % nt]);
      const double above = i + 1 < nr ? std::abs(u.row(i + 1)[j]) : 0.0;
      double lap = std::abs(lower_[i]) * below + std::abs(diag_) * a[j] +
                   std::abs(upper_[i]) * above + ang * d2;
      double diag_total = t.potential * potential_[i] + t.shift;
      if (!t.local.empty()) diag_total += t.local[base + j];
      double v = kin * lap + std::abs(diag_total) * a[j] + rot * d1;
      if (!t.conj_local.empty()) v += std::abs(t.conj_local[base + j]) * a[j];
      row += v * v;
    }
    total += grid_->weight(i) * row;
  }
  return std::sqrt(total);
}

std::vector<double> density_multiplier(const OperatorSet& ops, const Field& state) {
  std::vector<double> out(state.size());
  const auto v = state.values();
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = ops.f(std::norm(v[k]));
  return out;
}

Field apply_laplacian(const OperatorSet& ops, const Field& u) {
  Field out(ops.grid_ptr());
  ops.apply({.kinetic = -2.0}, u, out);
  return out;
}

Field apply_lz(const OperatorSet& ops, const Field& u) {
  // L_z u = -i D_Theta u. With omega = 0 the kernel drops rotation, so the
  // derivative is evaluated directly here.
  const PolarGrid& g = ops.grid();
  if (!u.grid().same_shape(g)) throw UsageError("field does not live on the operator grid");
  const int nt = g.n_theta();
  const double inv_ht = 1.0 / g.h_theta();
  Field out(ops.grid_ptr());
  for (int i = 0; i < g.n_r(); ++i) {
    const auto ui = u.row(i);
    auto oi = out.row(i);
    for (int j = 0; j < nt; ++j) {
      Complex d1{};
      for (int k = 1; k <= stencil::kHalfWidth; ++k)
        d1 += stencil::kFirst[k] * (ui[(j + k) % nt] - ui[(j - k + nt) % nt]);
      d1 *= inv_ht;
      oi[j] = Complex(d1.imag(), -d1.real());
    }
  }
  return out;
}

Field apply_h0(const OperatorSet& ops, const Field& u) {
  Field out(ops.grid_ptr());
  ops.apply({.kinetic = 1.0, .potential = 1.0, .rotation = 1.0}, u, out);
  return out;
}

Field apply_h_phi(const OperatorSet& ops, const Field& state, const Field& u) {
  require_same_grid(state, u);
  const auto local = density_multiplier(ops, state);
  Field out(ops.grid_ptr());
  ops.apply({.kinetic = 1.0, .potential = 1.0, .rotation = 1.0, .local = local}, u, out);
  return out;
}

Field apply_hessian(const OperatorSet& ops, const Field& state, const Field& u) {
  require_same_grid(state, u);
  const auto s = state.values();
  std::vector<double> local(s.size());
  std::vector<Complex> conj_local(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) {
    const double rho = std::norm(s[k]);
    const double fp = ops.f_prime(rho);
    local[k] = ops.f(rho) + fp * rho;
    conj_local[k] = fp * s[k] * s[k];
  }
  Field out(ops.grid_ptr());
  ops.apply({.kinetic = 1.0,
             .potential = 1.0,
             .rotation = 1.0,
             .local = local,
             .conj_local = conj_local},
            u, out);
  return out;
}

namespace {

double interaction_integral(const OperatorSet& ops, const Field& state) {
  const PolarGrid& g = ops.grid();
  double total = 0.0;
  for (int i = 0; i < g.n_r(); ++i) {
    double s = 0.0;
    for (const auto& z : state.row(i)) s += ops.big_f(std::norm(z));
    total += g.weight(i) * s;
  }
  return total;
}

}  // namespace

double energy(const OperatorSet& ops, const Field& state) {
  const Field h0 = apply_h0(ops, state);
  return 0.5 * (inner_l2(h0, state) + interaction_integral(ops, state));
}

double energy_difference(const OperatorSet& ops, const Field& a, const Field& b) {
  // With E^(u) = q(u) / (2 N(u)) + eta Q(u) / (4 N(u)^2), q = <H_0 u, u>,
  // N = |u|^2 and Q = sum w |u|^4, every difference below is formed from
  // delta = a - b, so no O(1) quantities cancel.
  require_same_grid(a, b);
  const Field delta = a - b;
  const Field sum = a + b;
  const Field h0_delta = apply_h0(ops, delta);
  const double q_b = inner_l2(apply_h0(ops, b), b);
  const double dq = inner_l2(h0_delta, sum);
  const double n_b = inner_l2(b, b);
  const double dn = inner_l2(delta, sum);
  const double n_a = n_b + dn;

  const PolarGrid& g = ops.grid();
  double big_q_b = 0.0, d_big_q = 0.0;
  for (int i = 0; i < g.n_r(); ++i) {
    const auto br = b.row(i);
    const auto dr = delta.row(i);
    const auto sr = sum.row(i);
    const auto ar = a.row(i);
    double sq = 0.0, sd = 0.0;
    for (int j = 0; j < g.n_theta(); ++j) {
      const double rho_b = std::norm(br[j]);
      const double drho = dr[j].real() * sr[j].real() + dr[j].imag() * sr[j].imag();
      sq += rho_b * rho_b;
      sd += drho * (std::norm(ar[j]) + rho_b);
    }
    big_q_b += g.weight(i) * sq;
    d_big_q += g.weight(i) * sd;
  }
  const double eta = ops.params().eta;
  const double quadratic = 0.5 * (dq * n_b - q_b * dn) / (n_a * n_b);
  const double quartic =
      0.25 * eta * (d_big_q * n_b * n_b - big_q_b * dn * (n_a + n_b)) / (n_a * n_a * n_b * n_b);
  return quadratic + quartic;
}

Field euclidean_gradient(const OperatorSet& ops, const Field& state) {
  return apply_h_phi(ops, state, state);
}

double lambda_tilde(const OperatorSet& ops, const Field& state) {
  const double n2 = inner_l2(state, state);
  if (std::abs(n2 - 1.0) > 1e-10)
    std::cerr << "warning: lambda_tilde evaluated on a state with |phi|^2 = " << n2 << '\n';
  return inner_l2(euclidean_gradient(ops, state), state);
}

double residual_inf(const OperatorSet& ops, const Field& state) {
  const Field g = euclidean_gradient(ops, state);
  const double lam = inner_l2(g, state);
  double m = 0.0;
  const auto gv = g.values();
  const auto sv = state.values();
  for (std::size_t k = 0; k < gv.size(); ++k) m = std::max(m, std::abs(gv[k] - lam * sv[k]));
  return m;
}

}  // namespace gprg
