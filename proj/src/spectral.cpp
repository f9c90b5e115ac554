#include "gprg/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "gprg/error.hpp"
#include "gprg/lobpcg.hpp"
#include "gprg/random.hpp"
#include "gprg/riemannian.hpp"
#include "gprg/solver.hpp"

namespace gprg {

namespace {

// u -> E''(phi) u + shift u with the state-dependent coefficients frozen.
class HessianOp {
 public:
  HessianOp(const OperatorSet& ops, const Field& state, double shift) : ops_(ops), shift_(shift) {
    const auto s = state.values();
    local_.resize(s.size());
    conj_.resize(s.size());
    for (std::size_t k = 0; k < s.size(); ++k) {
      const double rho = std::norm(s[k]);
      const double fp = ops.f_prime(rho);
      local_[k] = ops.f(rho) + fp * rho;
      conj_[k] = fp * s[k] * s[k];
    }
  }
  void operator()(const Field& in, Field& out) const {
    ops_.apply({.kinetic = 1.0,
                .potential = 1.0,
                .rotation = 1.0,
                .shift = shift_,
                .local = local_,
                .conj_local = conj_},
               in, out);
  }

 private:
  const OperatorSet& ops_;
  double shift_;
  std::vector<double> local_;
  std::vector<Complex> conj_;
};

Preconditioner shift_invert(const OpsPtr& ops, const Field& state, const EigenOptions& o) {
  PreconditionerSpec spec;
  spec.kind = PrecondKind::P4;
  spec.sigma0 = o.shift_sigma;
  spec.inverse_tol = o.precond_tol;
  spec.inverse_max_iter = 5000;
  return Preconditioner(spec, ops, state);
}

// Inexact solves are fine inside LOBPCG; an exhausted budget falls back to
// the partially converged iterate's absence, i.e. the identity.
Field loose_inverse(const Preconditioner& p, const Field& r) {
  try {
    return p.apply_inverse(r);
  } catch (const ConvergenceError&) {
    return r;
  }
}

std::vector<Field> seed_block(const Field& state, std::vector<Field> block, std::size_t size,
                              std::uint64_t seed, bool smooth) {
  const GridPtr& g = state.grid_ptr();
  for (std::uint64_t s = seed; block.size() < size; ++s) {
    Field v = random_field(g, s);
    if (smooth) {
      // Low-energy start: the state modulated by a random smooth field.
      Field mod = smooth_perturbation(g, s, 1.0);
      v = mod;
      auto vv = v.values();
      const auto sv = state.values();
      for (std::size_t k = 0; k < vv.size(); ++k) vv[k] *= sv[k];
    }
    block.push_back(std::move(v));
  }
  return block;
}

}  // namespace

SymmetryBasis symmetry_basis(const OperatorSet& ops, const Field& state) {
  SymmetryBasis out;
  const Field phi = (1.0 / norm_l2(state)) * state;
  Field a = times_i(phi);
  a *= 1.0 / norm_l2(a);
  out.vectors.push_back(a);
  Field b = times_i(apply_lz(ops, phi));
  const double nb = norm_l2(b);
  b.axpy(-inner_l2(b, phi), phi);
  b.axpy(-inner_l2(b, a), a);
  const double nr = norm_l2(b);
  if (nb > 0.0 && nr > 1e-6 * nb) {
    b *= 1.0 / nr;
    b.axpy(-inner_l2(b, a), a);
    b *= 1.0 / norm_l2(b);
    out.vectors.push_back(std::move(b));
  }
  out.dim = static_cast<int>(out.vectors.size());
  return out;
}

std::vector<Field> normal_space_constraints(const OperatorSet& ops, const Field& state) {
  std::vector<Field> c{(1.0 / norm_l2(state)) * state};
  for (Field& v : symmetry_basis(ops, state).vectors) c.push_back(std::move(v));
  return orthonormalize(std::move(c));
}

TangentEigs hessian_tangent_eigs(const OpsPtr& ops, const Field& state, int k,
                                 const EigenOptions& o, const std::vector<Field>& guesses) {
  if (k < 1) throw UsageError("hessian_tangent_eigs needs k >= 1");
  const Field phi = (1.0 / norm_l2(state)) * state;
  const std::vector<Field> constraints{phi};
  const HessianOp hess(*ops, phi, 0.0);
  const Preconditioner si = shift_invert(ops, phi, o);
  const Field si_phi = si.apply_inverse(phi);

  const FieldMap A = [&](const Field& in, Field& out) { hess(in, out); };
  const FieldMap T = [&](const Field& in, Field& out) {
    out = project_tangent(phi, loose_inverse(si, in), si_phi);
  };

  std::vector<Field> block = guesses;
  for (Field& v : symmetry_basis(*ops, phi).vectors) block.push_back(std::move(v));
  block = seed_block(phi, std::move(block), static_cast<std::size_t>(k + o.extra), o.seed, true);
  block.resize(static_cast<std::size_t>(k + o.extra), Field(phi.grid_ptr()));

  LobpcgOptions lo;
  lo.max_iter = o.max_iter;
  lo.tol = o.tol;
  const LobpcgResult r = lobpcg(A, {}, T, constraints, std::move(block), k, lo);

  TangentEigs out;
  out.converged = r.converged;
  out.iterations = r.iterations;
  for (int i = 0; i < k; ++i)
    out.pairs.push_back({r.values[i], r.vectors[i], r.residuals[i]});
  return out;
}

std::vector<double> principal_angles(const std::vector<Field>& a, const std::vector<Field>& b) {
  const std::vector<Field> qa = orthonormalize(a, 1e-12);
  const std::vector<Field> qb = orthonormalize(b, 1e-12);
  // Components of span(a) outside span(b); the Gram eigenvalues are sin^2.
  std::vector<Field> rest;
  for (const Field& v : qa) {
    Field w = v;
    project_out(w, qb);
    project_out(w, qb);
    rest.push_back(std::move(w));
  }
  const std::size_t n = rest.size();
  std::vector<double> angles;
  if (n == 1) {
    angles.push_back(std::asin(std::min(1.0, norm_l2(rest[0]))));
  } else if (n == 2) {
    const double g00 = inner_l2(rest[0], rest[0]);
    const double g11 = inner_l2(rest[1], rest[1]);
    const double g01 = inner_l2(rest[0], rest[1]);
    const double tr = 0.5 * (g00 + g11);
    const double det = std::sqrt(std::max(0.0, 0.25 * (g00 - g11) * (g00 - g11) + g01 * g01));
    for (double s2 : {std::max(0.0, tr - det), tr + det})
      angles.push_back(std::asin(std::min(1.0, std::sqrt(s2))));
  } else {
    for (const Field& w : rest) angles.push_back(std::asin(std::min(1.0, norm_l2(w))));
  }
  return angles;
}

MorseBottVerdict morse_bott_check(double lambda_g, const std::vector<EigenPair>& eigs,
                                  const SymmetryBasis& symmetry, double tol_degenerate,
                                  double tol_gap, double tol_angle) {
  MorseBottVerdict v;
  v.symmetry_dim = symmetry.dim;
  v.applicable = symmetry.dim == 2;
  const std::size_t d = static_cast<std::size_t>(std::max(symmetry.dim, 1));
  if (eigs.size() < d + 1) throw UsageError("morse_bott_check needs more tangent eigenvalues");
  const double scale = std::abs(lambda_g);
  v.lambda1_ok = std::abs(eigs[0].value - lambda_g) <= tol_degenerate * scale;
  v.lambda2_ok = d < 2 || std::abs(eigs[1].value - lambda_g) <= tol_degenerate * scale;
  v.gap = eigs[d].value - lambda_g;
  v.gap_ok = v.gap >= tol_gap;
  std::vector<Field> low;
  for (std::size_t i = 0; i < d; ++i) low.push_back(eigs[i].vector);
  v.angles = principal_angles(low, symmetry.vectors);
  v.alignment_ok = std::all_of(v.angles.begin(), v.angles.end(),
                               [&](double a) { return a <= tol_angle; });
  v.is_morse_bott =
      v.applicable && v.lambda1_ok && v.lambda2_ok && v.gap_ok && v.alignment_ok;
  return v;
}

PencilResult pencil_extremes(const OpsPtr& ops, const Field& state, const Preconditioner& handle,
                             int k_each, const PencilOptions& o,
                             const std::vector<Field>& guesses) {
  if (k_each < 1) throw UsageError("pencil_extremes needs k_each >= 1");
  const Field phi = (1.0 / norm_l2(state)) * state;
  const double lambda_g = inner_l2(euclidean_gradient(*ops, phi), phi);
  const std::vector<Field> constraints = normal_space_constraints(*ops, phi);
  const HessianOp shifted(*ops, phi, -lambda_g);

  PencilResult out;
  out.symmetry_dim = static_cast<int>(constraints.size()) - 1;
  const FieldMap A = [&](const Field& in, Field& res) { shifted(in, res); };
  const FieldMap B = [&](const Field& in, Field& res) { handle.apply(in, res); };

  LobpcgOptions lo;
  lo.max_iter = o.eig.max_iter;
  lo.tol = o.eig.tol;

  // Lower end: shift-invert preconditioning towards the bottom of N.
  {
    const Preconditioner si = shift_invert(ops, phi, o.eig);
    const FieldMap T = [&](const Field& in, Field& res) {
      res = loose_inverse(si, in);
      project_out(res, constraints);
    };
    std::vector<Field> block =
        seed_block(phi, guesses, static_cast<std::size_t>(k_each + o.eig.extra), o.eig.seed, true);
    const LobpcgResult r = lobpcg(A, B, T, constraints, std::move(block), k_each, lo);
    out.mu = r.values.front();
    out.mu_converged = r.converged;
    for (int i = 0; i < k_each; ++i) out.lower.push_back({r.values[i], r.vectors[i], r.residuals[i]});
  }

  // Upper end: P^{-1} preconditioning, growing blocks until the estimate
  // settles.
  {
    PreconditionerSpec loose = handle.spec();
    loose.inverse_tol = std::max(loose.inverse_tol, o.eig.precond_tol);
    const Preconditioner pl(loose, ops, handle.state());
    const FieldMap T = [&](const Field& in, Field& res) {
      res = loose_inverse(pl, in);
      project_out(res, constraints);
    };
    std::size_t size = static_cast<std::size_t>(k_each + o.eig.extra);
    for (int level = 0; level < o.L_levels; ++level, size *= 2) {
      std::vector<Field> block;
      for (std::size_t i = 0; i < size; ++i)
        block.push_back(random_field(phi.grid_ptr(), o.eig.seed + 1000 * (level + 1) + i));
      LobpcgOptions lu = lo;
      lu.largest = true;
      const LobpcgResult r = lobpcg(A, B, T, constraints, std::move(block), k_each, lu);
      out.L_estimates.push_back(r.values.front());
      const std::size_t n = out.L_estimates.size();
      if (n >= 2) {
        const double a = out.L_estimates[n - 2], b = out.L_estimates[n - 1];
        if (std::abs(a - b) <= o.L_agreement * std::abs(b)) {
          out.L_converged = true;
          break;
        }
      }
    }
    out.L = *std::max_element(out.L_estimates.begin(), out.L_estimates.end());
  }
  return out;
}

RateEstimate theoretical_rate(double mu, double L, PrecondKind kind) {
  if (!(mu > 0.0) || !(mu <= L) || !std::isfinite(L))
    throw UsageError("theoretical_rate needs 0 < mu <= L");
  if (kind == PrecondKind::P4) return {2.0 / (L + mu), (L - mu) / (L + mu)};
  return {1.0 / L, std::sqrt(1.0 - mu / L)};
}

double p4_mu_closed_form(double lambda3, double lambda_g, double sigma0) {
  const double gap = lambda3 - lambda_g;
  return gap / (gap + sigma0);
}

std::string SpectrumReport::to_json() const {
  nlohmann::ordered_json j;
  j["lambda_g"] = lambda_g;
  for (std::size_t i = 0; i < eigs.size(); ++i) j["eig_" + std::to_string(i + 1)] = eigs[i];
  j["gap"] = morse_bott.gap;
  j["is_morse_bott"] = morse_bott.is_morse_bott;
  j["mu"] = mu;
  j["L"] = L;
  j["tau_star"] = tau_star;
  j["rho"] = rho;
  j["precond_kind"] = std::string(to_string(precond_kind));
  j["sigma0"] = sigma0;
  if (mu_closed_form) j["mu_closed_form"] = *mu_closed_form;
  j["symmetry_dim"] = morse_bott.symmetry_dim;
  j["flags"] = flags;
  return j.dump(2) + "\n";
}

}  // namespace gprg
