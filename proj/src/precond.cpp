#include "gprg/precond.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <cstring>

#include "gprg/error.hpp"
#include "gprg/stencil.hpp"

namespace gprg {

namespace {
std::string format_sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}
}  // namespace

std::string_view to_string(PrecondKind kind) {
  switch (kind) {
    case PrecondKind::P1: return "P1";
    case PrecondKind::P2: return "P2";
    case PrecondKind::P3: return "P3";
    case PrecondKind::P4: return "P4";
  }
  return "?";
}

PrecondKind parse_precond_kind(std::string_view text) {
  std::string t(text);
  for (auto& c : t) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (t == "P1") return PrecondKind::P1;
  if (t == "P2") return PrecondKind::P2;
  if (t == "P3") return PrecondKind::P3;
  if (t == "P4") return PrecondKind::P4;
  throw ConfigError("unknown preconditioner kind '" + std::string(text) + "' (expected P1..P4)");
}

void PreconditionerSpec::validate() const {
  if (!(shift_a >= 0.0) || !std::isfinite(shift_a))
    throw ConfigError("preconditioner shift_a must be a finite value >= 0");
  if (kind == PrecondKind::P4 && !(sigma0 > 0.0))
    throw ConfigError("preconditioner sigma0 must be positive for P4");
  if (!(inverse_tol > 0.0)) throw ConfigError("preconditioner inverse_tol must be positive");
  if (inverse_max_iter <= 0)
    throw ConfigError("preconditioner inverse_max_iter must be positive");
}

// ---------------------------------------------------------------------------
// ModeSolver

struct ModeSolver::Impl {
  int nr = 0;
  int nt = 0;
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
  // Row-major [i][m] storage so the radial sweeps run over contiguous modes.
  std::vector<double> sub;       // coefficient of u_{i-1} (mode independent)
  std::vector<double> super;     // coefficient of u_{i+1}
  std::vector<double> diag;      // [i][m]
  std::vector<double> inv_den;   // [i][m]
  std::vector<double> c_prime;   // [i][m]

  struct Buffer {
    explicit Buffer(std::size_t n)
        : data(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
      if (!data) throw std::bad_alloc();
    }
    ~Buffer() { fftw_free(data); }
    Buffer(const Buffer&) = delete;
    Buffer& operator=(const Buffer&) = delete;
    Complex* complex() { return reinterpret_cast<Complex*>(data); }
    fftw_complex* data;
  };

  ~Impl() {
    if (forward) fftw_destroy_plan(forward);
    if (backward) fftw_destroy_plan(backward);
  }

  void to_modes(const Field& in, Buffer& buf) const {
    std::memcpy(buf.data, in.values().data(), sizeof(Complex) * in.size());
    fftw_execute_dft(forward, buf.data, buf.data);
  }
  void from_modes(Buffer& buf, Field& out) const {
    fftw_execute_dft(backward, buf.data, buf.data);
    const double scale = 1.0 / nt;
    const Complex* src = buf.complex();
    auto dst = out.values();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] = scale * src[k];
  }
};

ModeSolver::ModeSolver(const OperatorSet& ops, double rotation, double shift,
                       std::vector<double> radial_extra)
    : impl_(std::make_unique<Impl>()) {
  const PolarGrid& g = ops.grid();
  Impl& s = *impl_;
  s.nr = g.n_r();
  s.nt = g.n_theta();
  const int nr = s.nr;
  const int nt = s.nt;
  if (!radial_extra.empty() && radial_extra.size() != static_cast<std::size_t>(nr))
    throw UsageError("radial_extra must hold one value per radial node");

  {
    Impl::Buffer probe(static_cast<std::size_t>(nr) * nt);
    int n[] = {nt};
    s.forward = fftw_plan_many_dft(1, n, nr, probe.data, nullptr, 1, nt, probe.data, nullptr, 1,
                                   nt, FFTW_FORWARD, FFTW_ESTIMATE);
    s.backward = fftw_plan_many_dft(1, n, nr, probe.data, nullptr, 1, nt, probe.data, nullptr, 1,
                                    nt, FFTW_BACKWARD, FFTW_ESTIMATE);
    if (!s.forward || !s.backward) throw SolverError("FFTW planning failed");
  }

  const double omega = ops.params().omega;
  const double ht = g.h_theta();
  std::vector<double> d2(static_cast<std::size_t>(nt)), lz(static_cast<std::size_t>(nt));
  for (int m = 0; m < nt; ++m) {
    d2[m] = stencil::d2_symbol(m, ht);
    lz[m] = stencil::lz_symbol(m, ht);
  }

  const std::size_t total = static_cast<std::size_t>(nr) * nt;
  s.sub.resize(static_cast<std::size_t>(nr));
  s.super.resize(static_cast<std::size_t>(nr));
  s.diag.resize(total);
  s.inv_den.resize(total);
  s.c_prime.resize(total);
  const auto V = ops.potential();
  for (int i = 0; i < nr; ++i) {
    s.sub[i] = i > 0 ? -0.5 * ops.radial_lower(i) : 0.0;
    s.super[i] = i + 1 < nr ? -0.5 * ops.radial_upper(i) : 0.0;
    const double r = g.r(i);
    const double local = V[i] + shift + (radial_extra.empty() ? 0.0 : radial_extra[i]);
    for (int m = 0; m < nt; ++m) {
      double d = -0.5 * (ops.radial_diag() + d2[m] / (r * r)) + local - rotation * omega * lz[m];
      // Antipodal ghost of the innermost ring: u(-r, Theta) = u(r, Theta + pi)
      // acts on mode m as (-1)^m.
      if (i == 0) d += -0.5 * ops.radial_lower(0) * ((m % 2 == 0) ? 1.0 : -1.0);
      s.diag[static_cast<std::size_t>(i) * nt + m] = d;
    }
  }

  for (int m = 0; m < nt; ++m) {
    double prev_c = 0.0;
    for (int i = 0; i < nr; ++i) {
      const std::size_t k = static_cast<std::size_t>(i) * nt + m;
      const double den = s.diag[k] - (i > 0 ? s.sub[i] * prev_c : 0.0);
      if (!(den > 0.0))
        throw NotCoerciveError("mode-decoupled operator is not positive definite (mode " +
                               std::to_string(m) + ", ring " + std::to_string(i) + ")");
      s.inv_den[k] = 1.0 / den;
      prev_c = s.super[i] / den;
      s.c_prime[k] = prev_c;
    }
  }
}

ModeSolver::~ModeSolver() = default;

void ModeSolver::solve(const Field& in, Field& out) const {
  const Impl& s = *impl_;
  if (out.empty() || out.size() != in.size()) out = Field(in.grid_ptr());
  Impl::Buffer buf(in.size());
  s.to_modes(in, buf);
  Complex* y = buf.complex();
  const int nr = s.nr;
  const int nt = s.nt;
  for (int i = 0; i < nr; ++i) {
    Complex* yi = y + static_cast<std::size_t>(i) * nt;
    const double* inv = s.inv_den.data() + static_cast<std::size_t>(i) * nt;
    if (i == 0) {
      for (int m = 0; m < nt; ++m) yi[m] *= inv[m];
    } else {
      const Complex* yp = yi - nt;
      const double a = s.sub[i];
      for (int m = 0; m < nt; ++m) yi[m] = (yi[m] - a * yp[m]) * inv[m];
    }
  }
  for (int i = nr - 2; i >= 0; --i) {
    Complex* yi = y + static_cast<std::size_t>(i) * nt;
    const Complex* yn = yi + nt;
    const double* c = s.c_prime.data() + static_cast<std::size_t>(i) * nt;
    for (int m = 0; m < nt; ++m) yi[m] -= c[m] * yn[m];
  }
  s.from_modes(buf, out);
}

void ModeSolver::apply(const Field& in, Field& out) const {
  const Impl& s = *impl_;
  if (out.empty() || out.size() != in.size()) out = Field(in.grid_ptr());
  Impl::Buffer buf(in.size());
  s.to_modes(in, buf);
  const Complex* x = buf.complex();
  std::vector<Complex> y(in.size());
  const int nr = s.nr;
  const int nt = s.nt;
  for (int i = 0; i < nr; ++i) {
    for (int m = 0; m < nt; ++m) {
      const std::size_t k = static_cast<std::size_t>(i) * nt + m;
      Complex v = s.diag[k] * x[k];
      if (i > 0) v += s.sub[i] * x[k - nt];
      if (i + 1 < nr) v += s.super[i] * x[k + nt];
      y[k] = v;
    }
  }
  std::memcpy(buf.data, y.data(), sizeof(Complex) * y.size());
  s.from_modes(buf, out);
}

// ---------------------------------------------------------------------------
// Preconditioner

namespace {

std::vector<double> ring_average(const PolarGrid& g, std::span<const double> values) {
  std::vector<double> avg(static_cast<std::size_t>(g.n_r()), 0.0);
  for (int i = 0; i < g.n_r(); ++i) {
    double s = 0.0;
    for (int j = 0; j < g.n_theta(); ++j) s += values[static_cast<std::size_t>(i) * g.n_theta() + j];
    avg[i] = s / g.n_theta();
  }
  return avg;
}

}  // namespace

Preconditioner::Preconditioner(PreconditionerSpec spec, OpsPtr ops, Field state)
    : spec_(spec), ops_(std::move(ops)), state_(std::move(state)) {
  spec_.validate();
  if (state_.empty() || !state_.grid().same_shape(ops_->grid()))
    throw UsageError("preconditioner state does not live on the operator grid");

  switch (spec_.kind) {
    case PrecondKind::P1:
      direct_ = std::make_shared<const ModeSolver>(*ops_, 0.0, spec_.shift_a);
      break;
    case PrecondKind::P2:
      direct_ = std::make_shared<const ModeSolver>(*ops_, 1.0, spec_.shift_a);
      break;
    case PrecondKind::P3:
    case PrecondKind::P4: {
      const auto s = state_.values();
      local_.resize(s.size());
      if (spec_.kind == PrecondKind::P3) {
        for (std::size_t k = 0; k < s.size(); ++k) local_[k] = ops_->f(std::norm(s[k]));
      } else {
        conj_local_.resize(s.size());
        for (std::size_t k = 0; k < s.size(); ++k) {
          const double rho = std::norm(s[k]);
          const double fp = ops_->f_prime(rho);
          local_[k] = ops_->f(rho) + fp * rho;
          conj_local_[k] = fp * s[k] * s[k];
        }
      }
      lambda_state_ = inner_l2(euclidean_gradient(*ops_, state_), state_);
      std::vector<double> extra;
      if (spec_.inner == InnerPrecond::mean_field) extra = ring_average(ops_->grid(), local_);
      inner_ = std::make_shared<const ModeSolver>(*ops_, 1.0, spec_.shift_a, std::move(extra));
      break;
    }
  }
}

KernelTerms Preconditioner::terms() const {
  KernelTerms t{.kinetic = 1.0, .potential = 1.0, .rotation = 1.0, .shift = spec_.shift_a};
  switch (spec_.kind) {
    case PrecondKind::P1: t.rotation = 0.0; break;
    case PrecondKind::P2: break;
    case PrecondKind::P3: t.local = local_; break;
    case PrecondKind::P4:
      t.local = local_;
      t.conj_local = conj_local_;
      t.shift -= lambda_state_ - spec_.sigma0;
      break;
  }
  return t;
}

void Preconditioner::apply(const Field& u, Field& out) const { ops_->apply(terms(), u, out); }

ResidualFloor Preconditioner::residual_floor() const {
  // A few dozen roundings per stencil evaluation. Near the pole the angular
  // stiffness makes this floor exceed 1e-12 relative on fine grids.
  return [this](const Field& x) {
    constexpr double kUlps = 64.0 * std::numeric_limits<double>::epsilon();
    return kUlps * ops_->abs_apply_norm(terms(), x);
  };
}

Field Preconditioner::apply(const Field& u) const {
  Field out(ops_->grid_ptr());
  apply(u, out);
  return out;
}

Field Preconditioner::krylov_solve(const Field& w, const Field* guess, SolveStats* stats) const {
  Field x = guess ? *guess : Field(w.grid_ptr());
  const FieldMap op = [this](const Field& in, Field& out) { apply(in, out); };
  const FieldMap prec = [this](const Field& in, Field& out) { inner_->solve(in, out); };
  const CgResult res =
      pcg(op, prec, w, x, spec_.inverse_tol, spec_.inverse_max_iter, residual_floor());
  if (stats) *stats = {res.iterations, res.relative_residual};
  if (!res.converged)
    throw ConvergenceError(std::string("preconditioner ") + std::string(to_string(spec_.kind)) +
                               " inverse did not converge: relative residual " +
                               format_sci(res.relative_residual) + " after " +
                               std::to_string(res.iterations) + " iterations",
                           res.iterations, res.relative_residual);
  return x;
}

Field Preconditioner::apply_inverse(const Field& w, const Field* guess, SolveStats* stats) const {
  require_same_grid(w, state_);
  if (direct_) {
    Field out(w.grid_ptr());
    direct_->solve(w, out);
    if (stats) *stats = {0, 0.0};
    return out;
  }
  try {
    return krylov_solve(w, guess, stats);
  } catch (const NotCoerciveError& e) {
    throw NotCoerciveError(std::string("preconditioner not coercive at this state (") + e.what() +
                           "); use a larger sigma0 or a state closer to the minimizer");
  }
}

Field Preconditioner::apply_inverse_krylov(const Field& w, SolveStats* stats) const {
  require_same_grid(w, state_);
  // Jacobi preconditioning keeps this path independent of the FFT machinery.
  const PolarGrid& g = ops_->grid();
  const KernelTerms t = terms();
  std::vector<double> diag(g.size());
  const double ht = g.h_theta();
  const auto V = ops_->potential();
  for (int i = 0; i < g.n_r(); ++i) {
    const double r = g.r(i);
    const double base = -0.5 * t.kinetic * (ops_->radial_diag() + stencil::kSecond[0] / (ht * ht * r * r)) +
                        t.potential * V[i] + t.shift;
    for (int j = 0; j < g.n_theta(); ++j) {
      const std::size_t k = static_cast<std::size_t>(i) * g.n_theta() + j;
      double d = base + (t.local.empty() ? 0.0 : t.local[k]);
      diag[k] = std::max(d, 1e-3 * std::abs(base));
    }
  }
  Field x(w.grid_ptr());
  const FieldMap op = [this](const Field& in, Field& out) { apply(in, out); };
  const FieldMap prec = [&diag](const Field& in, Field& out) {
    out = in;
    auto v = out.values();
    for (std::size_t k = 0; k < v.size(); ++k) v[k] /= diag[k];
  };
  const int budget = std::max(spec_.inverse_max_iter, 100000);
  const CgResult res = pcg(op, prec, w, x, spec_.inverse_tol, budget, residual_floor());
  if (stats) *stats = {res.iterations, res.relative_residual};
  if (!res.converged)
    throw ConvergenceError("Krylov cross-check solve did not converge", res.iterations,
                           res.relative_residual);
  return x;
}

Preconditioner assemble(const PreconditionerSpec& spec, const OpsPtr& ops, const Field& state) {
  return Preconditioner(spec, ops, state);
}

}  // namespace gprg
