#include "gprg/grid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "gprg/error.hpp"
#include "gprg/stencil.hpp"

namespace gprg {

PolarGrid::PolarGrid(int n_r, int n_theta, double radius)
    : n_r_(n_r), n_theta_(n_theta), radius_(radius) {
  if (!(radius > 0.0) || !std::isfinite(radius))
    throw ConfigError("grid radius must be positive and finite, got " + std::to_string(radius));
  if (n_r < kMinRadial)
    throw ConfigError("grid n_r must be at least " + std::to_string(kMinRadial) + ", got " +
                      std::to_string(n_r));
  if (n_theta < kMinAngular || n_theta % 2 != 0)
    throw ConfigError("grid n_theta must be even and at least " + std::to_string(kMinAngular) +
                      ", got " + std::to_string(n_theta));

  h_r_ = radius / n_r;
  h_theta_ = 2.0 * std::numbers::pi / n_theta;
  r_nodes_.resize(static_cast<std::size_t>(n_r));
  weights_.resize(static_cast<std::size_t>(n_r));
  for (int i = 0; i < n_r; ++i) {
    r_nodes_[i] = (i + 0.5) * h_r_;
    weights_[i] = r_nodes_[i] * h_r_ * h_theta_;
  }
}

bool PolarGrid::same_shape(const PolarGrid& other) const noexcept {
  return n_r_ == other.n_r_ && n_theta_ == other.n_theta_ && radius_ == other.radius_;
}

GridPtr build_polar_grid(int n_r, int n_theta, double radius) {
  return std::make_shared<const PolarGrid>(n_r, n_theta, radius);
}

Field::Field(GridPtr grid) : grid_(std::move(grid)), values_(grid_->size(), Complex{}) {}

Field::Field(GridPtr grid, std::vector<Complex> values)
    : grid_(std::move(grid)), values_(std::move(values)) {
  if (values_.size() != grid_->size())
    throw UsageError("field value count " + std::to_string(values_.size()) +
                     " does not match grid size " + std::to_string(grid_->size()));
}

void require_same_grid(const Field& a, const Field& b) {
  if (a.empty() || b.empty()) throw UsageError("operation on an empty field");
  if (a.grid_ptr() != b.grid_ptr() && !a.grid().same_shape(b.grid()))
    throw UsageError("fields live on different grids");
}

Field& Field::operator+=(const Field& other) {
  require_same_grid(*this, other);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += other.values_[k];
  return *this;
}

Field& Field::operator-=(const Field& other) {
  require_same_grid(*this, other);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] -= other.values_[k];
  return *this;
}

Field& Field::operator*=(double s) {
  for (auto& v : values_) v *= s;
  return *this;
}

Field& Field::operator*=(Complex s) {
  for (auto& v : values_) v *= s;
  return *this;
}

Field& Field::axpy(double a, const Field& x) {
  require_same_grid(*this, x);
  for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += a * x.values_[k];
  return *this;
}

void Field::set_zero() { std::fill(values_.begin(), values_.end(), Complex{}); }

bool Field::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](const Complex& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
  });
}

Field operator+(Field a, const Field& b) { return a += b; }
Field operator-(Field a, const Field& b) { return a -= b; }
Field operator*(double s, Field a) { return a *= s; }
Field operator*(Complex s, Field a) { return a *= s; }

double inner_l2(const Field& u, const Field& v) {
  require_same_grid(u, v);
  const PolarGrid& g = u.grid();
  double total = 0.0;
  for (int i = 0; i < g.n_r(); ++i) {
    const auto ur = u.row(i);
    const auto vr = v.row(i);
    // Compensated ring sum: the rounded result does not depend on where the
    // ring starts, so rotated fields give bitwise equal inner products.
    double row_sum = 0.0, carry = 0.0;
    for (int j = 0; j < g.n_theta(); ++j) {
      const double x = ur[j].real() * vr[j].real() + ur[j].imag() * vr[j].imag();
      const double t = row_sum + x;
      const double z = t - row_sum;
      carry += (row_sum - (t - z)) + (x - z);
      row_sum = t;
    }
    total += g.weight(i) * (row_sum + carry);
  }
  return total;
}

double norm_l2(const Field& u) { return std::sqrt(inner_l2(u, u)); }

double max_abs(const Field& u) {
  double m = 0.0;
  for (const auto& z : u.values()) m = std::max(m, std::abs(z));
  return m;
}

double norm_h1_discrete(const Field& u) {
  const PolarGrid& g = u.grid();
  const int nr = g.n_r();
  const int nt = g.n_theta();
  const double hr = g.h_r();
  const double ht = g.h_theta();

  // Radial part: face differences weighted by the face radius. The pole face
  // has zero weight and the outer face sees the homogeneous Dirichlet ghost.
  double radial = 0.0;
  for (int i = 0; i < nr; ++i) {
    const double face_r = (i + 1) * hr;
    const auto ui = u.row(i);
    double s = 0.0;
    if (i + 1 < nr) {
      const auto un = u.row(i + 1);
      for (int j = 0; j < nt; ++j) s += std::norm(un[j] - ui[j]);
    } else {
      for (int j = 0; j < nt; ++j) s += std::norm(ui[j]);
    }
    radial += face_r * s / (hr * hr) * hr * ht;
  }

  // Angular part: -(1/r^2) <D2 u, u> with the eighth-order stencil.
  double angular = 0.0;
  for (int i = 0; i < nr; ++i) {
    const auto ui = u.row(i);
    double s = 0.0;
    for (int j = 0; j < nt; ++j) {
      Complex d2{};
      for (int k = 1; k <= stencil::kHalfWidth; ++k) {
        const int jp = (j + k) % nt;
        const int jm = (j - k + nt) % nt;
        d2 += stencil::kSecond[k] * (ui[jp] + ui[jm] - 2.0 * ui[j]);
      }
      s -= d2.real() * ui[j].real() + d2.imag() * ui[j].imag();
    }
    const double r = g.r(i);
    angular += g.weight(i) * s / (ht * ht * r * r);
  }

  const double l2 = inner_l2(u, u);
  return std::sqrt(std::max(0.0, l2 + radial + angular));
}

Field rotate_by_index(const Field& u, int k) {
  const PolarGrid& g = u.grid();
  const int nt = g.n_theta();
  const int shift = ((k % nt) + nt) % nt;
  Field out(u.grid_ptr());
  for (int i = 0; i < g.n_r(); ++i) {
    const auto src = u.row(i);
    auto dst = out.row(i);
    for (int j = 0; j < nt; ++j) dst[(j + shift) % nt] = src[j];
  }
  return out;
}

Field phase_shift(const Field& u, double alpha) { return std::polar(1.0, alpha) * u; }

Field times_i(const Field& u) {
  Field out(u);
  for (auto& z : out.values()) z = Complex(-z.imag(), z.real());
  return out;
}

}  // namespace gprg
