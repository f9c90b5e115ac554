#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace gprg {

using Complex = std::complex<double>;

/// Staggered polar mesh on the disk of radius R.
///
/// Radial nodes sit at r_{i+1/2} = (i + 1/2) h_r, so neither the pole nor the
/// outer boundary is a grid node. Angular nodes are Theta_j = j h_theta.
/// Quadrature is the midpoint rule in r and the periodic trapezoid rule in
/// Theta, which integrates r dr dTheta exactly.
class PolarGrid {
 public:
  static constexpr int kMinRadial = 4;
  static constexpr int kMinAngular = 16;

  /// Throws ConfigError on non-positive radius, n_r < 4, or an odd or too
  /// small n_theta.
  PolarGrid(int n_r, int n_theta, double radius);

  int n_r() const noexcept { return n_r_; }
  int n_theta() const noexcept { return n_theta_; }
  double radius() const noexcept { return radius_; }
  double h_r() const noexcept { return h_r_; }
  double h_theta() const noexcept { return h_theta_; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(n_r_) * static_cast<std::size_t>(n_theta_);
  }

  std::span<const double> r_nodes() const noexcept { return r_nodes_; }
  double r(int i) const noexcept { return r_nodes_[static_cast<std::size_t>(i)]; }
  double theta(int j) const noexcept { return j * h_theta_; }

  /// Quadrature weight w_ij = r_{i+1/2} h_r h_theta (independent of j).
  double weight(int i) const noexcept { return weights_[static_cast<std::size_t>(i)]; }
  std::span<const double> row_weights() const noexcept { return weights_; }

  bool same_shape(const PolarGrid& other) const noexcept;

 private:
  int n_r_;
  int n_theta_;
  double radius_;
  double h_r_;
  double h_theta_;
  std::vector<double> r_nodes_;
  std::vector<double> weights_;
};

using GridPtr = std::shared_ptr<const PolarGrid>;

GridPtr build_polar_grid(int n_r, int n_theta, double radius);

/// Complex samples on a PolarGrid, row-major with the radial index outermost.
class Field {
 public:
  Field() = default;
  explicit Field(GridPtr grid);
  Field(GridPtr grid, std::vector<Complex> values);

  const PolarGrid& grid() const { return *grid_; }
  const GridPtr& grid_ptr() const noexcept { return grid_; }
  bool empty() const noexcept { return grid_ == nullptr; }
  std::size_t size() const noexcept { return values_.size(); }

  Complex& operator()(int i, int j) {
    return values_[static_cast<std::size_t>(i) * grid_->n_theta() + j];
  }
  const Complex& operator()(int i, int j) const {
    return values_[static_cast<std::size_t>(i) * grid_->n_theta() + j];
  }

  std::span<Complex> values() noexcept { return values_; }
  std::span<const Complex> values() const noexcept { return values_; }
  std::span<Complex> row(int i) {
    return std::span<Complex>(values_).subspan(static_cast<std::size_t>(i) * grid_->n_theta(),
                                               grid_->n_theta());
  }
  std::span<const Complex> row(int i) const {
    return std::span<const Complex>(values_).subspan(
        static_cast<std::size_t>(i) * grid_->n_theta(), grid_->n_theta());
  }

  Field& operator+=(const Field& other);
  Field& operator-=(const Field& other);
  Field& operator*=(double s);
  Field& operator*=(Complex s);

  /// this += a * x
  Field& axpy(double a, const Field& x);

  void set_zero();
  bool all_finite() const;

 private:
  GridPtr grid_;
  std::vector<Complex> values_;
};

Field operator+(Field a, const Field& b);
Field operator-(Field a, const Field& b);
Field operator*(double s, Field a);
Field operator*(Complex s, Field a);

/// Throws UsageError unless both fields live on grids of the same shape.
void require_same_grid(const Field& a, const Field& b);

/// Real L2 inner product Re sum_ij w_ij u_ij conj(v_ij).
double inner_l2(const Field& u, const Field& v);
double norm_l2(const Field& u);
double max_abs(const Field& u);

/// sqrt(|u|_L2^2 + |grad u|_L2^2) with the discrete Dirichlet form of the
/// polar Laplacian stencils (radial face differences, 8th-order angular form).
double norm_h1_discrete(const Field& u);

/// output(i, j) = u(i, j - k mod n_theta): rotation of the sampled function
/// by the angle k h_theta.
Field rotate_by_index(const Field& u, int k);

/// e^{i alpha} u
Field phase_shift(const Field& u, double alpha);

/// i u
Field times_i(const Field& u);

/// Sample g(r, theta) on the grid.
template <class Fn>
Field sample(const GridPtr& grid, Fn&& g) {
  Field out(grid);
  for (int i = 0; i < grid->n_r(); ++i) {
    const double r = grid->r(i);
    for (int j = 0; j < grid->n_theta(); ++j) out(i, j) = g(r, grid->theta(j));
  }
  return out;
}

}  // namespace gprg
