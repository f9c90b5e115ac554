#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "gprg/error.hpp"
#include "gprg/grid.hpp"

namespace gprg {

struct CgResult {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  /// Converged on the rounding floor rather than on tol.
  bool floor_limited = false;
};

using FieldMap = std::function<void(const Field& in, Field& out)>;
/// Absolute residual below which rounding in A x dominates, given x.
using ResidualFloor = std::function<double(const Field& x)>;

/// Preconditioned conjugate gradients in the real L2 inner product.
///
/// `apply` must be symmetric and positive definite with respect to inner_l2,
/// `precondition` an SPD approximation of its inverse. x holds the initial
/// guess on entry. Throws NotCoerciveError if a search direction has
/// non-positive curvature. Convergence is judged on the true residual
/// |b - A x| <= tol |b|; the recurrence is restarted if it drifted. When a
/// floor is supplied, a true residual under floor(x) also counts as converged.
inline CgResult pcg(const FieldMap& apply, const FieldMap& precondition, const Field& b, Field& x,
                    double tol, int max_iter, const ResidualFloor& floor = {}) {
  CgResult result;
  const double b_norm = norm_l2(b);
  if (b_norm == 0.0) {
    x = Field(b.grid_ptr());
    result.converged = true;
    return result;
  }
  if (x.empty()) x = Field(b.grid_ptr());

  Field r(b.grid_ptr()), z(b.grid_ptr()), p(b.grid_ptr()), ap(b.grid_ptr());
  auto true_residual = [&]() {
    apply(x, ap);
    r = b;
    r -= ap;
    return norm_l2(r);
  };

  auto accept = [&](double res) {
    if (res <= tol * b_norm) return true;
    if (floor && res <= floor(x)) {
      result.floor_limited = true;
      return true;
    }
    return false;
  };

  double r_norm = true_residual();
  if (r_norm > b_norm) {
    // A stale warm start is worse than none.
    x.set_zero();
    r = b;
    r_norm = b_norm;
  }
  constexpr int kMaxRestarts = 8;
  for (int restart = 0; restart <= kMaxRestarts; ++restart) {
    if (accept(r_norm)) {
      result.converged = true;
      break;
    }
    precondition(r, z);
    p = z;
    double rz = inner_l2(r, z);
    while (result.iterations < max_iter) {
      apply(p, ap);
      const double curvature = inner_l2(p, ap);
      if (!(curvature > 0.0))
        throw NotCoerciveError("conjugate gradients met non-positive curvature " +
                               std::to_string(curvature) + " after " +
                               std::to_string(result.iterations) + " iterations");
      const double alpha = rz / curvature;
      x.axpy(alpha, p);
      r.axpy(-alpha, ap);
      ++result.iterations;
      r_norm = norm_l2(r);
      if (r_norm <= tol * b_norm) break;
      precondition(r, z);
      const double rz_next = inner_l2(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t k = 0; k < p.size(); ++k)
        p.values()[k] = z.values()[k] + beta * p.values()[k];
    }
    r_norm = true_residual();
    if (accept(r_norm)) {
      result.converged = true;
      break;
    }
    if (result.iterations >= max_iter) break;
  }
  result.relative_residual = r_norm / b_norm;
  return result;
}

}  // namespace gprg
