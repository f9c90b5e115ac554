#pragma once

#include <vector>

#include "gprg/grid.hpp"
#include "gprg/krylov.hpp"

namespace gprg {

struct LobpcgOptions {
  int max_iter = 300;
  /// Relative eigen-residual |A x - theta B x| / max(|A x|, |theta| |B x|).
  double tol = 1e-9;
  /// Target the largest eigenvalues instead of the smallest.
  bool largest = false;
};

struct LobpcgResult {
  /// Sorted ascending for smallest, descending for largest.
  std::vector<double> values;
  std::vector<Field> vectors;
  std::vector<double> residuals;
  int iterations = 0;
  bool converged = false;
};

/// Block preconditioned eigensolver (LOBPCG with soft locking and an
/// SVQB-orthonormalized Rayleigh-Ritz step) for A x = theta B x in the real
/// L2 inner product, restricted to the L2-orthogonal complement of
/// `constraints` (which must be L2-orthonormal).
///
/// B may be empty (identity), T (the preconditioner) may be empty (identity).
/// The block size is initial.size(); the first nev pairs are returned.
LobpcgResult lobpcg(const FieldMap& A, const FieldMap& B, const FieldMap& T,
                    const std::vector<Field>& constraints, std::vector<Field> initial, int nev,
                    const LobpcgOptions& options = {});

/// Removes the L2 components along the (orthonormal) constraint vectors.
void project_out(Field& v, const std::vector<Field>& constraints);

/// Gram-Schmidt (twice) in L2; vectors with negligible norm are dropped.
std::vector<Field> orthonormalize(std::vector<Field> vectors, double drop_tol = 1e-10);

}  // namespace gprg
