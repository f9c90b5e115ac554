#pragma once

#include <array>
#include <cmath>

namespace gprg::stencil {

// Eighth-order central differences on a uniform periodic grid. Index k holds
// the coefficient of offset +k; offsets -k use the mirrored value (negated for
// the first derivative).
inline constexpr int kHalfWidth = 4;

inline constexpr std::array<double, 5> kFirst = {0.0, 4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0,
                                                 -1.0 / 280.0};

inline constexpr std::array<double, 5> kSecond = {-205.0 / 72.0, 8.0 / 5.0, -1.0 / 5.0,
                                                  8.0 / 315.0, -1.0 / 560.0};

/// Symbol of the periodic first-derivative stencil times -i, i.e. the
/// eigenvalue of the discrete L_z on the mode e^{i m Theta}.
inline double lz_symbol(int m, double h) {
  double s = 0.0;
  for (int k = 1; k <= kHalfWidth; ++k) s += kFirst[k] * std::sin(k * m * h);
  return 2.0 * s / h;
}

/// Eigenvalue of the periodic second-derivative stencil on e^{i m Theta}.
inline double d2_symbol(int m, double h) {
  double s = kSecond[0];
  for (int k = 1; k <= kHalfWidth; ++k) s += 2.0 * kSecond[k] * std::cos(k * m * h);
  return s / (h * h);
}

}  // namespace gprg::stencil
