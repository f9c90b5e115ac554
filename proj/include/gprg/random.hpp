#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

#include "gprg/grid.hpp"

namespace gprg {

// Box-Muller on top of mt19937_64 so the stream is identical across
// standard libraries.
class Normal {
 public:
  explicit Normal(std::uint64_t seed) : gen_(seed) {}
  double operator()() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform_open();
    const double rad = std::sqrt(-2.0 * std::log(u1));
    spare_ = rad * std::sin(2.0 * std::numbers::pi * u2);
    has_spare_ = true;
    return rad * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  double uniform_open() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }
  std::mt19937_64 gen_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

/// Field with independent standard normal real and imaginary parts.
inline Field random_field(const GridPtr& grid, std::uint64_t seed) {
  Normal normal(seed);
  Field out(grid);
  for (auto& z : out.values()) {
    const double a = normal();
    const double b = normal();
    z = {a, b};
  }
  return out;
}

}  // namespace gprg
