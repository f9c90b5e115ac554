#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "gprg/error.hpp"
#include "gprg/io.hpp"
#include "gprg/oracle.hpp"
#include "support.hpp"

using namespace gprg;
using gprg::test::rel;

TEST_SUITE("discretization") {

TEST_CASE("reference grid spacings") {
  const GridPtr g = build_polar_grid(256, 1024, 12.0);
  CHECK(g->h_r() == 12.0 / 256.0);
  CHECK(g->h_r() == 0.046875);
  CHECK(g->h_theta() == doctest::Approx(2.0 * std::numbers::pi / 1024.0).epsilon(1e-15));
}

TEST_CASE("staggered radial nodes") {
  const GridPtr g = build_polar_grid(4, 16, 1.0);
  const double expect[] = {0.125, 0.375, 0.625, 0.875};
  for (int i = 0; i < 4; ++i) CHECK(g->r(i) == expect[i]);
}

TEST_CASE("quadrature integrates the disk area") {
  for (auto [nr, nt, radius] : {std::tuple{64, 128, 12.0}, {4, 16, 1.0}, {33, 18, 2.5}, {256, 1024, 12.0}}) {
    const GridPtr g = build_polar_grid(nr, nt, radius);
    double sum = 0.0;
    for (int i = 0; i < nr; ++i) sum += nt * g->weight(i);
    CHECK(rel(sum, std::numbers::pi * radius * radius) <= 1e-12);
    for (int i = 0; i < nr; ++i) {
      CHECK(g->r(i) > 0.0);
      CHECK(g->r(i) < radius);
    }
  }
}

TEST_CASE("invalid grids are configuration errors") {
  CHECK_THROWS_AS(build_polar_grid(3, 16, 1.0), ConfigError);
  CHECK_THROWS_AS(build_polar_grid(8, 14, 1.0), ConfigError);
  CHECK_THROWS_AS(build_polar_grid(8, 17, 1.0), ConfigError);
  CHECK_THROWS_AS(build_polar_grid(8, 16, 0.0), ConfigError);
  CHECK_THROWS_AS(build_polar_grid(8, 16, -2.0), ConfigError);
}

TEST_CASE("normalized Gaussian has unit L2 norm") {
  const GridPtr g = build_polar_grid(128, 256, 12.0);
  const Field u = test::oscillator_ground(g);
  // Midpoint rule on 2 r e^{-r^2}: Euler-Maclaurin leaves h^2/12 + 7 h^4/480
  // from the derivatives at the pole.
  const double h = g->h_r();
  CHECK(std::abs(inner_l2(u, u) - (1.0 + h * h / 12.0 + 7.0 * h * h * h * h / 480.0)) <= 1e-8);
  const GridPtr fine = build_polar_grid(2048, 16, 12.0);
  const Field uf = test::oscillator_ground(fine);
  CHECK(std::abs(inner_l2(uf, uf) - 1.0) <= 1e-5);
}

TEST_CASE("distinct Fourier modes are orthogonal") {
  const GridPtr g = build_polar_grid(32, 64, 3.0);
  const auto prof = [](double r) { return std::exp(-r * r); };
  const Field u = sample(g, [&](double r, double t) { return prof(r) * std::polar(1.0, t); });
  const Field v = sample(g, [&](double r, double t) { return prof(r) * std::polar(1.0, 2 * t); });
  CHECK(std::abs(inner_l2(u, v)) <= 1e-14);
  CHECK(std::abs(inner_l2(times_i(u), u)) <= 1e-15);
}

TEST_CASE("inner_l2 is a real inner product") {
  const GridPtr g = build_polar_grid(16, 32, 2.0);
  const Field u = random_field(g, 1), v = random_field(g, 2), w = random_field(g, 3);
  CHECK(inner_l2(u, v) == inner_l2(v, u));
  const double a = 0.7, b = -1.3;
  CHECK(rel(inner_l2(a * u + b * w, v), a * inner_l2(u, v) + b * inner_l2(w, v)) <= 1e-13);
  for (std::uint64_t s = 10; s < 20; ++s) CHECK(inner_l2(random_field(g, s), random_field(g, s)) > 0.0);
  CHECK_THROWS_AS(inner_l2(u, Field(build_polar_grid(16, 34, 2.0))), UsageError);
}

TEST_CASE("rotations and phases are L2 isometries") {
  const GridPtr g = build_polar_grid(12, 48, 2.0);
  const Field u = random_field(g, 4), v = random_field(g, 5);
  CHECK(max_abs(rotate_by_index(u, 0) - u) == 0.0);
  CHECK(max_abs(rotate_by_index(u, 48) - u) == 0.0);
  CHECK(max_abs(rotate_by_index(rotate_by_index(u, 7), -7) - u) == 0.0);
  for (int k : {1, 7, 30, -5})
    CHECK(rel(inner_l2(rotate_by_index(u, k), rotate_by_index(v, k)), inner_l2(u, v)) <= 1e-14);
  for (double alpha : {0.3, 1.7, -2.9})
    CHECK(rel(norm_l2(phase_shift(u, alpha)), norm_l2(u)) <= 1e-14);
  const Field r = rotate_by_index(u, 3);
  CHECK(r(2, 5) == u(2, 2));
  CHECK(r(2, 1) == u(2, 46));
}

TEST_CASE("discrete H1 norm") {
  const GridPtr g = build_polar_grid(8, 16, 3.0);
  CHECK(norm_h1_discrete(Field(g)) == 0.0);
  const Field u = random_field(g, 8);
  CHECK(rel(norm_h1_discrete(phase_shift(u, 1.1)), norm_h1_discrete(u)) <= 1e-14);
  CHECK(norm_h1_discrete(u) > norm_l2(u));

  // Quadratic form of identity plus the discrete -Lap, assembled densely.
  const ProblemParams p = test::params(0.0, 0.0);
  const OpsPtr ops = make_operators(g, p);
  const Eigen::MatrixXd stiff = dense_form(g, [&](const Field& f) { return -1.0 * apply_laplacian(*ops, f); });
  const Field phi = test::unit(test::oscillator_ground(g));
  const Eigen::VectorXd mass = assemble_dense(ops, phi).mass;
  const Eigen::VectorXd x = pack(phi);
  const double q = x.dot(mass.cwiseProduct(x)) + x.dot(stiff * x);
  CHECK(rel(norm_h1_discrete(phi) * norm_h1_discrete(phi), q) <= 1e-12);
}

TEST_CASE("field snapshots round-trip bit for bit") {
  const GridPtr g = build_polar_grid(6, 16, 1.5);
  const Field u = random_field(g, 9);
  const std::string bytes = encode_field(u);
  CHECK(bytes.size() == 32 + 16 * u.size());
  CHECK(bytes.substr(0, 8) == "GPRGFLD1");
  const Field v = decode_field(bytes);
  CHECK(v.grid().n_r() == 6);
  CHECK(v.grid().n_theta() == 16);
  CHECK(v.grid().radius() == 1.5);
  CHECK(max_abs(u - v) == 0.0);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_field(bad), ConfigError);
  CHECK_THROWS_AS(decode_field(bytes.substr(0, bytes.size() - 8)), ConfigError);
  CHECK_THROWS_AS(decode_field("GPRG"), ConfigError);

  const auto dir = std::filesystem::temp_directory_path() / "gprg_io_test" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  write_field(dir / "u.gpfld", u);
  CHECK(max_abs(read_field(dir / "u.gpfld") - u) == 0.0);
  CHECK_THROWS_AS(read_field(dir / "missing.gpfld"), ConfigError);
  std::filesystem::remove_all(dir.parent_path());

  const std::string csv = field_to_csv(u);
  CHECK(csv.starts_with("r,theta,re,im,abs2\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == static_cast<long>(u.size()) + 1);
}

TEST_CASE("resampling reproduces smooth fields") {
  const auto f = [](double r, double t) {
    return std::exp(-r * r) * (Complex(1.0, 0.0) + 0.5 * r * std::polar(1.0, t) +
                               0.3 * r * r * std::polar(1.0, -2.0 * t));
  };
  const GridPtr coarse = build_polar_grid(64, 64, 6.0);
  const GridPtr fine = build_polar_grid(128, 128, 6.0);
  const Field u = sample(coarse, f);
  const Field up = resample(u, fine);
  CHECK(max_abs(up - sample(fine, f)) <= 2e-4);
  const Field back = resample(up, coarse);
  CHECK(max_abs(back - u) <= 2e-4);
  CHECK(max_abs(resample(u, coarse) - u) <= 1e-14);
}

}
