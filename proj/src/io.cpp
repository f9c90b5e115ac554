#include "gprg/io.hpp"

#include <fftw3.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "gprg/error.hpp"

namespace gprg {

namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view contents) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

namespace {

constexpr char kMagic[8] = {'G', 'P', 'R', 'G', 'F', 'L', 'D', '1'};
constexpr std::size_t kHeader = 32;

template <class T>
void put(std::string& out, T value) {
  static_assert(sizeof(T) == 8);
  std::uint64_t bits;
  std::memcpy(&bits, &value, 8);
  for (int k = 0; k < 8; ++k) out.push_back(static_cast<char>((bits >> (8 * k)) & 0xffu));
}

template <class T>
T get(std::string_view in, std::size_t offset) {
  std::uint64_t bits = 0;
  for (int k = 0; k < 8; ++k)
    bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[offset + k])) << (8 * k);
  T value;
  std::memcpy(&value, &bits, 8);
  return value;
}

}  // namespace

std::string encode_field(const Field& field) {
  if (field.empty()) throw UsageError("cannot encode an empty field");
  const PolarGrid& g = field.grid();
  std::string out;
  out.reserve(kHeader + 16 * field.size());
  out.append(kMagic, 8);
  put(out, static_cast<std::uint64_t>(g.n_r()));
  put(out, static_cast<std::uint64_t>(g.n_theta()));
  put(out, g.radius());
  for (const Complex& z : field.values()) {
    put(out, z.real());
    put(out, z.imag());
  }
  return out;
}

Field decode_field(std::string_view bytes) {
  if (bytes.size() < kHeader || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw ConfigError("not a GPRGFLD1 field snapshot");
  const auto n_r = get<std::uint64_t>(bytes, 8);
  const auto n_theta = get<std::uint64_t>(bytes, 16);
  const auto radius = get<double>(bytes, 24);
  if (n_r > (1u << 20) || n_theta > (1u << 20))
    throw ConfigError("field snapshot header has implausible sizes");
  const std::size_t count = static_cast<std::size_t>(n_r) * n_theta;
  if (bytes.size() != kHeader + 16 * count)
    throw ConfigError("field snapshot body has " + std::to_string(bytes.size() - kHeader) +
                      " bytes, expected " + std::to_string(16 * count));
  auto grid = build_polar_grid(static_cast<int>(n_r), static_cast<int>(n_theta), radius);
  std::vector<Complex> values(count);
  for (std::size_t k = 0; k < count; ++k)
    values[k] = {get<double>(bytes, kHeader + 16 * k), get<double>(bytes, kHeader + 16 * k + 8)};
  return Field(std::move(grid), std::move(values));
}

void write_field(const fs::path& path, const Field& field) {
  write_file_atomic(path, encode_field(field));
}

Field read_field(const fs::path& path) { return decode_field(read_file(path)); }

std::string field_to_csv(const Field& field) {
  const PolarGrid& g = field.grid();
  std::string out = "r,theta,re,im,abs2\n";
  char buf[160];
  for (int i = 0; i < g.n_r(); ++i)
    for (int j = 0; j < g.n_theta(); ++j) {
      const Complex z = field(i, j);
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g\n", g.r(i), g.theta(j),
                    z.real(), z.imag(), std::norm(z));
      out += buf;
    }
  return out;
}

namespace {

// Row-wise DFT along Theta; forward has no scaling.
void ring_dft(std::vector<Complex>& data, int n_rows, int n, int sign) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan = fftw_plan_many_dft(1, &n, n_rows, ptr, nullptr, 1, n, ptr, nullptr, 1, n,
                                      sign, FFTW_ESTIMATE);
  fftw_execute(plan);
  fftw_destroy_plan(plan);
}

}  // namespace

Field resample(const Field& u, const GridPtr& target) {
  const PolarGrid& src = u.grid();
  const int nr = src.n_r(), nt = src.n_theta();
  const int nr2 = target->n_r(), nt2 = target->n_theta();
  const double h = src.h_r();

  std::vector<Complex> spec(u.values().begin(), u.values().end());
  ring_dft(spec, nr, nt, FFTW_FORWARD);
  const int m_max = std::min(nt, nt2) / 2 - 1;

  auto mode_index = [](int m, int n) { return m >= 0 ? m : m + n; };
  auto coeff = [&](int i, int m) -> Complex {
    if (i >= nr) return {};
    const int k = mode_index(m, nt);
    if (i >= 0) return spec[static_cast<std::size_t>(i) * nt + k];
    // u(-r, Theta) = u(r, Theta + pi): mode m picks up (-1)^m.
    const Complex c = spec[static_cast<std::size_t>(-i - 1) * nt + k];
    return (m % 2 == 0) ? c : -c;
  };

  std::vector<Complex> out(static_cast<std::size_t>(nr2) * nt2);
  for (int i2 = 0; i2 < nr2; ++i2) {
    const double t = target->r(i2) / h - 0.5;
    const int i0 = static_cast<int>(std::floor(t));
    const double s = t - i0;
    const double w[4] = {-s * (s - 1.0) * (s - 2.0) / 6.0, (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0,
                         -(s + 1.0) * s * (s - 2.0) / 2.0, (s + 1.0) * s * (s - 1.0) / 6.0};
    for (int m = -m_max; m <= m_max; ++m) {
      Complex v{};
      for (int q = 0; q < 4; ++q) v += w[q] * coeff(i0 - 1 + q, m);
      out[static_cast<std::size_t>(i2) * nt2 + mode_index(m, nt2)] = v / static_cast<double>(nt);
    }
  }
  ring_dft(out, nr2, nt2, FFTW_BACKWARD);
  return Field(target, std::move(out));
}

}  // namespace gprg
