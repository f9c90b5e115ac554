#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include "gprg/grid.hpp"

namespace gprg {

/// Writes contents to a sibling temporary file and renames it over path, so
/// readers never observe a partially written file. Creates parent
/// directories as needed.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

std::string read_file(const std::filesystem::path& path);

/// Binary snapshot: 32-byte header {"GPRGFLD1", n_r u64, n_theta u64,
/// radius f64} followed by interleaved (re, im) f64 values, i-major. All
/// numbers little-endian.
std::string encode_field(const Field& field);
/// Throws ConfigError on a bad magic, a truncated body or a size mismatch.
Field decode_field(std::string_view bytes);

void write_field(const std::filesystem::path& path, const Field& field);
Field read_field(const std::filesystem::path& path);

/// Lossy plotting export with columns r,theta,re,im,abs2.
std::string field_to_csv(const Field& field);

/// Interpolates u onto another polar grid: trigonometric in Theta (modes
/// shared by both grids are kept, the rest dropped) and cubic Lagrange in r,
/// using the antipodal continuation through the pole and zero data past R.
Field resample(const Field& u, const GridPtr& target);

}  // namespace gprg
