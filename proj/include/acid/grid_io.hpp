#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "acid/grid.hpp"

namespace acid {

// Raw F64GRID payload. Masks and images share the format.
struct RawGrid {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;
};

// "F64GRID <w> <h>\n" followed by w*h little-endian doubles, row-major.
void write_f64grid(const std::filesystem::path& path, std::size_t width, std::size_t height,
                   std::span<const double> values);
void write_f64grid(const std::filesystem::path& path, const Image& image);
RawGrid read_f64grid_raw(const std::filesystem::path& path);
Image read_f64grid(const std::filesystem::path& path);

// 8-bit binary PGM with linear windowing: lo maps to 0, hi to 255, clamped.
void write_pgm(const std::filesystem::path& path, const Image& image, double lo, double hi);

// Shortest round-trip decimal form; used for every CSV and manifest number.
std::string format_number(double v);

}  // namespace acid
