#include "acid/grid_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "acid/errors.hpp"

namespace acid {

namespace {

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xFFu) << (8 * (7 - i));
    return r;
  }
  return v;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void write_f64grid(const std::filesystem::path& path, std::size_t width, std::size_t height,
                   std::span<const double> values) {
  if (values.size() != width * height) throw ShapeError("F64GRID payload size mismatch");
  auto out = open_out(path);
  out << "F64GRID " << width << ' ' << height << '\n';
  std::vector<std::uint64_t> raw(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    raw[i] = to_little(std::bit_cast<std::uint64_t>(values[i]));
  }
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t)));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_f64grid(const std::filesystem::path& path, const Image& image) {
  write_f64grid(path, image.width(), image.height(), image.values());
}

RawGrid read_f64grid_raw(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  RawGrid g;
  if (!(hs >> magic >> g.width >> g.height) || magic != "F64GRID") {
    throw ValidationError(path.string() + ": bad F64GRID header");
  }
  std::vector<std::uint64_t> raw(g.width * g.height);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t)));
  if (in.gcount() != static_cast<std::streamsize>(raw.size() * sizeof(std::uint64_t))) {
    throw ValidationError(path.string() + ": truncated F64GRID payload");
  }
  g.values.resize(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    g.values[i] = std::bit_cast<double>(to_little(raw[i]));
  }
  return g;
}

Image read_f64grid(const std::filesystem::path& path) {
  RawGrid g = read_f64grid_raw(path);
  return Image(g.width, g.height, std::move(g.values));
}

void write_pgm(const std::filesystem::path& path, const Image& image, double lo, double hi) {
  if (!(hi > lo)) throw ValidationError("PGM window must satisfy hi > lo");
  auto out = open_out(path);
  out << "P5\n" << image.width() << ' ' << image.height() << "\n255\n";
  std::vector<unsigned char> bytes(image.size());
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double t = std::clamp((image[i] - lo) / (hi - lo), 0.0, 1.0);
    bytes[i] = static_cast<unsigned char>(std::lround(t * 255.0));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace acid
