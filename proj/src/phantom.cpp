#include "acid/phantom.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

#include "acid/errors.hpp"
#include "acid/random.hpp"

namespace acid {

EllipsePhantomSpec random_phantom_spec(std::size_t count, std::uint64_t seed) {
  EllipsePhantomSpec spec;
  spec.seed = seed;
  Rng rng(seed);
  std::uniform_real_distribution<double> center(0.25, 0.75), axis(0.05, 0.3),
      angle(0.0, std::numbers::pi), level(0.1, 0.5);
  for (std::size_t i = 0; i < count; ++i) {
    Ellipse e;
    e.cx = center(rng);
    e.cy = center(rng);
    e.ax = axis(rng);
    e.ay = axis(rng);
    e.rotation = angle(rng);
    e.intensity = level(rng);
    spec.ellipses.push_back(e);
  }
  return spec;
}

Image make_phantom(const EllipsePhantomSpec& spec, std::size_t width, std::size_t height) {
  constexpr int kSub = 4;
  Image f(width, height);
  for (const Ellipse& e : spec.ellipses) {
    if (!(e.ax > 0.0) || !(e.ay > 0.0)) throw ValidationError("ellipse axes must be positive");
    if (!std::isfinite(e.cx) || !std::isfinite(e.cy) || !std::isfinite(e.rotation) ||
        !std::isfinite(e.intensity)) {
      throw ValidationError("ellipse parameters must be finite");
    }
    const double cs = std::cos(e.rotation), sn = std::sin(e.rotation);
    for (std::size_t r = 0; r < height; ++r) {
      for (std::size_t c = 0; c < width; ++c) {
        int inside = 0;
        for (int i = 0; i < kSub; ++i) {
          for (int j = 0; j < kSub; ++j) {
            const double x = (double(c) + (j + 0.5) / kSub) / double(width) - e.cx;
            const double y = (double(r) + (i + 0.5) / kSub) / double(height) - e.cy;
            const double u = (x * cs + y * sn) / e.ax;
            const double v = (-x * sn + y * cs) / e.ay;
            inside += u * u + v * v <= 1.0;
          }
        }
        if (inside) f(r, c) += e.intensity * double(inside) / double(kSub * kSub);
      }
    }
  }
  return f;
}

// ---------------------------------------------------------------------------
// 5x7 font

std::size_t Glyph::popcount() const {
  return std::size_t(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

namespace {

struct FontChar {
  char ch;
  std::array<const char*, 7> rows;
};

constexpr FontChar kFont[] = {
    {' ', {".....", ".....", ".....", ".....", ".....", ".....", "....."}},
    {'A', {".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
    {'B', {"####.", "#...#", "#...#", "####.", "#...#", "#...#", "####."}},
    {'C', {".###.", "#...#", "#....", "#....", "#....", "#...#", ".###."}},
    {'D', {"####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."}},
    {'E', {"#####", "#....", "#....", "####.", "#....", "#....", "#####"}},
    {'F', {"#####", "#....", "#....", "####.", "#....", "#....", "#...."}},
    {'G', {".###.", "#...#", "#....", "#.###", "#...#", "#...#", ".####"}},
    {'H', {"#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"}},
    {'I', {".###.", "..#..", "..#..", "..#..", "..#..", "..#..", ".###."}},
    {'J', {"..###", "...#.", "...#.", "...#.", "...#.", "#..#.", ".##.."}},
    {'K', {"#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"}},
    {'L', {"#....", "#....", "#....", "#....", "#....", "#....", "#####"}},
    {'M', {"#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"}},
    {'N', {"#...#", "#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#"}},
    {'O', {".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
    {'P', {"####.", "#...#", "#...#", "####.", "#....", "#....", "#...."}},
    {'Q', {".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"}},
    {'R', {"####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"}},
    {'S', {".####", "#....", "#....", ".###.", "....#", "....#", "####."}},
    {'T', {"#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."}},
    {'U', {"#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."}},
    {'V', {"#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."}},
    {'W', {"#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."}},
    {'X', {"#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"}},
    {'Y', {"#...#", "#...#", ".#.#.", "..#..", "..#..", "..#..", "..#.."}},
    {'Z', {"#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"}},
    {'0', {".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."}},
    {'1', {"..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."}},
    {'2', {".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"}},
    {'3', {"#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."}},
    {'4', {"...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."}},
    {'5', {"#####", "#....", "####.", "....#", "....#", "#...#", ".###."}},
    {'6', {"..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."}},
    {'7', {"#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."}},
    {'8', {".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."}},
    {'9', {".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."}},
    {'.', {".....", ".....", ".....", ".....", ".....", ".##..", ".##.."}},
    {',', {".....", ".....", ".....", ".....", ".##..", "..#..", ".#..."}},
    {'!', {"..#..", "..#..", "..#..", "..#..", "..#..", ".....", "..#.."}},
    {'?', {".###.", "#...#", "....#", "...#.", "..#..", ".....", "..#.."}},
    {'-', {".....", ".....", ".....", "#####", ".....", ".....", "....."}},
    {':', {".....", ".##..", ".##..", ".....", ".##..", ".##..", "....."}},
};

const FontChar& lookup(char ch) {
  const char up = char(std::toupper(static_cast<unsigned char>(ch)));
  for (const auto& fc : kFont) {
    if (fc.ch == up) return fc;
  }
  throw ValidationError(std::string("character '") + ch + "' is not in the built-in font");
}

}  // namespace

Glyph text_glyph(std::string_view text, std::size_t scale) {
  if (scale == 0) throw ValidationError("glyph scale must be positive");
  Glyph g;
  if (text.empty()) return g;
  const std::size_t cols = text.size() * 6 - 1;
  g.width = cols * scale;
  g.height = 7 * scale;
  g.bits.assign(g.width * g.height, 0);
  for (std::size_t k = 0; k < text.size(); ++k) {
    const FontChar& fc = lookup(text[k]);
    for (std::size_t r = 0; r < 7; ++r) {
      for (std::size_t c = 0; c < 5; ++c) {
        if (fc.rows[r][c] != '#') continue;
        for (std::size_t i = 0; i < scale; ++i) {
          for (std::size_t j = 0; j < scale; ++j) {
            g.bits[(r * scale + i) * g.width + (k * 6 + c) * scale + j] = 1;
          }
        }
      }
    }
  }
  return g;
}

Image insert_structure(const Image& f, const StructuralInsert& insert) {
  const Glyph& g = insert.glyph;
  if (g.bits.size() != g.width * g.height) throw ValidationError("glyph bitmap size mismatch");
  if (insert.row + g.height > f.height() || insert.col + g.width > f.width()) {
    throw ValidationError("structural insert does not fit inside the image");
  }
  if (!std::isfinite(insert.intensity)) throw ValidationError("insert intensity must be finite");
  Image out = f;
  for (std::size_t r = 0; r < g.height; ++r) {
    for (std::size_t c = 0; c < g.width; ++c) {
      if (g.bits[r * g.width + c]) out(insert.row + r, insert.col + c) = insert.intensity;
    }
  }
  return out;
}

Image add_noise(const Image& f, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be >= 0");
  if (sigma == 0.0) return f;
  Rng rng(seed);
  Image out = f;
  const auto n = gaussian_vector(f.size(), rng, sigma);
  for (std::size_t i = 0; i < f.size(); ++i) out[i] += n[i];
  return out;
}

Measurement add_noise(const Measurement& p, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw ValidationError("sigma must be >= 0");
  if (sigma == 0.0) return p;
  Rng rng(seed);
  Measurement out = p;
  const auto n = gaussian_vector(p.real_size(), rng, sigma);
  for (std::size_t i = 0; i < p.real_size(); ++i) out[i] += n[i];
  return out;
}

}  // namespace acid
