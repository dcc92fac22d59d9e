#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "acid/grid.hpp"

namespace acid {

// Center and semi-axes are fractions of the image side; (0.5, 0.5) is the
// middle of the grid. rotation is in radians.
struct Ellipse {
  double cx = 0.5;
  double cy = 0.5;
  double ax = 0.25;
  double ay = 0.25;
  double rotation = 0.0;
  double intensity = 1.0;
};

struct EllipsePhantomSpec {
  std::vector<Ellipse> ellipses;
  std::uint64_t seed = 0;  // provenance of a random spec; unused by make_phantom
};

// `count` ellipses with centers in [0.25, 0.75], semi-axes in [0.05, 0.3],
// arbitrary rotation and intensity in [0.1, 0.5].
EllipsePhantomSpec random_phantom_spec(std::size_t count, std::uint64_t seed);

// Sum of ellipse indicators, anti-aliased by averaging a 4x4 subsample grid
// per pixel. Throws ValidationError for non-positive axes.
Image make_phantom(const EllipsePhantomSpec& spec, std::size_t width, std::size_t height);

struct Glyph {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> bits;  // row-major, 1 = set

  std::size_t popcount() const;
};

// Renders text in the built-in 5x7 font (A-Z, 0-9, space and . , ! ? - :),
// one blank column between characters, each font pixel scaled to
// scale x scale pixels. Lowercase maps to uppercase.
Glyph text_glyph(std::string_view text, std::size_t scale = 1);

struct StructuralInsert {
  Glyph glyph;
  std::size_t row = 0;
  std::size_t col = 0;
  double intensity = 1.0;
};

// Overwrites the glyph's set pixels with the insert intensity.
Image insert_structure(const Image& f, const StructuralInsert& insert);

// Adds seeded zero-mean Gaussian noise; sigma = 0 returns the input.
Image add_noise(const Image& f, double sigma, std::uint64_t seed);
Measurement add_noise(const Measurement& p, double sigma, std::uint64_t seed);

}  // namespace acid
