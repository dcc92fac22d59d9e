#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "acid/grid.hpp"

namespace acid {

// Parallel-beam geometry on a square image with unit pixel spacing.
// Measurement layout is angle-major: index = angle * num_detectors + detector.
struct RadonGeometry {
  std::size_t side = 0;
  std::size_t num_detectors = 0;
  std::vector<double> angles;  // radians, strictly increasing in [0, pi)

  // num_angles equispaced angles i*pi/num_angles.
  static RadonGeometry uniform(std::size_t side, std::size_t num_angles);
};

// Keeps `kept` equispaced views out of a `full_angles` acquisition.
RadonGeometry select_views(std::size_t full_angles, std::size_t kept, std::size_t side);

// Detector count used for a given side: ceil(sqrt(2)*side), bumped by one when
// the outermost subpixel would otherwise fall off the detector array.
std::size_t detector_count(std::size_t side);

enum class MaskPattern { gaussian2d, radial, full, custom };

std::string to_string(MaskPattern p);
MaskPattern parse_mask_pattern(const std::string& name);

// Sampling mask in unshifted DFT index order (DC at row 0, column 0).
struct FourierMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> grid;  // 1 = sampled
  double sampling_rate = 1.0;
  MaskPattern pattern = MaskPattern::full;
  std::uint64_t seed = 0;

  std::size_t popcount() const;
  bool operator==(const FourierMask&) const = default;
};

FourierMask make_mask(MaskPattern pattern, double rate, std::size_t width, std::size_t height,
                      std::uint64_t seed);
// Wraps an arbitrary 0/1 grid (e.g. one loaded from F64GRID).
FourierMask mask_from_grid(std::size_t width, std::size_t height,
                           const std::vector<double>& values);

// Linear measurement operator A with its exact adjoint. Cheap to copy; the
// precomputed tables are shared and immutable.
class ForwardModel {
 public:
  static ForwardModel radon(RadonGeometry geometry);
  static ForwardModel fourier(FourierMask mask);

  MeasurementKind kind() const noexcept;
  std::size_t width() const noexcept;
  std::size_t height() const noexcept;
  std::size_t col_count() const noexcept { return width() * height(); }
  // Sample count m (complex samples for Fourier).
  std::size_t row_count() const noexcept;
  // Length of the real layout of a measurement.
  std::size_t real_size() const noexcept;

  Measurement apply(const Image& f) const;
  Image adjoint(const Measurement& p) const;

  Measurement zero_measurement() const;
  Image zero_image() const;
  void check(const Image& f) const;
  void check(const Measurement& p) const;

  // nullptr when the model is of the other kind.
  const RadonGeometry* radon_geometry() const noexcept;
  const FourierMask* fourier_mask() const noexcept;

  std::string describe() const;

  struct Impl;

 private:
  explicit ForwardModel(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;
};

// Ridge-regularized pseudo-inverse A^T (A A^T + ridge I)^-1 p, solved by
// conjugate gradients in measurement space.
Image pseudo_inverse(const ForwardModel& model, const Measurement& p, double ridge = 1e-10,
                     double rel_tol = 1e-13, int max_iter = 1000);
// Projection of f onto range(A^T): A^+ A f.
Image observable_projection(const ForwardModel& model, const Image& f, double ridge = 1e-10);

}  // namespace acid
