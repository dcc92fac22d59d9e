#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace acid {

// Real 2D grid, row-major. Width and height are at least 2 so every pixel has
// a neighbour for the gradient transform.
class Image {
 public:
  Image(std::size_t width, std::size_t height);
  // Throws ShapeError on a size mismatch and ValidationError on non-finite values.
  Image(std::size_t width, std::size_t height, std::vector<double> values);

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t size() const noexcept { return values_.size(); }

  double operator()(std::size_t row, std::size_t col) const { return values_[row * width_ + col]; }
  double& operator()(std::size_t row, std::size_t col) { return values_[row * width_ + col]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  bool same_shape(const Image& other) const noexcept {
    return width_ == other.width_ && height_ == other.height_;
  }
  bool all_finite() const noexcept;

  Image& operator+=(const Image& rhs);
  Image& operator-=(const Image& rhs);
  Image& operator*=(double s) noexcept;
  // this += a * x
  Image& axpy(double a, const Image& x);

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t width_;
  std::size_t height_;
  std::vector<double> values_;
};

Image operator+(Image a, const Image& b);
Image operator-(Image a, const Image& b);
Image operator*(double s, Image a);

enum class MeasurementKind { radon, fourier };

std::string_view to_string(MeasurementKind kind) noexcept;

// Forward-model samples. Fourier samples are stored as interleaved
// (re, im) pairs, so values().size() == 2 * length() for that kind.
class Measurement {
 public:
  Measurement(MeasurementKind kind, std::size_t length);
  // `values` is the real layout (interleaved for Fourier). Validates finiteness.
  Measurement(MeasurementKind kind, std::vector<double> values);

  MeasurementKind kind() const noexcept { return kind_; }
  std::size_t length() const noexcept {
    return kind_ == MeasurementKind::fourier ? values_.size() / 2 : values_.size();
  }
  std::size_t real_size() const noexcept { return values_.size(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }
  double* data() noexcept { return values_.data(); }
  const double* data() const noexcept { return values_.data(); }

  bool same_shape(const Measurement& other) const noexcept {
    return kind_ == other.kind_ && values_.size() == other.values_.size();
  }
  bool all_finite() const noexcept;

  Measurement& operator+=(const Measurement& rhs);
  Measurement& operator-=(const Measurement& rhs);
  Measurement& operator*=(double s) noexcept;
  Measurement& axpy(double a, const Measurement& x);

  friend bool operator==(const Measurement&, const Measurement&) = default;

 private:
  MeasurementKind kind_;
  std::vector<double> values_;
};

Measurement operator+(Measurement a, const Measurement& b);
Measurement operator-(Measurement a, const Measurement& b);
Measurement operator*(double s, Measurement a);

// Euclidean norm; complex entries contribute their squared modulus.
double l2_norm(const Image& x);
double l2_norm(const Measurement& x);

// Real inner products. For Fourier data this is Re sum(conj(a) * b), which is
// the plain dot product of the interleaved layout.
double dot(const Image& a, const Image& b);
double dot(const Measurement& a, const Measurement& b);

double min_value(const Image& x) noexcept;
double max_value(const Image& x) noexcept;
double max_abs(const Measurement& x) noexcept;

}  // namespace acid
