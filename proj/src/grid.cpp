#include "acid/grid.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "acid/errors.hpp"

namespace acid {

namespace {

bool finite_span(std::span<const double> v) noexcept {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

double dot_span(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void check_dims(std::size_t width, std::size_t height) {
  if (width < 2 || height < 2) {
    throw ShapeError("image must be at least 2x2, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
}

}  // namespace

Image::Image(std::size_t width, std::size_t height)
    : width_(width), height_(height), values_() {
  check_dims(width, height);
  values_.assign(width * height, 0.0);
}

Image::Image(std::size_t width, std::size_t height, std::vector<double> values)
    : width_(width), height_(height), values_(std::move(values)) {
  check_dims(width, height);
  if (values_.size() != width * height) {
    throw ShapeError("image value count " + std::to_string(values_.size()) + " != " +
                     std::to_string(width) + "x" + std::to_string(height));
  }
  if (!finite_span(values_)) throw ValidationError("image contains non-finite values");
}

bool Image::all_finite() const noexcept { return finite_span(values_); }

Image& Image::operator+=(const Image& rhs) { return axpy(1.0, rhs); }
Image& Image::operator-=(const Image& rhs) { return axpy(-1.0, rhs); }

Image& Image::operator*=(double s) noexcept {
  for (double& v : values_) v *= s;
  return *this;
}

Image& Image::axpy(double a, const Image& x) {
  if (!same_shape(x)) throw ShapeError("image shape mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
  return *this;
}

Image operator+(Image a, const Image& b) { return a += b; }
Image operator-(Image a, const Image& b) { return a -= b; }
Image operator*(double s, Image a) { return a *= s; }

std::string_view to_string(MeasurementKind kind) noexcept {
  return kind == MeasurementKind::radon ? "radon" : "fourier";
}

Measurement::Measurement(MeasurementKind kind, std::size_t length)
    : kind_(kind), values_(kind == MeasurementKind::fourier ? 2 * length : length, 0.0) {}

Measurement::Measurement(MeasurementKind kind, std::vector<double> values)
    : kind_(kind), values_(std::move(values)) {
  if (kind_ == MeasurementKind::fourier && values_.size() % 2 != 0) {
    throw ShapeError("fourier measurement needs an even number of reals");
  }
  if (!finite_span(values_)) throw ValidationError("measurement contains non-finite values");
}

bool Measurement::all_finite() const noexcept { return finite_span(values_); }

Measurement& Measurement::operator+=(const Measurement& rhs) { return axpy(1.0, rhs); }
Measurement& Measurement::operator-=(const Measurement& rhs) { return axpy(-1.0, rhs); }

Measurement& Measurement::operator*=(double s) noexcept {
  for (double& v : values_) v *= s;
  return *this;
}

Measurement& Measurement::axpy(double a, const Measurement& x) {
  if (!same_shape(x)) throw ShapeError("measurement shape mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += a * x.values_[i];
  return *this;
}

Measurement operator+(Measurement a, const Measurement& b) { return a += b; }
Measurement operator-(Measurement a, const Measurement& b) { return a -= b; }
Measurement operator*(double s, Measurement a) { return a *= s; }

double l2_norm(const Image& x) { return std::sqrt(dot_span(x.values(), x.values())); }
double l2_norm(const Measurement& x) { return std::sqrt(dot_span(x.values(), x.values())); }

double dot(const Image& a, const Image& b) {
  if (!a.same_shape(b)) throw ShapeError("image shape mismatch in dot");
  return dot_span(a.values(), b.values());
}

double dot(const Measurement& a, const Measurement& b) {
  if (!a.same_shape(b)) throw ShapeError("measurement shape mismatch in dot");
  return dot_span(a.values(), b.values());
}

double min_value(const Image& x) noexcept {
  return *std::min_element(x.values().begin(), x.values().end());
}

double max_value(const Image& x) noexcept {
  return *std::max_element(x.values().begin(), x.values().end());
}

double max_abs(const Measurement& x) noexcept {
  double m = 0.0;
  for (double v : x.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace acid
