#pragma once

#include "acid/grid.hpp"

namespace acid {

// Forward differences with zero border: dx(i,j) = f(i,j) - f(i,j-1) for
// j >= 1, dy(i,j) = f(i,j) - f(i-1,j) for i >= 1.
struct GradientField {
  Image dx;
  Image dy;
};

struct ThresholdParams {
  double epsilon;
  explicit ThresholdParams(double eps);
};

GradientField gradient_transform(const Image& f);
// Sum of |dx| + |dy|.
double total_variation(const Image& f);
// Number of gradient entries with magnitude strictly above `threshold`.
std::size_t gradient_support(const Image& f, double threshold);

// 0 when |x| < eps, else x - sgn(x) * eps.
double soft_threshold(double x, double epsilon) noexcept;

// Pairwise pseudo-inverse kernel: the mean when |a - b| <= eps, otherwise a
// moved towards b by eps / 2.
double soft_threshold_pinv(double v_a, double v_b, double epsilon) noexcept;

// Each output pixel is the average of soft_threshold_pinv(center, neighbour)
// over its four neighbours; a missing neighbour contributes the center value.
Image sparsify(const Image& f_half, const ThresholdParams& params);

}  // namespace acid
