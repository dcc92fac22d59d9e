#include "acid/sparsity.hpp"

#include <cmath>

#include "acid/errors.hpp"

namespace acid {

ThresholdParams::ThresholdParams(double eps) : epsilon(eps) {
  if (!(eps > 0.0) || !std::isfinite(eps)) {
    throw ValidationError("epsilon must be finite and positive");
  }
}

GradientField gradient_transform(const Image& f) {
  GradientField g{Image(f.width(), f.height()), Image(f.width(), f.height())};
  for (std::size_t r = 0; r < f.height(); ++r) {
    for (std::size_t c = 0; c < f.width(); ++c) {
      if (c >= 1) g.dx(r, c) = f(r, c) - f(r, c - 1);
      if (r >= 1) g.dy(r, c) = f(r, c) - f(r - 1, c);
    }
  }
  return g;
}

double total_variation(const Image& f) {
  const GradientField g = gradient_transform(f);
  double tv = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) tv += std::abs(g.dx[i]) + std::abs(g.dy[i]);
  return tv;
}

std::size_t gradient_support(const Image& f, double threshold) {
  const GradientField g = gradient_transform(f);
  std::size_t s = 0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    s += std::abs(g.dx[i]) > threshold;
    s += std::abs(g.dy[i]) > threshold;
  }
  return s;
}

double soft_threshold(double x, double epsilon) noexcept {
  if (std::abs(x) < epsilon) return 0.0;
  return x > 0.0 ? x - epsilon : x + epsilon;
}

double soft_threshold_pinv(double v_a, double v_b, double epsilon) noexcept {
  const double d = v_a - v_b;
  if (d > epsilon) return v_a - epsilon / 2.0;
  if (d < -epsilon) return v_a + epsilon / 2.0;
  return (v_a + v_b) / 2.0;
}

Image sparsify(const Image& f_half, const ThresholdParams& params) {
  const double eps = params.epsilon;
  const std::size_t w = f_half.width(), h = f_half.height();
  Image out(w, h);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const double v = f_half(r, c);
      // right, down, left, up
      const double right = c + 1 < w ? soft_threshold_pinv(v, f_half(r, c + 1), eps) : v;
      const double down = r + 1 < h ? soft_threshold_pinv(v, f_half(r + 1, c), eps) : v;
      const double left = c >= 1 ? soft_threshold_pinv(v, f_half(r, c - 1), eps) : v;
      const double up = r >= 1 ? soft_threshold_pinv(v, f_half(r - 1, c), eps) : v;
      out(r, c) = 0.25 * (right + down + left + up);
    }
  }
  return out;
}

}  // namespace acid
