#include "acid/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "acid/errors.hpp"

namespace acid {

namespace {

void check_pair(const Image& a, const Image& b, double peak) {
  if (!a.same_shape(b)) throw ShapeError("metric operands differ in shape");
  if (!(peak > 0.0) || !std::isfinite(peak)) throw ValidationError("peak must be positive");
  if (!a.all_finite() || !b.all_finite()) throw ValidationError("metric operand is not finite");
}

std::array<double, kSsimWindow * kSsimWindow> gaussian_window() {
  std::array<double, kSsimWindow * kSsimWindow> w{};
  const int r = kSsimWindow / 2;
  double total = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    for (int j = 0; j < kSsimWindow; ++j) {
      const double d2 = double((i - r) * (i - r) + (j - r) * (j - r));
      w[i * kSsimWindow + j] = std::exp(-d2 / (2.0 * kSsimSigma * kSsimSigma));
      total += w[i * kSsimWindow + j];
    }
  }
  for (double& v : w) v /= total;
  return w;
}

}  // namespace

double mse(const Image& reference, const Image& candidate) {
  if (!reference.same_shape(candidate)) throw ShapeError("metric operands differ in shape");
  double s = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference[i] - candidate[i];
    s += d * d;
  }
  return s / double(reference.size());
}

double psnr(const Image& reference, const Image& candidate, double peak) {
  check_pair(reference, candidate, peak);
  const double e = mse(reference, candidate);
  if (e == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(peak * peak / e));
}

double ssim(const Image& reference, const Image& candidate, double peak) {
  check_pair(reference, candidate, peak);
  if (reference.width() < std::size_t(kSsimWindow) ||
      reference.height() < std::size_t(kSsimWindow)) {
    throw ShapeError("image smaller than the 11x11 SSIM window");
  }
  static const auto w = gaussian_window();
  const double c1 = (kSsimK1 * peak) * (kSsimK1 * peak);
  const double c2 = (kSsimK2 * peak) * (kSsimK2 * peak);
  const std::size_t rows = reference.height() - kSsimWindow + 1;
  const std::size_t cols = reference.width() - kSsimWindow + 1;

  double total = 0.0;
  for (std::size_t r0 = 0; r0 < rows; ++r0) {
    for (std::size_t c0 = 0; c0 < cols; ++c0) {
      double mx = 0, my = 0, mxx = 0, myy = 0, mxy = 0;
      for (int i = 0; i < kSsimWindow; ++i) {
        for (int j = 0; j < kSsimWindow; ++j) {
          const double g = w[i * kSsimWindow + j];
          const double x = reference(r0 + i, c0 + j);
          const double y = candidate(r0 + i, c0 + j);
          mx += g * x;
          my += g * y;
          mxx += g * x * x;
          myy += g * y * y;
          mxy += g * x * y;
        }
      }
      const double vx = mxx - mx * mx;
      const double vy = myy - my * my;
      const double cxy = mxy - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) /
               ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  }
  return total / double(rows * cols);
}

MetricsReport compare(const Image& reference, const Image& candidate, double peak) {
  return {psnr(reference, candidate, peak), ssim(reference, candidate, peak),
          l2_norm(reference - candidate)};
}

}  // namespace acid
