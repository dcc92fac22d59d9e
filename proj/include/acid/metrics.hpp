#pragma once

#include "acid/grid.hpp"

namespace acid {

// Returned by psnr() for identical images so CSV output stays numeric.
inline constexpr double kPsnrCap = 300.0;

// SSIM constants: 11x11 Gaussian window, sigma 1.5, K1 = 0.01, K2 = 0.03.
inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimK1 = 0.01;
inline constexpr double kSsimK2 = 0.03;

struct MetricsReport {
  double psnr;
  double ssim;
  double l2_error;
};

double mse(const Image& reference, const Image& candidate);
double psnr(const Image& reference, const Image& candidate, double peak);
// Mean SSIM over all fully contained 11x11 windows.
double ssim(const Image& reference, const Image& candidate, double peak);
MetricsReport compare(const Image& reference, const Image& candidate, double peak);

}  // namespace acid
