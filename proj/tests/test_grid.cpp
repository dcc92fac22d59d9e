#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "acid/errors.hpp"
#include "acid/grid.hpp"
#include "acid/grid_io.hpp"
#include "acid/metrics.hpp"

using namespace acid;

namespace {

Image random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Image f(w, h);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = u(rng);
  return f;
}

// Windowed SSIM written straight from the definition: every fully contained
// 11x11 window, Gaussian weights normalized to sum 1, averaged.
double ssim_oracle(const Image& a, const Image& b, double peak) {
  const int n = 11;
  const double sigma = 1.5;
  double w[11][11];
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double di = i - 5, dj = j - 5;
      w[i][j] = std::exp(-(di * di + dj * dj) / (2 * sigma * sigma));
      total += w[i][j];
    }
  }
  const double c1 = (0.01 * peak) * (0.01 * peak), c2 = (0.03 * peak) * (0.03 * peak);
  double sum = 0.0;
  int count = 0;
  for (std::size_t r = 0; r + n <= a.height(); ++r) {
    for (std::size_t c = 0; c + n <= a.width(); ++c) {
      double ma = 0, mb = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          ma += w[i][j] / total * a(r + i, c + j);
          mb += w[i][j] / total * b(r + i, c + j);
        }
      }
      double va = 0, vb = 0, cov = 0;
      for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
          const double x = a(r + i, c + j) - ma, y = b(r + i, c + j) - mb;
          va += w[i][j] / total * x * x;
          vb += w[i][j] / total * y * y;
          cov += w[i][j] / total * x * y;
        }
      }
      sum += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return sum / count;
}

}  // namespace

TEST(Image, RejectsDegenerateShapes) {
  EXPECT_THROW(Image(1, 5), ShapeError);
  EXPECT_THROW(Image(5, 1), ShapeError);
  EXPECT_THROW(Image(2, 2, std::vector<double>(3)), ShapeError);
  EXPECT_THROW(Image(2, 2, {0.0, NAN, 0.0, 0.0}), ValidationError);
  EXPECT_THROW(Image(2, 2, {0.0, INFINITY, 0.0, 0.0}), ValidationError);
}

TEST(Image, RowMajorIndexing) {
  Image f(3, 2, {0, 1, 2, 3, 4, 5});
  EXPECT_EQ(f(1, 0), 3.0);
  EXPECT_EQ(f(0, 2), 2.0);
  EXPECT_EQ(f[5], 5.0);
}

TEST(Image, ArithmeticChecksShapes) {
  Image a(2, 2), b(3, 2);
  EXPECT_THROW(a += b, ShapeError);
  Image c(2, 2, {1, 2, 3, 4});
  const Image d = 2.0 * c - c;
  EXPECT_EQ(d, c);
}

TEST(Measurement, FourierLayoutIsInterleaved) {
  Measurement p(MeasurementKind::fourier, 3);
  EXPECT_EQ(p.length(), 3u);
  EXPECT_EQ(p.real_size(), 6u);
  EXPECT_THROW(Measurement(MeasurementKind::fourier, std::vector<double>{1, 2, 3}), ShapeError);
  p[0] = 3;
  p[1] = 4;
  EXPECT_DOUBLE_EQ(l2_norm(p), 5.0);
}

TEST(Norms, Examples) {
  EXPECT_EQ(l2_norm(Image(3, 3)), 0.0);
  Image f(2, 2);
  f[2] = 3;
  EXPECT_EQ(l2_norm(f), 3.0);
  EXPECT_EQ(l2_norm(Image(2, 2, {1, 1, 1, 1})), 2.0);
}

TEST(Norms, TriangleInequality) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    const Image a = random_image(5, 4, s), b = random_image(5, 4, s + 1000);
    EXPECT_LE(l2_norm(a + b), (l2_norm(a) + l2_norm(b)) * (1 + 1e-12));
  }
}

TEST(Psnr, Examples) {
  const Image z4(4, 4);
  Image c4(4, 4);
  for (std::size_t i = 0; i < 16; ++i) c4[i] = 0.1;
  EXPECT_NEAR(psnr(z4, c4, 1.0), 20.0, 1e-12);
  EXPECT_EQ(psnr(c4, c4, 1.0), kPsnrCap);
  const Image z2(2, 2);
  const Image one(2, 2, {1, 0, 0, 0});
  EXPECT_NEAR(psnr(z2, one, 1.0), 10 * std::log10(4.0), 1e-12);
  EXPECT_NEAR(psnr(z2, one, 1.0), 6.0206, 1e-4);
}

TEST(Psnr, Errors) {
  EXPECT_THROW(psnr(Image(2, 2), Image(3, 2), 1.0), ShapeError);
  EXPECT_THROW(psnr(Image(2, 2), Image(2, 2), 0.0), ValidationError);
}

TEST(Psnr, StrictlyDecreasingInMse) {
  std::mt19937_64 rng(5);
  const Image ref = random_image(8, 8, 1);
  for (int t = 0; t < 100; ++t) {
    const Image a = random_image(8, 8, 100 + t), b = random_image(8, 8, 500 + t);
    const double ma = mse(ref, a), mb = mse(ref, b);
    if (ma == mb) continue;
    EXPECT_EQ(ma < mb, psnr(ref, a, 1.0) > psnr(ref, b, 1.0));
  }
}

TEST(Ssim, IdenticalIsOne) {
  const Image a = random_image(16, 16, 3);
  EXPECT_EQ(ssim(a, a, 1.0), 1.0);
}

TEST(Ssim, ConstantsOffsetBounded) {
  Image a(16, 16), b(16, 16);
  for (std::size_t i = 0; i < a.size(); ++i) {
    a[i] = 0.5;
    b[i] = 1.5;
  }
  const double s = ssim(a, b, 1.0);
  EXPECT_LT(s, 1.0);
  EXPECT_GT(s, -1.0);
}

TEST(Ssim, MatchesBruteForceOracle) {
  Image a(16, 16);
  for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.0;
  Image b = a;
  b(7, 9) = 1.0;
  EXPECT_NEAR(ssim(a, b, 1.0), ssim_oracle(a, b, 1.0), 1e-12);
  const Image r1 = random_image(20, 17, 8), r2 = random_image(20, 17, 9);
  EXPECT_NEAR(ssim(r1, r2, 1.0), ssim_oracle(r1, r2, 1.0), 1e-12);
}

TEST(Ssim, Symmetric) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    const Image a = random_image(13, 15, s), b = random_image(13, 15, s + 77);
    EXPECT_NEAR(ssim(a, b, 1.0), ssim(b, a, 1.0), 1e-12);
  }
}

TEST(Ssim, TooSmall) { EXPECT_THROW(ssim(Image(10, 12), Image(10, 12), 1.0), ShapeError); }

TEST(GridIo, F64GridRoundTrip) {
  const auto path = std::filesystem::temp_directory_path() / "acid_grid_roundtrip.f64";
  const Image f = random_image(7, 5, 11);
  write_f64grid(path, f);
  EXPECT_EQ(read_f64grid(path), f);

  std::ifstream in(path, std::ios::binary);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header, "F64GRID 7 5");
  in.seekg(0, std::ios::end);
  EXPECT_EQ(std::size_t(in.tellg()), header.size() + 1 + 35 * 8);
}

TEST(GridIo, PgmWindowing) {
  const auto path = std::filesystem::temp_directory_path() / "acid_grid.pgm";
  write_pgm(path, Image(2, 2, {-1.0, 0.0, 0.5, 2.0}), 0.0, 1.0);
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w, h, maxv;
  in >> magic >> w >> h >> maxv;
  in.get();
  unsigned char px[4];
  in.read(reinterpret_cast<char*>(px), 4);
  EXPECT_EQ(magic, "P5");
  EXPECT_EQ(px[0], 0);
  EXPECT_EQ(px[1], 0);
  EXPECT_NEAR(px[2], 128, 1);
  EXPECT_EQ(px[3], 255);
}

TEST(GridIo, FormatNumberRoundTrips) {
  for (double v : {0.1, 1.0 / 3.0, 1e-300, -2.5e10, 300.0}) {
    EXPECT_EQ(std::stod(format_number(v)), v);
  }
}
