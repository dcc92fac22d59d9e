#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace acid {

using Rng = std::mt19937_64;

// Uniform in (0, 1], built from the top 53 bits so it never returns 0.
inline double uniform_open0(Rng& rng) {
  return double((rng() >> 11) + 1) * 0x1.0p-53;
}

inline std::vector<double> gaussian_vector(std::size_t n, Rng& rng, double sigma = 1.0) {
  std::normal_distribution<double> dist(0.0, sigma);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

// Derives an independent stream seed from a base seed and a stream index.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::seed_seq seq{std::uint32_t(base), std::uint32_t(base >> 32), std::uint32_t(stream),
                    std::uint32_t(stream >> 32)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t(out[0]) << 32) | out[1];
}

}  // namespace acid
