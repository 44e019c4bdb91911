#pragma once

// Deterministic synthetic content for tests: smooth-but-textured analytic
// images that can be sampled at any sub-pixel offset, so shifted frames are
// exact rather than interpolated.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "bvsr/image.hpp"

namespace bvsr::testing {

/// Sum of random plane waves and Gaussian blobs per channel, mapped to [0.05, 0.95].
class AnalyticTexture {
 public:
  AnalyticTexture(std::uint64_t seed, int channels = 3, double max_freq = 0.18, int waves = 24, int blobs = 12)
      : channels_(channels) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    constexpr double two_pi = 6.283185307179586;
    for (int c = 0; c < channels; ++c) {
      Channel ch;
      for (int i = 0; i < waves; ++i) {
        const double f = max_freq * std::sqrt(uni(rng));
        const double th = two_pi * uni(rng);
        ch.waves.push_back({two_pi * f * std::cos(th), two_pi * f * std::sin(th), two_pi * uni(rng),
                            (0.5 + uni(rng)) / waves});
      }
      for (int i = 0; i < blobs; ++i) {
        ch.blobs.push_back({160.0 * uni(rng) - 16.0, 160.0 * uni(rng) - 16.0, 3.0 + 10.0 * uni(rng),
                            (uni(rng) - 0.5) * 0.6});
      }
      channels_data_.push_back(std::move(ch));
    }
  }

  double value(double y, double x, int c) const {
    const Channel& ch = channels_data_[c];
    double v = 0.0;
    for (const auto& w : ch.waves) v += w.amp * std::sin(w.ky * y + w.kx * x + w.phase);
    for (const auto& b : ch.blobs) {
      const double d2 = (y - b.y) * (y - b.y) + (x - b.x) * (x - b.x);
      v += b.amp * std::exp(-d2 / (2.0 * b.r * b.r));
    }
    const double t = 0.5 + 0.6 * v;
    return std::min(0.95, std::max(0.05, t));
  }

  /// Frame whose pixel (y, x) samples the texture at (y + dy, x + dx).
  Frame render(int h, int w, double dy = 0.0, double dx = 0.0) const {
    Frame f(h, w, channels_);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < channels_; ++c) f.at(y, x, c) = value(y + dy, x + dx, c);
    return f;
  }

 private:
  struct Wave { double ky, kx, phase, amp; };
  struct Blob { double y, x, r, amp; };
  struct Channel {
    std::vector<Wave> waves;
    std::vector<Blob> blobs;
  };
  int channels_;
  std::vector<Channel> channels_data_;
};

inline Frame random_frame(int h, int w, int c, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(lo, hi);
  Frame f(h, w, c);
  for (double& v : f.samples()) v = uni(rng);
  return f;
}

inline BlurKernel random_kernel(int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.05, 1.0);
  std::vector<double> w(static_cast<std::size_t>(k) * k);
  for (double& v : w) v = uni(rng);
  return BlurKernel::normalized(k, std::move(w));
}

}  // namespace bvsr::testing
