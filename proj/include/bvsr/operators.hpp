#pragma once

// Linear operators of the video degradation model
//
//   L_j = S K F_u I + n_j
//
// blur K (correlation, replicate boundary), decimation S (phase (0,0)),
// warp F_u (bilinear, replicate boundary) and forward-difference derivative
// filters, each paired with its exact adjoint. No operator clamps.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "bvsr/error.hpp"
#include "bvsr/image.hpp"

namespace bvsr {

// ---------------------------------------------------------------------------
// BlurKernel

class BlurKernel {
 public:
  static constexpr double kSumTolerance = 1e-8;

  BlurKernel() : BlurKernel(delta(1)) {}

  /// Validating constructor: odd size, nonnegative finite taps summing to 1.
  BlurKernel(int size, std::vector<double> taps) : size_(size), taps_(std::move(taps)) {
    if (size_ <= 0 || size_ % 2 == 0) {
      throw ConfigError("BlurKernel: size must be a positive odd integer, got " + std::to_string(size_));
    }
    if (taps_.size() != static_cast<std::size_t>(size_) * size_) {
      throw ConfigError("BlurKernel: expected " + std::to_string(size_ * size_) + " taps, got " +
                        std::to_string(taps_.size()));
    }
    double sum = 0.0;
    for (double t : taps_) {
      if (!std::isfinite(t) || t < 0.0) throw ConfigError("BlurKernel: taps must be finite and nonnegative");
      sum += t;
    }
    if (std::abs(sum - 1.0) > kSumTolerance) {
      std::ostringstream os;
      os << std::setprecision(17) << "BlurKernel: taps sum to " << sum << ", expected 1";
      throw ConfigError(os.str());
    }
  }

  static BlurKernel delta(int size) {
    if (size <= 0 || size % 2 == 0) throw ConfigError("BlurKernel: size must be a positive odd integer");
    std::vector<double> taps(static_cast<std::size_t>(size) * size, 0.0);
    taps[taps.size() / 2] = 1.0;
    return BlurKernel(size, std::move(taps));
  }

  /// Normalizes arbitrary nonnegative weights into a kernel.
  static BlurKernel normalized(int size, std::vector<double> weights) {
    double sum = 0.0;
    for (double w : weights) sum += w;
    if (!(sum > 0.0)) throw ConfigError("BlurKernel: weights must have positive sum");
    for (double& w : weights) w /= sum;
    return BlurKernel(size, std::move(weights));
  }

  int size() const noexcept { return size_; }
  int radius() const noexcept { return size_ / 2; }
  double operator()(int row, int col) const noexcept { return taps_[static_cast<std::size_t>(row) * size_ + col]; }
  std::span<const double> taps() const noexcept { return taps_; }

  /// Zero-padded (or cropped) to another odd size, keeping the center.
  BlurKernel resized(int new_size) const {
    if (new_size <= 0 || new_size % 2 == 0) throw ConfigError("BlurKernel: size must be a positive odd integer");
    std::vector<double> out(static_cast<std::size_t>(new_size) * new_size, 0.0);
    const int off = new_size / 2 - radius();
    for (int r = 0; r < size_; ++r)
      for (int c = 0; c < size_; ++c) {
        const int rr = r + off, cc = c + off;
        if (rr >= 0 && rr < new_size && cc >= 0 && cc < new_size) out[rr * new_size + cc] = (*this)(r, c);
      }
    return normalized(new_size, std::move(out));
  }

 private:
  int size_;
  std::vector<double> taps_;
};

// ---------------------------------------------------------------------------
// FlowField: per-pixel displacement; sample at x + (u, v) with u horizontal.

class FlowField {
 public:
  FlowField() = default;
  FlowField(int height, int width, double u0 = 0.0, double v0 = 0.0)
      : height_(height), width_(width),
        u_(static_cast<std::size_t>(height) * width, u0),
        v_(static_cast<std::size_t>(height) * width, v0) {
    if (height <= 0 || width <= 0) throw DimensionError("FlowField: non-positive size");
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t index(int y, int x) const noexcept { return static_cast<std::size_t>(y) * width_ + x; }
  double& u(int y, int x) noexcept { return u_[index(y, x)]; }
  double& v(int y, int x) noexcept { return v_[index(y, x)]; }
  double u(int y, int x) const noexcept { return u_[index(y, x)]; }
  double v(int y, int x) const noexcept { return v_[index(y, x)]; }
  std::vector<double>& u_data() noexcept { return u_; }
  std::vector<double>& v_data() noexcept { return v_; }
  const std::vector<double>& u_data() const noexcept { return u_; }
  const std::vector<double>& v_data() const noexcept { return v_; }

  bool all_finite() const noexcept {
    for (std::size_t i = 0; i < u_.size(); ++i)
      if (!std::isfinite(u_[i]) || !std::isfinite(v_[i])) return false;
    return true;
  }

  double max_magnitude() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < u_.size(); ++i) m = std::max(m, std::hypot(u_[i], v_[i]));
    return m;
  }

 private:
  int height_ = 0;
  int width_ = 0;
  std::vector<double> u_;
  std::vector<double> v_;
};

enum class Boundary { replicate };

// ---------------------------------------------------------------------------
// Blur K and its adjoint.
//
//   (K x)(i,j) = sum_{a,b} k(a,b) x(clamp(i+a-r), clamp(j+b-r))

inline Frame convolve2d(const Frame& src, const BlurKernel& kernel, Boundary = Boundary::replicate) {
  const int r = kernel.radius();
  const int n = kernel.size();
  const int h = src.height(), w = src.width(), ch = src.channels();
  Frame out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const bool interior = y >= r && y + r < h && x >= r && x + r < w;
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        if (interior) {
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) acc += kernel(a, b) * src.at(y + a - r, x + b - r, c);
        } else {
          for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) acc += kernel(a, b) * src.clamped(y + a - r, x + b - r, c);
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

/// Scatter form of K^T: every output sample of K distributes its weights back
/// to the (clamped) source positions it read.
inline Frame convolve2d_adjoint(const Frame& src, const BlurKernel& kernel, Boundary = Boundary::replicate) {
  const int r = kernel.radius();
  const int n = kernel.size();
  const int h = src.height(), w = src.width(), ch = src.channels();
  Frame out(h, w, ch);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int a = 0; a < n; ++a) {
        const int yy = std::clamp(y + a - r, 0, h - 1);
        for (int b = 0; b < n; ++b) {
          const int xx = std::clamp(x + b - r, 0, w - 1);
          const double k = kernel(a, b);
          for (int c = 0; c < ch; ++c) out.at(yy, xx, c) += k * src.at(y, x, c);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Decimation S keeps (s*i, s*j); S^T zero-fills.

inline void check_divisible(const Frame& f, int s, const char* what) {
  if (s <= 0) throw DimensionError(std::string(what) + ": scale must be positive");
  if (f.height() % s != 0 || f.width() % s != 0) {
    throw DimensionError(std::string(what) + ": " + f.shape_string() + " not divisible by " + std::to_string(s));
  }
}

inline Frame decimate(const Frame& src, int s) {
  check_divisible(src, s, "decimate");
  Frame out(src.height() / s, src.width() / s, src.channels());
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < src.channels(); ++c) out.at(y, x, c) = src.at(y * s, x * s, c);
  return out;
}

inline Frame decimate_adjoint(const Frame& src, int s) {
  if (s <= 0) throw DimensionError("decimate_adjoint: scale must be positive");
  Frame out(src.height() * s, src.width() * s, src.channels());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < src.channels(); ++c) out.at(y * s, x * s, c) = src.at(y, x, c);
  return out;
}

/// S K x, evaluated only at the kept positions.
inline Frame sk_forward(const Frame& hr, const BlurKernel& kernel, int s) {
  check_divisible(hr, s, "sk_forward");
  const int r = kernel.radius();
  const int n = kernel.size();
  const int ch = hr.channels();
  Frame out(hr.height() / s, hr.width() / s, ch);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      const int cy = y * s, cx = x * s;
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int a = 0; a < n; ++a)
          for (int b = 0; b < n; ++b) acc += kernel(a, b) * hr.clamped(cy + a - r, cx + b - r, c);
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

/// K^T S^T y.
inline Frame sk_adjoint(const Frame& lr, const BlurKernel& kernel, int s) {
  if (s <= 0) throw DimensionError("sk_adjoint: scale must be positive");
  const int r = kernel.radius();
  const int n = kernel.size();
  const int h = lr.height() * s, w = lr.width() * s, ch = lr.channels();
  Frame out(h, w, ch);
  for (int y = 0; y < lr.height(); ++y) {
    for (int x = 0; x < lr.width(); ++x) {
      const int cy = y * s, cx = x * s;
      for (int a = 0; a < n; ++a) {
        const int yy = std::clamp(cy + a - r, 0, h - 1);
        for (int b = 0; b < n; ++b) {
          const int xx = std::clamp(cx + b - r, 0, w - 1);
          const double k = kernel(a, b);
          for (int c = 0; c < ch; ++c) out.at(yy, xx, c) += k * lr.at(y, x, c);
        }
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Forward differences, zero on the trailing edge.

inline Frame gradient_h(const Frame& src) {
  Frame out(src.height(), src.width(), src.channels());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x + 1 < src.width(); ++x)
      for (int c = 0; c < src.channels(); ++c) out.at(y, x, c) = src.at(y, x + 1, c) - src.at(y, x, c);
  return out;
}

inline Frame gradient_v(const Frame& src) {
  Frame out(src.height(), src.width(), src.channels());
  for (int y = 0; y + 1 < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < src.channels(); ++c) out.at(y, x, c) = src.at(y + 1, x, c) - src.at(y, x, c);
  return out;
}

// (D_h^T g)(j) = g(j-1) [j >= 1] - g(j) [j <= W-2]
inline Frame gradient_h_adjoint(const Frame& g) {
  const int w = g.width();
  Frame out(g.height(), w, g.channels());
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < g.channels(); ++c) {
        double v = 0.0;
        if (x >= 1) v += g.at(y, x - 1, c);
        if (x + 1 < w) v -= g.at(y, x, c);
        out.at(y, x, c) = v;
      }
  return out;
}

inline Frame gradient_v_adjoint(const Frame& g) {
  const int h = g.height();
  Frame out(h, g.width(), g.channels());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < g.width(); ++x)
      for (int c = 0; c < g.channels(); ++c) {
        double v = 0.0;
        if (y >= 1) v += g.at(y - 1, x, c);
        if (y + 1 < h) v -= g.at(y, x, c);
        out.at(y, x, c) = v;
      }
  return out;
}

// ---------------------------------------------------------------------------
// Warp: out(x) = src(x + u(x)), bilinear, source coordinates clamped.

inline double sample_bilinear(const Frame& src, double fy, double fx, int c) {
  fy = std::clamp(fy, 0.0, static_cast<double>(src.height() - 1));
  fx = std::clamp(fx, 0.0, static_cast<double>(src.width() - 1));
  const int y0 = static_cast<int>(std::floor(fy));
  const int x0 = static_cast<int>(std::floor(fx));
  const int y1 = std::min(y0 + 1, src.height() - 1);
  const int x1 = std::min(x0 + 1, src.width() - 1);
  const double wy = fy - y0, wx = fx - x0;
  return (1 - wy) * ((1 - wx) * src.at(y0, x0, c) + wx * src.at(y0, x1, c)) +
         wy * ((1 - wx) * src.at(y1, x0, c) + wx * src.at(y1, x1, c));
}

inline Frame warp(const Frame& src, const FlowField& flow) {
  if (flow.height() != src.height() || flow.width() != src.width()) {
    throw DimensionError("warp: flow " + std::to_string(flow.height()) + "x" + std::to_string(flow.width()) +
                         " does not match frame " + src.shape_string());
  }
  Frame out(src.height(), src.width(), src.channels());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x) {
      const double fy = y + flow.v(y, x);
      const double fx = x + flow.u(y, x);
      for (int c = 0; c < src.channels(); ++c) out.at(y, x, c) = sample_bilinear(src, fy, fx, c);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Degradation

struct DegradationConfig {
  int scale = 4;
  BlurKernel kernel = BlurKernel::delta(1);
  double noise_std = 0.0;
  Boundary boundary = Boundary::replicate;
  std::uint64_t rng_seed = 0;
};

/// Synthesizes the LR sequence; flows[i] warps hr frame i (empty list means
/// identity flow for every frame). Frames are degraded in order from a single
/// generator seeded with cfg.rng_seed.
inline Sequence degrade(const Sequence& hr_seq, const std::vector<FlowField>& flows,
                        const DegradationConfig& cfg) {
  hr_seq.validate();
  if (cfg.noise_std < 0.0) throw ConfigError("degrade: noise_std must be >= 0");
  if (!flows.empty() && flows.size() != hr_seq.size()) {
    throw DimensionError("degrade: expected one flow per frame");
  }
  std::mt19937_64 rng(cfg.rng_seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Sequence out;
  for (std::size_t i = 0; i < hr_seq.size(); ++i) {
    const Frame moved = flows.empty() ? hr_seq[i] : warp(hr_seq[i], flows[i]);
    Frame lr = sk_forward(moved, cfg.kernel, cfg.scale);
    if (cfg.noise_std > 0.0) {
      for (double& v : lr.samples()) v += cfg.noise_std * noise(rng);
    }
    out.push_back(clamp01(std::move(lr)));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernel text format:
//   K <k>
//   k lines of k reals

inline void write_kernel(std::ostream& os, const BlurKernel& kernel) {
  os << "K " << kernel.size() << '\n' << std::setprecision(17);
  for (int r = 0; r < kernel.size(); ++r) {
    for (int c = 0; c < kernel.size(); ++c) os << (c ? " " : "") << kernel(r, c);
    os << '\n';
  }
}

inline BlurKernel read_kernel(std::istream& is) {
  std::string tag;
  int k = 0;
  if (!(is >> tag >> k) || tag != "K") throw IoError("kernel file: expected header 'K <size>'");
  if (k <= 0 || k % 2 == 0) throw ConfigError("kernel file: size must be a positive odd integer");
  std::vector<double> taps(static_cast<std::size_t>(k) * k);
  for (double& t : taps) {
    if (!(is >> t)) throw IoError("kernel file: expected " + std::to_string(k * k) + " taps");
  }
  std::string extra;
  if (is >> extra) throw IoError("kernel file: trailing content '" + extra + "'");
  return BlurKernel(k, std::move(taps));
}

inline void save_kernel(const std::filesystem::path& path, const BlurKernel& kernel) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot create " + path.string());
  write_kernel(os, kernel);
  if (!os) throw IoError("failed writing " + path.string());
}

inline BlurKernel load_kernel(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path.string());
  return read_kernel(is);
}

}  // namespace bvsr
