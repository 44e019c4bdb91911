#pragma once

// Image containers and layout transforms shared by every stage of the
// super-resolution pipeline. Samples are doubles, nominally in [0,1],
// stored row-major with channels interleaved.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bvsr/error.hpp"

namespace bvsr {

class Frame {
 public:
  Frame() = default;

  Frame(int height, int width, int channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels) {
    check_shape();
    samples_.assign(size(), fill);
  }

  Frame(int height, int width, int channels, std::vector<double> samples)
      : height_(height), width_(width), channels_(channels), samples_(std::move(samples)) {
    check_shape();
    if (samples_.size() != size()) {
      throw DimensionError("Frame: sample count " + std::to_string(samples_.size()) +
                           " does not match " + shape_string());
    }
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height_) * width_ * channels_;
  }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  bool empty() const noexcept { return samples_.empty(); }

  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }
  double& at(int y, int x, int c = 0) noexcept { return samples_[index(y, x, c)]; }
  double at(int y, int x, int c = 0) const noexcept { return samples_[index(y, x, c)]; }

  /// Replicate-boundary read: coordinates are clamped into the frame.
  double clamped(int y, int x, int c = 0) const noexcept {
    y = std::clamp(y, 0, height_ - 1);
    x = std::clamp(x, 0, width_ - 1);
    return samples_[index(y, x, c)];
  }

  std::span<double> samples() noexcept { return samples_; }
  std::span<const double> samples() const noexcept { return samples_; }
  std::vector<double>& data() noexcept { return samples_; }
  const std::vector<double>& data() const noexcept { return samples_; }

  bool same_shape(const Frame& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ && channels_ == other.channels_;
  }

  bool all_finite() const noexcept {
    return std::all_of(samples_.begin(), samples_.end(), [](double v) { return std::isfinite(v); });
  }

  /// Single channel extracted as its own 1-channel frame.
  Frame channel(int c) const {
    Frame out(height_, width_, 1);
    for (std::size_t p = 0; p < plane_size(); ++p) out.samples_[p] = samples_[p * channels_ + c];
    return out;
  }

  void set_channel(int c, const Frame& plane) {
    if (plane.height_ != height_ || plane.width_ != width_ || plane.channels_ != 1) {
      throw DimensionError("Frame::set_channel: plane " + plane.shape_string() +
                           " incompatible with " + shape_string());
    }
    for (std::size_t p = 0; p < plane_size(); ++p) samples_[p * channels_ + c] = plane.samples_[p];
  }

  std::string shape_string() const {
    return std::to_string(height_) + "x" + std::to_string(width_) + "x" + std::to_string(channels_);
  }

  friend bool operator==(const Frame&, const Frame&) = default;

 private:
  void check_shape() const {
    if (height_ <= 0 || width_ <= 0 || channels_ <= 0) {
      throw DimensionError("Frame: non-positive shape " + shape_string());
    }
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> samples_;
};

/// Ordered frames sharing one shape.
class Sequence {
 public:
  Sequence() = default;
  explicit Sequence(std::vector<Frame> frames) : frames_(std::move(frames)) { validate(); }

  void push_back(Frame f) {
    if (!frames_.empty() && !frames_.front().same_shape(f)) {
      throw DimensionError("Sequence: frame " + f.shape_string() + " differs from " +
                           frames_.front().shape_string());
    }
    frames_.push_back(std::move(f));
  }

  std::size_t size() const noexcept { return frames_.size(); }
  bool empty() const noexcept { return frames_.empty(); }
  const Frame& operator[](std::size_t i) const { return frames_[i]; }
  Frame& operator[](std::size_t i) { return frames_[i]; }
  auto begin() const noexcept { return frames_.begin(); }
  auto end() const noexcept { return frames_.end(); }
  const std::vector<Frame>& frames() const noexcept { return frames_; }

  void validate() const {
    if (frames_.empty()) throw DimensionError("Sequence: empty");
    for (const auto& f : frames_) {
      if (!f.same_shape(frames_.front())) {
        throw DimensionError("Sequence: frame " + f.shape_string() + " differs from " +
                             frames_.front().shape_string());
      }
    }
  }

 private:
  std::vector<Frame> frames_;
};

// ---------------------------------------------------------------------------
// Elementwise helpers

inline Frame clamp01(Frame f) {
  for (double& v : f.samples()) v = std::min(std::max(v, 0.0), 1.0);
  return f;
}

inline double dot(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) throw DimensionError("dot: " + a.shape_string() + " vs " + b.shape_string());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data()[i] * b.data()[i];
  return s;
}

inline double norm2(const Frame& a) { return std::sqrt(dot(a, a)); }

/// Concatenates frames of equal spatial size along the channel axis.
inline Frame concat_channels(std::span<const Frame> parts) {
  if (parts.empty()) throw DimensionError("concat_channels: nothing to concatenate");
  const int h = parts.front().height();
  const int w = parts.front().width();
  int total = 0;
  for (const auto& p : parts) {
    if (p.height() != h || p.width() != w) {
      throw DimensionError("concat_channels: spatial size mismatch " + p.shape_string());
    }
    total += p.channels();
  }
  Frame out(h, w, total);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int dst = 0;
      for (const auto& p : parts) {
        for (int c = 0; c < p.channels(); ++c) out.at(y, x, dst++) = p.at(y, x, c);
      }
    }
  }
  return out;
}

/// Channels [first, first+count) as a new frame.
inline Frame slice_channels(const Frame& src, int first, int count) {
  if (first < 0 || count <= 0 || first + count > src.channels()) {
    throw DimensionError("slice_channels: range out of bounds for " + src.shape_string());
  }
  Frame out(src.height(), src.width(), count);
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < count; ++c) out.at(y, x, c) = src.at(y, x, first + c);
  return out;
}

// ---------------------------------------------------------------------------
// Space-to-depth. Sub-pixel (dy,dx) of channel c lands in slot c*s*s + dy*s + dx.

inline Frame space_to_depth(const Frame& src, int s) {
  if (s <= 0) throw DimensionError("space_to_depth: factor must be positive");
  if (src.height() % s != 0 || src.width() % s != 0) {
    throw DimensionError("space_to_depth: " + src.shape_string() + " not divisible by " +
                         std::to_string(s));
  }
  const int c_in = src.channels();
  Frame out(src.height() / s, src.width() / s, c_in * s * s);
  for (int y = 0; y < out.height(); ++y)
    for (int x = 0; x < out.width(); ++x)
      for (int c = 0; c < c_in; ++c)
        for (int dy = 0; dy < s; ++dy)
          for (int dx = 0; dx < s; ++dx)
            out.at(y, x, c * s * s + dy * s + dx) = src.at(y * s + dy, x * s + dx, c);
  return out;
}

inline Frame depth_to_space(const Frame& src, int s) {
  if (s <= 0) throw DimensionError("depth_to_space: factor must be positive");
  if (src.channels() % (s * s) != 0) {
    throw DimensionError("depth_to_space: channels of " + src.shape_string() +
                         " not divisible by " + std::to_string(s * s));
  }
  const int c_out = src.channels() / (s * s);
  Frame out(src.height() * s, src.width() * s, c_out);
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < c_out; ++c)
        for (int dy = 0; dy < s; ++dy)
          for (int dx = 0; dx < s; ++dx)
            out.at(y * s + dy, x * s + dx, c) = src.at(y, x, c * s * s + dy * s + dx);
  return out;
}

// ---------------------------------------------------------------------------
// Resampling.
//
// Output pixel x maps to source coordinate x * (in/out): pixel (0,0) of every
// resolution is co-sited, the same phase the decimation operator keeps. This
// makes decimate(bicubic_resize(f, s), s) == f for integer s.

/// Catmull-Rom cubic (a = -0.5).
inline double catmull_rom(double t) {
  constexpr double a = -0.5;
  t = std::abs(t);
  if (t <= 1.0) return ((a + 2.0) * t - (a + 3.0)) * t * t + 1.0;
  if (t < 2.0) return ((a * t - 5.0 * a) * t + 8.0 * a) * t - 4.0 * a;
  return 0.0;
}

namespace detail {

struct Taps {
  std::vector<int> first;            // per output index: offset into index/weight arrays
  std::vector<int> count;
  std::vector<int> src;              // clamped source indices
  std::vector<double> weight;
};

/// Filter taps for resampling n_in -> n_out along one axis. Downscaling
/// widens the kernel by in/out so the result is anti-aliased.
inline Taps resample_taps(int n_in, int n_out, double (*kernel)(double), double support) {
  Taps t;
  t.first.resize(n_out);
  t.count.resize(n_out);
  const double ratio = static_cast<double>(n_in) / n_out;
  const double stretch = std::max(1.0, ratio);
  const double radius = support * stretch;
  for (int o = 0; o < n_out; ++o) {
    const double center = o * ratio;
    const int lo = static_cast<int>(std::floor(center - radius));
    const int hi = static_cast<int>(std::ceil(center + radius));
    t.first[o] = static_cast<int>(t.src.size());
    double sum = 0.0;
    const std::size_t begin = t.weight.size();
    for (int i = lo; i <= hi; ++i) {
      const double w = kernel((i - center) / stretch);
      if (w == 0.0) continue;
      t.src.push_back(std::clamp(i, 0, n_in - 1));
      t.weight.push_back(w);
      sum += w;
    }
    for (std::size_t k = begin; k < t.weight.size(); ++k) t.weight[k] /= sum;
    t.count[o] = static_cast<int>(t.weight.size() - begin);
  }
  return t;
}

inline double linear_hat(double t) {
  t = std::abs(t);
  return t < 1.0 ? 1.0 - t : 0.0;
}

/// Separable resample to an explicit size, no clamping of values.
inline Frame resample(const Frame& src, int out_h, int out_w, double (*kernel)(double),
                      double support) {
  if (out_h <= 0 || out_w <= 0) throw DimensionError("resample: zero-sized output");
  const Taps tx = resample_taps(src.width(), out_w, kernel, support);
  const Taps ty = resample_taps(src.height(), out_h, kernel, support);
  const int ch = src.channels();
  Frame rows(src.height(), out_w, ch);
  for (int y = 0; y < src.height(); ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = 0; k < tx.count[x]; ++k) {
          const int j = tx.first[x] + k;
          acc += tx.weight[j] * src.at(y, tx.src[j], c);
        }
        rows.at(y, x, c) = acc;
      }
    }
  }
  Frame out(out_h, out_w, ch);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < ch; ++c) {
        double acc = 0.0;
        for (int k = 0; k < ty.count[y]; ++k) {
          const int j = ty.first[y] + k;
          acc += ty.weight[j] * rows.at(ty.src[j], x, c);
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

}  // namespace detail

/// Catmull-Rom resample to an explicit size, clamped to [0,1].
inline Frame bicubic_resize_to(const Frame& src, int out_h, int out_w) {
  return clamp01(detail::resample(src, out_h, out_w, &catmull_rom, 2.0));
}

/// Catmull-Rom resample by a positive factor; output dims round(dim * scale).
inline Frame bicubic_resize(const Frame& src, double scale) {
  if (!(scale > 0.0)) throw DimensionError("bicubic_resize: scale must be positive");
  const int out_h = static_cast<int>(std::lround(src.height() * scale));
  const int out_w = static_cast<int>(std::lround(src.width() * scale));
  if (out_h < 1 || out_w < 1) throw DimensionError("bicubic_resize: zero-sized output");
  if (out_h == src.height() && out_w == src.width()) return clamp01(src);
  return bicubic_resize_to(src, out_h, out_w);
}

/// Bilinear resample to an explicit size without clamping; used for flow fields
/// and pyramids where values are not intensities.
inline Frame bilinear_resize_to(const Frame& src, int out_h, int out_w) {
  if (out_h == src.height() && out_w == src.width()) return src;
  return detail::resample(src, out_h, out_w, &detail::linear_hat, 1.0);
}

}  // namespace bvsr
