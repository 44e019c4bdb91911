#pragma once

// Optical flow between bicubic-upsampled neighbours and the reference, and
// the warped guide frames built from it.
//
// The default estimator is coarse-to-fine Horn-Schunck on luminance with
// incremental warping: at every level the source is warped by the current
// flow, the brightness-constancy term is linearized around it, and the
// increment is found by Gauss-Seidel sweeps of the Euler-Lagrange equations.
// Intensities are scaled to [0,255] internally so the smoothness weight is
// expressed in 8-bit gradient units.

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "bvsr/error.hpp"
#include "bvsr/image.hpp"
#include "bvsr/operators.hpp"

namespace bvsr {

enum class FlowEstimatorKind { horn_schunck_pyramidal, external };

struct FlowConfig {
  FlowEstimatorKind estimator = FlowEstimatorKind::horn_schunck_pyramidal;
  int pyramid_levels = 4;
  double smoothness_weight = 15.0;
  int iters_per_level = 100;
  int warp_steps_per_level = 3;
  /// Used by the external estimator: directory of precomputed .flo files.
  std::filesystem::path external_dir;
};

inline void validate(const FlowConfig& cfg) {
  if (cfg.pyramid_levels < 1) throw ConfigError("flow: pyramid_levels must be >= 1");
  if (!(cfg.smoothness_weight > 0.0)) throw ConfigError("flow: smoothness_weight must be > 0");
  if (cfg.iters_per_level < 1) throw ConfigError("flow: iters_per_level must be >= 1");
  if (cfg.warp_steps_per_level < 1) throw ConfigError("flow: warp_steps_per_level must be >= 1");
}

/// 0.299 R + 0.587 G + 0.114 B for RGB; single-channel frames pass through.
inline Frame luminance(const Frame& f) {
  if (f.channels() == 1) return f;
  if (f.channels() != 3) throw DimensionError("luminance: expected 1 or 3 channels, got " + f.shape_string());
  Frame out(f.height(), f.width(), 1);
  for (int y = 0; y < f.height(); ++y)
    for (int x = 0; x < f.width(); ++x)
      out.at(y, x) = 0.299 * f.at(y, x, 0) + 0.587 * f.at(y, x, 1) + 0.114 * f.at(y, x, 2);
  return out;
}

namespace detail {

inline Frame gaussian_blur(const Frame& src, double sigma) {
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> w(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += w[i + r] = std::exp(-(i * i) / (2.0 * sigma * sigma));
  for (double& v : w) v /= sum;
  Frame tmp(src.height(), src.width(), src.channels());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < src.channels(); ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += w[i + r] * src.clamped(y, x + i, c);
        tmp.at(y, x, c) = acc;
      }
  Frame out(src.height(), src.width(), src.channels());
  for (int y = 0; y < src.height(); ++y)
    for (int x = 0; x < src.width(); ++x)
      for (int c = 0; c < src.channels(); ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += w[i + r] * tmp.clamped(y + i, x, c);
        out.at(y, x, c) = acc;
      }
  return out;
}

inline FlowField resize_flow(const FlowField& flow, int h, int w) {
  Frame packed(flow.height(), flow.width(), 2);
  for (int y = 0; y < flow.height(); ++y)
    for (int x = 0; x < flow.width(); ++x) {
      packed.at(y, x, 0) = flow.u(y, x);
      packed.at(y, x, 1) = flow.v(y, x);
    }
  const Frame r = bilinear_resize_to(packed, h, w);
  const double sx = static_cast<double>(w) / flow.width();
  const double sy = static_cast<double>(h) / flow.height();
  FlowField out(h, w);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      out.u(y, x) = r.at(y, x, 0) * sx;
      out.v(y, x) = r.at(y, x, 1) * sy;
    }
  return out;
}

/// One pyramid level of incremental Horn-Schunck; flow is refined in place.
inline void horn_schunck_level(const Frame& target, const Frame& source, FlowField& flow, const FlowConfig& cfg) {
  const int h = target.height(), w = target.width();
  const double alpha2 = cfg.smoothness_weight * cfg.smoothness_weight;
  std::vector<double> ix(target.size()), iy(target.size()), it(target.size());
  for (int step = 0; step < cfg.warp_steps_per_level; ++step) {
    const Frame warped = warp(source, flow);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const std::size_t p = flow.index(y, x);
        // Central differences averaged over both images.
        const double gx = 0.25 * (warped.clamped(y, x + 1) - warped.clamped(y, x - 1) +
                                  target.clamped(y, x + 1) - target.clamped(y, x - 1));
        const double gy = 0.25 * (warped.clamped(y + 1, x) - warped.clamped(y - 1, x) +
                                  target.clamped(y + 1, x) - target.clamped(y - 1, x));
        ix[p] = gx;
        iy[p] = gy;
        it[p] = warped.at(y, x) - target.at(y, x);
      }
    const std::vector<double> u0 = flow.u_data();
    const std::vector<double> v0 = flow.v_data();
    auto& u = flow.u_data();
    auto& v = flow.v_data();
    for (int iter = 0; iter < cfg.iters_per_level; ++iter) {
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const std::size_t p = flow.index(y, x);
          double su = 0.0, sv = 0.0;
          int n = 0;
          if (x > 0) { su += u[p - 1]; sv += v[p - 1]; ++n; }
          if (x + 1 < w) { su += u[p + 1]; sv += v[p + 1]; ++n; }
          if (y > 0) { su += u[p - w]; sv += v[p - w]; ++n; }
          if (y + 1 < h) { su += u[p + w]; sv += v[p + w]; ++n; }
          if (n == 0) continue;
          const double ubar = su / n, vbar = sv / n;
          const double resid = ix[p] * (ubar - u0[p]) + iy[p] * (vbar - v0[p]) + it[p];
          const double denom = alpha2 + ix[p] * ix[p] + iy[p] * iy[p];
          u[p] = ubar - ix[p] * resid / denom;
          v[p] = vbar - iy[p] * resid / denom;
        }
    }
  }
}

}  // namespace detail

/// Flow u with source(x + u(x)) ~ target(x), at the frames' resolution.
inline FlowField estimate_flow(const Frame& target, const Frame& source, const FlowConfig& cfg = {}) {
  validate(cfg);
  if (!target.same_shape(source)) {
    throw DimensionError("estimate_flow: " + target.shape_string() + " vs " + source.shape_string());
  }
  if (cfg.estimator != FlowEstimatorKind::horn_schunck_pyramidal) {
    throw ConfigError("estimate_flow: the external estimator reads flow files; use load_flo");
  }
  auto scaled = [](const Frame& f) {
    Frame l = luminance(f);
    for (double& v : l.samples()) v *= 255.0;
    return l;
  };
  std::vector<Frame> tp{scaled(target)}, sp{scaled(source)};
  constexpr int kMinSize = 8;
  for (int l = 1; l < cfg.pyramid_levels; ++l) {
    const Frame& t = tp.back();
    const int h = (t.height() + 1) / 2, w = (t.width() + 1) / 2;
    if (h < kMinSize || w < kMinSize) break;
    tp.push_back(bilinear_resize_to(detail::gaussian_blur(t, 1.0), h, w));
    sp.push_back(bilinear_resize_to(detail::gaussian_blur(sp.back(), 1.0), h, w));
  }
  FlowField flow(tp.back().height(), tp.back().width());
  for (int l = static_cast<int>(tp.size()) - 1; l >= 0; --l) {
    if (flow.height() != tp[l].height() || flow.width() != tp[l].width()) {
      flow = detail::resize_flow(flow, tp[l].height(), tp[l].width());
    }
    detail::horn_schunck_level(tp[l], sp[l], flow, cfg);
  }
  return flow;
}

struct AlignedGuides {
  Frame prev;  // upsampled previous frame warped onto the reference
  Frame next;
  Frame reference;  // upsampled reference
  FlowField flow_prev;
  FlowField flow_next;
};

/// Warps already-upsampled neighbours with given flows.
inline AlignedGuides align_guides_with_flows(Frame prev_up, Frame ref_up, Frame next_up, FlowField flow_prev,
                                             FlowField flow_next) {
  AlignedGuides g;
  g.prev = warp(prev_up, flow_prev);
  g.next = warp(next_up, flow_next);
  g.reference = std::move(ref_up);
  g.flow_prev = std::move(flow_prev);
  g.flow_next = std::move(flow_next);
  return g;
}

/// Upsamples the three LR frames by s, estimates neighbour-to-reference flow on
/// the upsampled frames and warps the neighbours onto the reference.
inline AlignedGuides align_guides(const Frame& prev, const Frame& ref, const Frame& next, int s,
                                  const FlowConfig& cfg = {}) {
  if (!prev.same_shape(ref) || !next.same_shape(ref)) {
    throw DimensionError("align_guides: frames must share one shape");
  }
  Frame prev_up = bicubic_resize(prev, s);
  Frame ref_up = bicubic_resize(ref, s);
  Frame next_up = bicubic_resize(next, s);
  FlowField fp = estimate_flow(ref_up, prev_up, cfg);
  FlowField fn = estimate_flow(ref_up, next_up, cfg);
  return align_guides_with_flows(std::move(prev_up), std::move(ref_up), std::move(next_up), std::move(fp),
                                 std::move(fn));
}

// ---------------------------------------------------------------------------
// Middlebury .flo: float 202021.25, int32 width, int32 height, then row-major
// interleaved (u, v) float32, all little-endian.

static_assert(std::endian::native == std::endian::little, ".flo I/O assumes a little-endian host");

inline constexpr float kFloMagic = 202021.25f;

inline void save_flo(const std::filesystem::path& path, const FlowField& flow) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot create " + path.string());
  const std::int32_t w = flow.width(), h = flow.height();
  os.write(reinterpret_cast<const char*>(&kFloMagic), 4);
  os.write(reinterpret_cast<const char*>(&w), 4);
  os.write(reinterpret_cast<const char*>(&h), 4);
  std::vector<float> row(2 * static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      row[2 * x] = static_cast<float>(flow.u(y, x));
      row[2 * x + 1] = static_cast<float>(flow.v(y, x));
    }
    os.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
  }
  if (!os) throw IoError("failed writing " + path.string());
}

inline FlowField load_flo(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  float magic = 0.0f;
  std::int32_t w = 0, h = 0;
  is.read(reinterpret_cast<char*>(&magic), 4);
  is.read(reinterpret_cast<char*>(&w), 4);
  is.read(reinterpret_cast<char*>(&h), 4);
  if (!is || magic != kFloMagic) throw IoError(path.string() + ": not a .flo file");
  if (w <= 0 || h <= 0 || w > (1 << 16) || h > (1 << 16)) throw IoError(path.string() + ": bad dimensions");
  FlowField flow(h, w);
  std::vector<float> row(2 * static_cast<std::size_t>(w));
  for (int y = 0; y < h; ++y) {
    is.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size() * 4));
    if (!is) throw IoError(path.string() + ": truncated");
    for (int x = 0; x < w; ++x) {
      flow.u(y, x) = row[2 * x];
      flow.v(y, x) = row[2 * x + 1];
    }
  }
  if (!flow.all_finite()) throw IoError(path.string() + ": non-finite flow");
  return flow;
}

}  // namespace bvsr
