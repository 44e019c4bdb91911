#pragma once

// Fidelity metrics on [0,1] frames and the kernel-accuracy protocol: LR
// frames regenerated from ground-truth HR with an estimated kernel are scored
// against the observed LR frames.

#include <array>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "bvsr/error.hpp"
#include "bvsr/image.hpp"
#include "bvsr/operators.hpp"
#include "bvsr/parallel.hpp"

namespace bvsr {

/// PSNR of identical frames.
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

inline double mse(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) throw DimensionError("mse: " + a.shape_string() + " vs " + b.shape_string());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.data()[i] - b.data()[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

/// 10 log10(1 / MSE), peak 1.0; +inf for identical frames.
inline double psnr(const Frame& a, const Frame& b) {
  const double e = mse(a, b);
  if (e == 0.0) return kPsnrIdentical;
  return 10.0 * std::log10(1.0 / e);
}

inline constexpr int kSsimWindow = 11;
inline constexpr double kSsimSigma = 1.5;
inline constexpr double kSsimC1 = 0.01 * 0.01;
inline constexpr double kSsimC2 = 0.03 * 0.03;

namespace detail {

inline std::array<double, kSsimWindow> ssim_window() {
  std::array<double, kSsimWindow> w{};
  double sum = 0.0;
  for (int i = 0; i < kSsimWindow; ++i) {
    const double d = i - kSsimWindow / 2;
    w[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += w[i];
  }
  for (double& v : w) v /= sum;
  return w;
}

/// Separable 'valid' filtering of one channel with the SSIM window.
inline std::vector<double> filter_valid(const std::vector<double>& img, int h, int w) {
  static const auto win = ssim_window();
  const int oh = h - kSsimWindow + 1, ow = w - kSsimWindow + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += win[k] * img[y * w + x + k];
      rows[y * ow + x] = acc;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kSsimWindow; ++k) acc += win[k] * rows[(y + k) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace detail

/// Mean SSIM over the valid region (11x11 Gaussian window, sigma 1.5),
/// computed per channel and averaged.
inline double ssim(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) throw DimensionError("ssim: " + a.shape_string() + " vs " + b.shape_string());
  if (a.height() < kSsimWindow || a.width() < kSsimWindow) {
    throw DimensionError("ssim: frame " + a.shape_string() + " smaller than the 11x11 window");
  }
  const int h = a.height(), w = a.width();
  double total = 0.0;
  for (int c = 0; c < a.channels(); ++c) {
    std::vector<double> x(a.plane_size()), y(a.plane_size()), xx(a.plane_size()), yy(a.plane_size()),
        xy(a.plane_size());
    for (std::size_t p = 0; p < a.plane_size(); ++p) {
      x[p] = a.data()[p * a.channels() + c];
      y[p] = b.data()[p * b.channels() + c];
      xx[p] = x[p] * x[p];
      yy[p] = y[p] * y[p];
      xy[p] = x[p] * y[p];
    }
    const auto mx = detail::filter_valid(x, h, w);
    const auto my = detail::filter_valid(y, h, w);
    const auto sxx = detail::filter_valid(xx, h, w);
    const auto syy = detail::filter_valid(yy, h, w);
    const auto sxy = detail::filter_valid(xy, h, w);
    double sum = 0.0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = sxx[i] - mx[i] * mx[i];
      const double vy = syy[i] - my[i] * my[i];
      const double cxy = sxy[i] - mx[i] * my[i];
      sum += ((2 * mx[i] * my[i] + kSsimC1) * (2 * cxy + kSsimC2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + kSsimC1) * (vx + vy + kSsimC2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / a.channels();
}

struct MetricReport {
  double psnr_db = 0.0;
  double ssim = 0.0;
  std::vector<double> frame_psnr;
  std::vector<double> frame_ssim;
};

/// Per-frame PSNR/SSIM between two equally long sequences, plus their means.
/// The mean PSNR is +inf when any frame pair is identical.
inline MetricReport evaluate_sequences(const Sequence& pred, const Sequence& truth) {
  if (pred.size() != truth.size()) {
    throw DimensionError("evaluate: " + std::to_string(pred.size()) + " predicted frames vs " +
                         std::to_string(truth.size()) + " reference frames");
  }
  MetricReport r;
  r.frame_psnr.resize(pred.size());
  r.frame_ssim.resize(pred.size());
  parallel_for(pred.size(), [&](std::size_t i) {
    r.frame_psnr[i] = psnr(pred[i], truth[i]);
    r.frame_ssim[i] = ssim(pred[i], truth[i]);
  });
  for (std::size_t i = 0; i < pred.size(); ++i) {
    r.psnr_db += r.frame_psnr[i];
    r.ssim += r.frame_ssim[i];
  }
  if (!pred.empty()) {
    r.psnr_db /= static_cast<double>(pred.size());
    r.ssim /= static_cast<double>(pred.size());
  }
  return r;
}

/// Regenerates LR frames as S K HR and scores them against the observed LR.
inline MetricReport kernel_accuracy(const Sequence& hr_seq, const Sequence& lr_seq, const BlurKernel& kernel, int s) {
  if (hr_seq.size() != lr_seq.size()) throw DimensionError("kernel_accuracy: sequence lengths differ");
  std::vector<Frame> regen(hr_seq.size());
  parallel_for(hr_seq.size(), [&](std::size_t i) { regen[i] = sk_forward(hr_seq[i], kernel, s); });
  return evaluate_sequences(Sequence(std::move(regen)), lr_seq);
}

inline std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

/// CSV: frame,psnr_db,ssim then a summary row labelled "mean".
inline void write_report_csv(std::ostream& os, const MetricReport& r) {
  os << "frame,psnr_db,ssim\n";
  for (std::size_t i = 0; i < r.frame_psnr.size(); ++i) {
    os << i << ',' << format_metric(r.frame_psnr[i]) << ',' << format_metric(r.frame_ssim[i]) << '\n';
  }
  os << "mean," << format_metric(r.psnr_db) << ',' << format_metric(r.ssim) << '\n';
}

}  // namespace bvsr
