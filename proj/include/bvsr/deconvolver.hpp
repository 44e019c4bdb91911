#pragma once

// Regularized deconvolution of one LR frame to HR:
//
//   argmin_x ||S K x - L||^2 + gamma (||D_h x||^2 + ||D_v x||^2)
//
// solved through its normal equations A x = K^T S^T L with
// A = K^T S^T S K + gamma (D_h^T D_h + D_v^T D_v). Replicate boundaries and
// decimation rule out an FFT diagonalization, so A is applied matrix-free and
// inverted by conjugate gradients, one channel at a time.

#include <cmath>
#include <string>
#include <vector>

#include "bvsr/error.hpp"
#include "bvsr/image.hpp"
#include "bvsr/operators.hpp"
#include "bvsr/parallel.hpp"

namespace bvsr {

struct SolverConfig {
  double gamma = 0.02;
  double cg_tolerance = 1e-6;
  int cg_max_iters = 200;
  bool warm_start = false;  // start CG from bicubic upsampling instead of zero
};

inline void validate(const SolverConfig& cfg) {
  if (!(cfg.gamma >= 0.0)) throw ConfigError("solver: gamma must be >= 0");
  if (!(cfg.cg_tolerance >= 0.0)) throw ConfigError("solver: cg_tolerance must be >= 0");
  if (cfg.cg_max_iters < 1) throw ConfigError("solver: cg_max_iters must be >= 1");
}

/// A x for the normal operator; x is an HR frame.
inline Frame normal_operator_apply(const Frame& x, const BlurKernel& kernel, int s, double gamma) {
  check_divisible(x, s, "normal_operator_apply");
  Frame out = sk_adjoint(sk_forward(x, kernel, s), kernel, s);
  if (gamma != 0.0) {
    const Frame gh = gradient_h_adjoint(gradient_h(x));
    const Frame gv = gradient_v_adjoint(gradient_v(x));
    for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += gamma * (gh.data()[i] + gv.data()[i]);
  }
  return out;
}

struct ChannelSolveStats {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
};

struct DeconvResult {
  Frame frame;
  std::vector<ChannelSolveStats> channels;
  /// gamma = 0 with s > 1 leaves A rank-deficient; CG ran without guarantees.
  bool singular_warning = false;

  bool converged() const {
    for (const auto& c : channels)
      if (!c.converged) return false;
    return true;
  }
};

/// Conjugate gradients on A x = b for one channel. x holds the initial guess.
inline ChannelSolveStats conjugate_gradient(const Frame& b, Frame& x, const BlurKernel& kernel, int s,
                                            const SolverConfig& cfg) {
  ChannelSolveStats stats;
  const double bnorm = norm2(b);
  if (bnorm == 0.0) {
    x = Frame(b.height(), b.width(), b.channels());
    stats.converged = true;
    return stats;
  }
  Frame r = b;
  {
    const Frame ax = normal_operator_apply(x, kernel, s, cfg.gamma);
    for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] -= ax.data()[i];
  }
  Frame p = r;
  double rr = dot(r, r);
  stats.relative_residual = std::sqrt(rr) / bnorm;
  while (stats.relative_residual > cfg.cg_tolerance && stats.iterations < cfg.cg_max_iters) {
    const Frame ap = normal_operator_apply(p, kernel, s, cfg.gamma);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;  // A is only semidefinite along p
    const double alpha = rr / pap;
    for (std::size_t i = 0; i < x.size(); ++i) {
      x.data()[i] += alpha * p.data()[i];
      r.data()[i] -= alpha * ap.data()[i];
    }
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    for (std::size_t i = 0; i < p.size(); ++i) p.data()[i] = r.data()[i] + beta * p.data()[i];
    ++stats.iterations;
    stats.relative_residual = std::sqrt(rr) / bnorm;
  }
  stats.converged = stats.relative_residual <= cfg.cg_tolerance;
  return stats;
}

/// HR estimate from one LR frame and a known kernel. The result is not clamped.
inline DeconvResult deconvolve(const Frame& lr, const BlurKernel& kernel, int s, const SolverConfig& cfg = {}) {
  validate(cfg);
  if (s <= 0) throw DimensionError("deconvolve: scale must be positive");
  const Frame rhs = sk_adjoint(lr, kernel, s);
  DeconvResult result;
  result.singular_warning = cfg.gamma == 0.0 && s > 1;
  result.frame = Frame(rhs.height(), rhs.width(), rhs.channels());
  result.channels.resize(lr.channels());
  std::vector<Frame> solved(lr.channels());
  const Frame start = cfg.warm_start ? bicubic_resize(lr, s) : Frame();
  parallel_for(static_cast<std::size_t>(lr.channels()), [&](std::size_t c) {
    const int ci = static_cast<int>(c);
    Frame x = cfg.warm_start ? start.channel(ci) : Frame(rhs.height(), rhs.width(), 1);
    result.channels[c] = conjugate_gradient(rhs.channel(ci), x, kernel, s, cfg);
    solved[c] = std::move(x);
  });
  for (int c = 0; c < lr.channels(); ++c) result.frame.set_channel(c, solved[c]);
  return result;
}

}  // namespace bvsr
