#pragma once

// Blur-kernel estimation from HR/LR pairs.
//
// Objective: mean over pairs of the mean absolute error between S K I (the
// HR frame blurred and decimated) and the observed LR frame. The kernel is
// kept on the simplex by a softmax, either over free logits or over the
// output of a two-layer fully connected net (ReLU hidden layer) that maps a
// Gaussian initialization to a refined kernel.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "bvsr/error.hpp"
#include "bvsr/image.hpp"
#include "bvsr/operators.hpp"
#include "bvsr/parallel.hpp"

namespace bvsr {

/// Isotropic Gaussian sampled at integer offsets, normalized.
inline BlurKernel gaussian_kernel(int size, double sigma) {
  if (size <= 0 || size % 2 == 0) throw ConfigError("gaussian_kernel: size must be a positive odd integer");
  if (!(sigma > 0.0)) throw ConfigError("gaussian_kernel: sigma must be positive");
  const int r = size / 2;
  std::vector<double> taps(static_cast<std::size_t>(size) * size);
  for (int a = 0; a < size; ++a)
    for (int b = 0; b < size; ++b) {
      const double d2 = static_cast<double>((a - r) * (a - r) + (b - r) * (b - r));
      taps[a * size + b] = std::exp(-d2 / (2.0 * sigma * sigma));
    }
  return BlurKernel::normalized(size, std::move(taps));
}

// ---------------------------------------------------------------------------
// Softmax parameterization

struct KernelLogits {
  int size = 0;
  std::vector<double> values;

  KernelLogits() = default;
  KernelLogits(int k, std::vector<double> v) : size(k), values(std::move(v)) {
    if (k <= 0 || k % 2 == 0) throw ConfigError("KernelLogits: size must be a positive odd integer");
    if (values.size() != static_cast<std::size_t>(k) * k) throw ConfigError("KernelLogits: wrong value count");
  }

  /// Logits whose softmax reproduces the kernel (zero taps floored).
  static KernelLogits from_kernel(const BlurKernel& kernel) {
    std::vector<double> v(kernel.taps().begin(), kernel.taps().end());
    for (double& t : v) t = std::log(std::max(t, 1e-300));
    return KernelLogits(kernel.size(), std::move(v));
  }
};

/// exp(z - max z), normalized, written to out.
inline void softmax_into(std::span<const double> z, std::span<double> out) {
  double zmax = -std::numeric_limits<double>::infinity();
  for (double v : z) zmax = std::max(zmax, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - zmax);
    sum += out[i];
  }
  for (double& v : out) v /= sum;
}

inline BlurKernel softmax_kernel(const KernelLogits& logits) {
  for (double v : logits.values)
    if (!std::isfinite(v)) throw ConfigError("softmax_kernel: logits must be finite");
  std::vector<double> taps(logits.values.size());
  softmax_into(logits.values, taps);
  return BlurKernel(logits.size, std::move(taps));
}

/// Backward pass of softmax: dz = p * (g - <p, g>).
inline std::vector<double> softmax_backward(std::span<const double> p, std::span<const double> g) {
  double pg = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) pg += p[i] * g[i];
  std::vector<double> dz(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) dz[i] = p[i] * (g[i] - pg);
  return dz;
}

// ---------------------------------------------------------------------------
// KernelNet: softmax(W2 relu(W1 x + b1) + b2), x = vec(init kernel).
//
// Parameters live in one flat vector [W1 | b1 | W2 | b2] so that optimizers
// and gradients share a layout; W1 is hidden x k^2 row-major, W2 k^2 x hidden.

class KernelNet {
 public:
  KernelNet() = default;
  KernelNet(int kernel_size, int hidden)
      : k_(kernel_size), hidden_(hidden), params_(param_count(kernel_size, hidden), 0.0) {
    if (kernel_size <= 0 || kernel_size % 2 == 0) throw ConfigError("KernelNet: kernel size must be odd");
    if (hidden <= 0) throw ConfigError("KernelNet: hidden width must be positive");
  }

  static std::size_t param_count(int k, int hidden) {
    const std::size_t n = static_cast<std::size_t>(k) * k;
    return 2 * n * hidden + hidden + n;
  }

  /// Gaussian weights with the given scales, seeded.
  static KernelNet random(int k, int hidden, std::uint64_t seed, double w1_scale, double w2_scale) {
    KernelNet net(k, hidden);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    for (double& w : net.w1()) w = w1_scale * nd(rng);
    for (double& b : net.b1()) b = 0.1 * w1_scale * nd(rng);
    for (double& w : net.w2()) w = w2_scale * nd(rng);
    for (double& b : net.b2()) b = 0.1 * w2_scale * nd(rng);
    return net;
  }

  /// Net whose output on its first input is exactly `init`: W2 = 0 and b2 holds
  /// the logits of init; W1 is random (He scaling) so hidden units are live.
  static KernelNet for_init(const BlurKernel& init, int hidden, std::uint64_t seed) {
    const int k = init.size();
    KernelNet net(k, hidden);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> nd(0.0, std::sqrt(2.0 / (k * k)));
    for (double& w : net.w1()) w = nd(rng);
    // The input has entries ~1/k^2; scale so pre-activations are O(1).
    for (double& w : net.w1()) w *= k * k;
    const auto logits = KernelLogits::from_kernel(init);
    std::copy(logits.values.begin(), logits.values.end(), net.b2().begin());
    return net;
  }

  int kernel_size() const noexcept { return k_; }
  int hidden() const noexcept { return hidden_; }
  std::size_t inputs() const noexcept { return static_cast<std::size_t>(k_) * k_; }

  std::span<double> params() noexcept { return params_; }
  std::span<const double> params() const noexcept { return params_; }

  std::span<double> w1() noexcept { return {params_.data(), inputs() * hidden_}; }
  std::span<double> b1() noexcept { return {params_.data() + inputs() * hidden_, static_cast<std::size_t>(hidden_)}; }
  std::span<double> w2() noexcept { return {params_.data() + inputs() * hidden_ + hidden_, inputs() * hidden_}; }
  std::span<double> b2() noexcept { return {params_.data() + 2 * inputs() * hidden_ + hidden_, inputs()}; }
  std::span<const double> w1() const noexcept { return const_cast<KernelNet*>(this)->w1(); }
  std::span<const double> b1() const noexcept { return const_cast<KernelNet*>(this)->b1(); }
  std::span<const double> w2() const noexcept { return const_cast<KernelNet*>(this)->w2(); }
  std::span<const double> b2() const noexcept { return const_cast<KernelNet*>(this)->b2(); }

  struct Activations {
    std::vector<double> pre;     // W1 x + b1
    std::vector<double> hidden;  // relu(pre)
    std::vector<double> logits;  // W2 h + b2
    std::vector<double> taps;    // softmax(logits)
  };

  Activations forward(const BlurKernel& init) const {
    if (init.size() != k_) {
      throw ConfigError("KernelNet: input kernel size " + std::to_string(init.size()) + " != " + std::to_string(k_));
    }
    const std::size_t n = inputs();
    const auto x = init.taps();
    Activations act;
    act.pre.resize(hidden_);
    act.hidden.resize(hidden_);
    const auto W1 = w1();
    const auto B1 = b1();
    for (int j = 0; j < hidden_; ++j) {
      double acc = B1[j];
      const double* row = W1.data() + j * n;
      for (std::size_t i = 0; i < n; ++i) acc += row[i] * x[i];
      act.pre[j] = acc;
      act.hidden[j] = acc > 0.0 ? acc : 0.0;
    }
    act.logits.resize(n);
    const auto W2 = w2();
    const auto B2 = b2();
    for (std::size_t i = 0; i < n; ++i) {
      double acc = B2[i];
      const double* row = W2.data() + i * hidden_;
      for (int j = 0; j < hidden_; ++j) acc += row[j] * act.hidden[j];
      act.logits[i] = acc;
    }
    act.taps.resize(n);
    softmax_into(act.logits, act.taps);
    return act;
  }

 private:
  int k_ = 0;
  int hidden_ = 0;
  std::vector<double> params_;
};

inline BlurKernel kernel_net_forward(const KernelNet& net, const BlurKernel& init) {
  return BlurKernel(net.kernel_size(), net.forward(init).taps);
}

// ---------------------------------------------------------------------------
// Objective

struct FramePair {
  Frame hr;
  Frame lr;
};

/// Scale factor shared by every pair; throws ConfigError when pairs disagree.
inline int pair_scale(std::span<const FramePair> pairs) {
  if (pairs.empty()) throw ConfigError("kernel estimation needs at least one HR/LR pair");
  const Frame& hr0 = pairs.front().hr;
  const Frame& lr0 = pairs.front().lr;
  if (hr0.height() % lr0.height() != 0 || hr0.channels() != lr0.channels()) {
    throw ConfigError("pair 0: HR " + hr0.shape_string() + " is not an integer multiple of LR " + lr0.shape_string());
  }
  const int s = hr0.height() / lr0.height();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (!p.hr.same_shape(hr0) || !p.lr.same_shape(lr0) || p.hr.height() != s * p.lr.height() ||
        p.hr.width() != s * p.lr.width()) {
      throw ConfigError("pair " + std::to_string(i) + ": HR " + p.hr.shape_string() + " / LR " +
                        p.lr.shape_string() + " inconsistent with pair 0");
    }
  }
  return s;
}

/// Mean-L1 degradation-consistency objective over a fixed set of pairs, as a
/// function of raw kernel taps.
class KernelObjective {
 public:
  KernelObjective(std::vector<FramePair> pairs, int kernel_size)
      : pairs_(std::move(pairs)), k_(kernel_size) {
    if (kernel_size <= 0 || kernel_size % 2 == 0) throw ConfigError("kernel size must be a positive odd integer");
    scale_ = pair_scale(pairs_);
  }

  int scale() const noexcept { return scale_; }
  int kernel_size() const noexcept { return k_; }
  const std::vector<FramePair>& pairs() const noexcept { return pairs_; }

  double loss(std::span<const double> taps) const { return evaluate(taps, {}); }

  /// Loss and its (sub)gradient with respect to the taps; sign(0) = 0.
  double loss_grad(std::span<const double> taps, std::span<double> grad) const {
    return evaluate(taps, grad);
  }

 private:
  double evaluate(std::span<const double> taps, std::span<double> grad) const {
    const std::size_t n = static_cast<std::size_t>(k_) * k_;
    if (taps.size() != n) throw ConfigError("KernelObjective: tap count mismatch");
    const bool want_grad = !grad.empty();
    std::vector<double> losses(pairs_.size(), 0.0);
    std::vector<std::vector<double>> grads(pairs_.size());
    parallel_for(pairs_.size(), [&](std::size_t p) {
      if (want_grad) grads[p].assign(n, 0.0);
      losses[p] = pair_term(pairs_[p], taps, want_grad ? std::span<double>(grads[p]) : std::span<double>{});
    });
    double total = 0.0;
    if (want_grad) std::fill(grad.begin(), grad.end(), 0.0);
    const double inv = 1.0 / static_cast<double>(pairs_.size());
    for (std::size_t p = 0; p < pairs_.size(); ++p) {
      total += losses[p];
      if (want_grad)
        for (std::size_t i = 0; i < n; ++i) grad[i] += grads[p][i] * inv;
    }
    return total * inv;
  }

  double pair_term(const FramePair& pair, std::span<const double> taps, std::span<double> grad) const {
    const Frame& hr = pair.hr;
    const Frame& lr = pair.lr;
    const int r = k_ / 2;
    const int s = scale_;
    const int ch = hr.channels();
    const int H = hr.height(), W = hr.width();
    const double inv_count = 1.0 / static_cast<double>(lr.size());
    std::vector<double> patch(static_cast<std::size_t>(k_) * k_);
    double sum = 0.0;
    for (int y = 0; y < lr.height(); ++y) {
      for (int x = 0; x < lr.width(); ++x) {
        const int cy = y * s, cx = x * s;
        const bool interior = cy >= r && cy + r < H && cx >= r && cx + r < W;
        for (int c = 0; c < ch; ++c) {
          double pred = 0.0;
          std::size_t t = 0;
          for (int a = 0; a < k_; ++a) {
            for (int b = 0; b < k_; ++b, ++t) {
              const double v = interior ? hr.at(cy + a - r, cx + b - r, c) : hr.clamped(cy + a - r, cx + b - r, c);
              patch[t] = v;
              pred += taps[t] * v;
            }
          }
          const double res = pred - lr.at(y, x, c);
          sum += std::abs(res);
          if (!grad.empty() && res != 0.0) {
            const double sg = (res > 0.0 ? 1.0 : -1.0) * inv_count;
            for (std::size_t i = 0; i < patch.size(); ++i) grad[i] += sg * patch[i];
          }
        }
      }
    }
    return sum * inv_count;
  }

  std::vector<FramePair> pairs_;
  int k_;
  int scale_ = 1;
};

/// Mean-L1 consistency of one kernel against a single pair.
inline double kernel_loss(const BlurKernel& kernel, const Frame& hr, const Frame& lr, int s) {
  check_divisible(hr, s, "kernel_loss");
  if (hr.height() != s * lr.height() || hr.width() != s * lr.width() || hr.channels() != lr.channels()) {
    throw DimensionError("kernel_loss: HR " + hr.shape_string() + " and LR " + lr.shape_string() +
                         " incompatible at scale " + std::to_string(s));
  }
  const Frame pred = sk_forward(hr, kernel, s);
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) sum += std::abs(pred.data()[i] - lr.data()[i]);
  return sum / static_cast<double>(pred.size());
}

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

/// Gradient of the objective with respect to softmax logits.
inline LossGrad kernel_loss_grad(const KernelLogits& logits, const KernelObjective& objective) {
  if (logits.size != objective.kernel_size()) throw ConfigError("kernel_loss_grad: logit size mismatch");
  std::vector<double> taps(logits.values.size());
  softmax_into(logits.values, taps);
  std::vector<double> g(taps.size());
  LossGrad out;
  out.loss = objective.loss_grad(taps, g);
  out.grad = softmax_backward(taps, g);
  return out;
}

/// Gradient with respect to the flat KernelNet parameter vector.
inline LossGrad kernel_loss_grad(const KernelNet& net, const BlurKernel& init, const KernelObjective& objective) {
  if (net.kernel_size() != objective.kernel_size()) throw ConfigError("kernel_loss_grad: net size mismatch");
  const auto act = net.forward(init);
  std::vector<double> g(act.taps.size());
  LossGrad out;
  out.loss = objective.loss_grad(act.taps, g);
  const auto dz = softmax_backward(act.taps, g);

  const std::size_t n = net.inputs();
  const int hidden = net.hidden();
  KernelNet grad(net.kernel_size(), hidden);
  auto gW2 = grad.w2();
  auto gB2 = grad.b2();
  const auto W2 = net.w2();
  std::vector<double> dh(hidden, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    gB2[i] = dz[i];
    for (int j = 0; j < hidden; ++j) {
      gW2[i * hidden + j] = dz[i] * act.hidden[j];
      dh[j] += W2[i * hidden + j] * dz[i];
    }
  }
  auto gW1 = grad.w1();
  auto gB1 = grad.b1();
  const auto x = init.taps();
  for (int j = 0; j < hidden; ++j) {
    const double dpre = act.pre[j] > 0.0 ? dh[j] : 0.0;
    gB1[j] = dpre;
    for (std::size_t i = 0; i < n; ++i) gW1[j * n + i] = dpre * x[i];
  }
  out.grad.assign(grad.params().begin(), grad.params().end());
  return out;
}

// ---------------------------------------------------------------------------
// Optimizer

/// Adaptive first-order update with bias-corrected first and second moments.
class AdamOptimizer {
 public:
  AdamOptimizer(std::size_t n, double step, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : m_(n, 0.0), v_(n, 0.0), step_(step), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void update(std::span<double> params, std::span<const double> grad, double step_scale = 1.0) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    const double c2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
      params[i] -= step_scale * step_ * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
    }
  }

 private:
  std::vector<double> m_, v_;
  double step_, beta1_, beta2_, eps_;
  int t_ = 0;
};

enum class EstimatorMode { direct_logits, fc_net };

struct EstimatorConfig {
  EstimatorMode mode = EstimatorMode::direct_logits;
  double init_sigma = 2.0;
  int kernel_size = 15;
  int max_iters = 1500;
  double step_size = 1e-2;
  /// Cosine annealing of the step towards step_size * final_step_fraction.
  double final_step_fraction = 1.0;
  double grad_tolerance = 1e-10;
  int hidden = 1000;
  std::uint64_t net_seed = 0;
};

struct KernelEstimate {
  BlurKernel kernel;
  std::vector<double> history;  // objective of iterate t, t = 0..iterations-1
  int best_iteration = 0;
  double best_loss = 0.0;
  double initial_loss = 0.0;
};

inline void validate(const EstimatorConfig& cfg) {
  if (cfg.kernel_size <= 0 || cfg.kernel_size % 2 == 0) {
    throw ConfigError("estimator: kernel_size must be a positive odd integer");
  }
  if (cfg.max_iters < 1) throw ConfigError("estimator: max_iters must be >= 1");
  if (!(cfg.init_sigma > 0.0)) throw ConfigError("estimator: init_sigma must be positive");
  if (!(cfg.step_size > 0.0)) throw ConfigError("estimator: step_size must be positive");
  if (!(cfg.final_step_fraction > 0.0) || cfg.final_step_fraction > 1.0) {
    throw ConfigError("estimator: final_step_fraction must be in (0, 1]");
  }
  if (cfg.grad_tolerance < 0.0) throw ConfigError("estimator: grad_tolerance must be >= 0");
  if (cfg.hidden < 1) throw ConfigError("estimator: hidden width must be >= 1");
}

/// Minimizes the objective from the Gaussian initialization and returns the
/// iterate with the lowest objective seen.
inline KernelEstimate estimate_kernel(std::vector<FramePair> pairs, const EstimatorConfig& cfg) {
  validate(cfg);
  const KernelObjective objective(std::move(pairs), cfg.kernel_size);
  const BlurKernel init = gaussian_kernel(cfg.kernel_size, cfg.init_sigma);

  std::vector<double> params;
  KernelNet net;
  if (cfg.mode == EstimatorMode::direct_logits) {
    params = KernelLogits::from_kernel(init).values;
  } else {
    net = KernelNet::for_init(init, cfg.hidden, cfg.net_seed);
    params.assign(net.params().begin(), net.params().end());
  }

  auto taps_of = [&](std::span<const double> p) {
    if (cfg.mode == EstimatorMode::direct_logits) {
      std::vector<double> taps(p.size());
      softmax_into(p, taps);
      return taps;
    }
    std::copy(p.begin(), p.end(), net.params().begin());
    return net.forward(init).taps;
  };
  auto loss_grad = [&](std::span<const double> p) {
    if (cfg.mode == EstimatorMode::direct_logits) {
      return kernel_loss_grad(KernelLogits(cfg.kernel_size, {p.begin(), p.end()}), objective);
    }
    std::copy(p.begin(), p.end(), net.params().begin());
    return kernel_loss_grad(net, init, objective);
  };

  KernelEstimate result;
  AdamOptimizer adam(params.size(), cfg.step_size);
  std::vector<double> best_params = params;
  double best = std::numeric_limits<double>::infinity();
  constexpr double pi = 3.14159265358979323846;
  for (int it = 0; it < cfg.max_iters; ++it) {
    const LossGrad lg = loss_grad(params);
    if (!std::isfinite(lg.loss)) throw NumericalError("kernel estimation produced a non-finite objective");
    result.history.push_back(lg.loss);
    if (lg.loss < best) {
      best = lg.loss;
      best_params = params;
      result.best_iteration = it;
    }
    double gnorm = 0.0;
    for (double g : lg.grad) gnorm += g * g;
    if (std::sqrt(gnorm) < cfg.grad_tolerance) break;
    const double progress = cfg.max_iters > 1 ? static_cast<double>(it) / (cfg.max_iters - 1) : 0.0;
    const double f = cfg.final_step_fraction;
    const double scale = f + (1.0 - f) * 0.5 * (1.0 + std::cos(pi * progress));
    adam.update(params, lg.grad, scale);
  }
  result.initial_loss = result.history.front();
  result.best_loss = best;
  auto taps = taps_of(best_params);
  result.kernel = BlurKernel(cfg.kernel_size, std::move(taps));
  return result;
}

}  // namespace bvsr
