#pragma once

// End-to-end blind video super-resolution of a reference frame from a window
// of three LR frames:
//
//   kernel estimate -> deconvolved intermediate -> flow-aligned guides
//     -> space-to-depth packing -> restorer
//
// The restorer is pluggable. The default fuses the intermediate with the two
// guides, down-weighting guide samples that disagree with the bicubic
// reference; an external restorer exchanges the packed input through files.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "bvsr/deconvolver.hpp"
#include "bvsr/error.hpp"
#include "bvsr/flow.hpp"
#include "bvsr/image.hpp"
#include "bvsr/kernel_estimator.hpp"
#include "bvsr/operators.hpp"
#include "bvsr/parallel.hpp"
#include "bvsr/png_io.hpp"

namespace bvsr {

/// Space-to-depth of (guide_next, intermediate, guide_prev), concatenated in
/// that order along channels.
struct RestorerInput {
  Frame packed;
  int scale = 1;
  int base_channels = 1;

  static constexpr int kBlocks = 3;
  enum Block { guide_next = 0, intermediate = 1, guide_prev = 2 };

  /// One of the three HR frames, recovered exactly.
  Frame block(Block b) const {
    const int per = base_channels * scale * scale;
    return depth_to_space(slice_channels(packed, static_cast<int>(b) * per, per), scale);
  }
};

inline RestorerInput pack_restorer_input(const Frame& guide_next, const Frame& intermediate, const Frame& guide_prev,
                                         int s) {
  if (!guide_next.same_shape(intermediate) || !guide_prev.same_shape(intermediate)) {
    throw DimensionError("pack_restorer_input: frames " + guide_next.shape_string() + ", " +
                         intermediate.shape_string() + ", " + guide_prev.shape_string() + " differ");
  }
  const Frame parts[] = {space_to_depth(guide_next, s), space_to_depth(intermediate, s),
                         space_to_depth(guide_prev, s)};
  RestorerInput in;
  in.packed = concat_channels(parts);
  in.scale = s;
  in.base_channels = intermediate.channels();
  return in;
}

/// Mean absolute error.
inline double l1_loss(const Frame& pred, const Frame& truth) {
  if (!pred.same_shape(truth)) throw DimensionError("l1_loss: " + pred.shape_string() + " vs " + truth.shape_string());
  double s = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred.data()[i] - truth.data()[i]);
  return s / static_cast<double>(pred.size());
}

// ---------------------------------------------------------------------------
// Restorers

class Restorer {
 public:
  virtual ~Restorer() = default;
  /// HR frame in [0,1] from the packed input and the bicubic-upsampled reference.
  virtual Frame restore(const RestorerInput& input, const Frame& ref_bicubic, std::size_t frame_index) const = 0;
};

/// Per-sample weighted mean of the intermediate (weight 1) and each guide
/// (weight exp(-|guide - ref_bicubic| / h)), clamped to [0,1].
class ConfidenceFusion final : public Restorer {
 public:
  explicit ConfidenceFusion(double bandwidth = 0.05) : bandwidth_(bandwidth) {
    if (!(bandwidth > 0.0)) throw ConfigError("fusion bandwidth must be positive");
  }

  Frame restore(const RestorerInput& input, const Frame& ref_bicubic, std::size_t = 0) const override {
    const Frame next = input.block(RestorerInput::guide_next);
    const Frame inter = input.block(RestorerInput::intermediate);
    const Frame prev = input.block(RestorerInput::guide_prev);
    if (!ref_bicubic.same_shape(inter)) {
      throw DimensionError("fuse_confidence: reference " + ref_bicubic.shape_string() + " vs " + inter.shape_string());
    }
    Frame out(inter.height(), inter.width(), inter.channels());
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double ref = ref_bicubic.data()[i];
      const double wn = std::exp(-std::abs(next.data()[i] - ref) / bandwidth_);
      const double wp = std::exp(-std::abs(prev.data()[i] - ref) / bandwidth_);
      out.data()[i] = (inter.data()[i] + wn * next.data()[i] + wp * prev.data()[i]) / (1.0 + wn + wp);
    }
    return clamp01(std::move(out));
  }

  double bandwidth() const noexcept { return bandwidth_; }

 private:
  double bandwidth_;
};

inline Frame fuse_confidence(const RestorerInput& input, const Frame& ref_bicubic, double bandwidth = 0.05) {
  return ConfidenceFusion(bandwidth).restore(input, ref_bicubic);
}

// Packed-input interchange: a directory holding channel_%03d.png (16-bit
// grayscale, one per packed channel, values clamped to [0,1]) and manifest.txt.

inline void write_packed_input(const std::filesystem::path& dir, const RestorerInput& input, std::size_t frame_index) {
  std::filesystem::create_directories(dir);
  for (int c = 0; c < input.packed.channels(); ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "channel_%03d.png", c);
    write_png(dir / name, input.packed.channel(c), 16);
  }
  std::ofstream m(dir / "manifest.txt");
  if (!m) throw IoError("cannot create manifest in " + dir.string());
  m << "scale " << input.scale << '\n'
    << "base_channels " << input.base_channels << '\n'
    << "channels " << input.packed.channels() << '\n'
    << "order guide_next,intermediate,guide_prev\n"
    << "layout c*s*s+dy*s+dx\n"
    << "frame " << frame_index << '\n';
}

inline RestorerInput read_packed_input(const std::filesystem::path& dir, std::size_t* frame_index = nullptr) {
  std::ifstream m(dir / "manifest.txt");
  if (!m) throw IoError("missing manifest.txt in " + dir.string());
  RestorerInput in;
  int channels = -1;
  std::string key;
  while (m >> key) {
    std::string value;
    m >> value;
    if (key == "scale") in.scale = std::stoi(value);
    else if (key == "base_channels") in.base_channels = std::stoi(value);
    else if (key == "channels") channels = std::stoi(value);
    else if (key == "frame" && frame_index) *frame_index = std::stoul(value);
  }
  if (channels != RestorerInput::kBlocks * in.base_channels * in.scale * in.scale) {
    throw IoError("manifest in " + dir.string() + " has inconsistent channel count");
  }
  std::vector<Frame> planes;
  for (int c = 0; c < channels; ++c) {
    char name[32];
    std::snprintf(name, sizeof name, "channel_%03d.png", c);
    planes.push_back(read_png(dir / name));
  }
  in.packed = concat_channels(planes);
  return in;
}

/// Runs a shell command per frame: "{input}" is replaced with the packed-input
/// directory and "{output}" with the PNG path the command must write.
class ExternalRestorer final : public Restorer {
 public:
  ExternalRestorer(std::string command, std::filesystem::path work_dir)
      : command_(std::move(command)), work_dir_(std::move(work_dir)) {
    if (command_.empty()) throw ConfigError("external restorer needs a command");
  }

  Frame restore(const RestorerInput& input, const Frame& ref_bicubic, std::size_t frame_index) const override {
    char tag[32];
    std::snprintf(tag, sizeof tag, "%06zu", frame_index);
    const auto in_dir = work_dir_ / (std::string("packed_") + tag);
    const auto out_png = work_dir_ / (std::string("restored_") + tag + ".png");
    write_packed_input(in_dir, input, frame_index);
    std::string cmd = command_;
    replace_all(cmd, "{input}", in_dir.string());
    replace_all(cmd, "{output}", out_png.string());
    if (std::system(cmd.c_str()) != 0) throw IoError("external restorer failed: " + cmd);
    Frame out = read_png(out_png);
    if (!out.same_shape(ref_bicubic)) {
      throw DimensionError("external restorer produced " + out.shape_string() + ", expected " +
                           ref_bicubic.shape_string());
    }
    return out;
  }

 private:
  static void replace_all(std::string& s, const std::string& from, const std::string& to) {
    for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size()) s.replace(pos, from.size(), to);
  }

  std::string command_;
  std::filesystem::path work_dir_;
};

// ---------------------------------------------------------------------------
// Configuration

enum class RestorerKind { confidence_fusion, external };

struct PipelineConfig {
  int scale = 4;
  EstimatorConfig estimator;
  SolverConfig solver;
  FlowConfig flow;
  RestorerKind restorer = RestorerKind::confidence_fusion;
  double fusion_bandwidth = 0.05;
  std::string external_command;
  std::filesystem::path work_dir = "restorer_work";
};

inline void validate(const PipelineConfig& cfg) {
  if (cfg.scale < 1) throw ConfigError("pipeline: scale must be >= 1");
  validate(cfg.solver);
  validate(cfg.flow);
  if (!(cfg.fusion_bandwidth > 0.0)) throw ConfigError("pipeline: fusion_bandwidth must be > 0");
}

inline std::unique_ptr<Restorer> make_restorer(const PipelineConfig& cfg) {
  if (cfg.restorer == RestorerKind::external) return std::make_unique<ExternalRestorer>(cfg.external_command, cfg.work_dir);
  return std::make_unique<ConfidenceFusion>(cfg.fusion_bandwidth);
}

struct FrameDiagnostics {
  std::vector<ChannelSolveStats> cg;
  bool singular_warning = false;
  double flow_prev_max = 0.0;
  double flow_next_max = 0.0;
  double seconds = 0.0;
};

struct FlowPair {
  FlowField prev;
  FlowField next;
};

/// Super-resolves the reference of a (prev, ref, next) LR window.
inline Frame superresolve_frame(const Frame& prev, const Frame& ref, const Frame& next, const BlurKernel& kernel,
                                const PipelineConfig& cfg, const Restorer& restorer, std::size_t frame_index = 0,
                                const FlowPair* flows = nullptr, FrameDiagnostics* diag = nullptr) {
  validate(cfg);
  if (!prev.same_shape(ref) || !next.same_shape(ref)) {
    throw DimensionError("superresolve_frame: window frames must share one shape");
  }
  const int s = cfg.scale;
  DeconvResult deconv = deconvolve(ref, kernel, s, cfg.solver);
  AlignedGuides guides;
  if (flows) {
    guides = align_guides_with_flows(bicubic_resize(prev, s), bicubic_resize(ref, s), bicubic_resize(next, s),
                                     flows->prev, flows->next);
  } else {
    guides = align_guides(prev, ref, next, s, cfg.flow);
  }
  const RestorerInput packed = pack_restorer_input(guides.next, deconv.frame, guides.prev, s);
  Frame out = clamp01(restorer.restore(packed, guides.reference, frame_index));
  if (!out.all_finite()) throw NumericalError("superresolve_frame: non-finite output");
  if (diag) {
    diag->cg = deconv.channels;
    diag->singular_warning = deconv.singular_warning;
    diag->flow_prev_max = guides.flow_prev.max_magnitude();
    diag->flow_next_max = guides.flow_next.max_magnitude();
  }
  return out;
}

inline Frame superresolve_frame(const Frame& prev, const Frame& ref, const Frame& next, const BlurKernel& kernel,
                                const PipelineConfig& cfg) {
  const auto restorer = make_restorer(cfg);
  return superresolve_frame(prev, ref, next, kernel, cfg, *restorer);
}

// ---------------------------------------------------------------------------
// Blind kernel estimation on a sequence

/// Pseudo-pairs for blind estimation: each LR frame (cropped to a multiple of
/// s) plays the HR role and its anti-aliased bicubic downscale by s the LR role.
inline std::vector<FramePair> make_blind_pairs(const Sequence& seq, int s) {
  std::vector<FramePair> pairs;
  for (const Frame& f : seq) {
    const int h = f.height() / s * s, w = f.width() / s * s;
    if (h < s || w < s) throw DimensionError("blind pairs: frame " + f.shape_string() + " smaller than scale");
    Frame crop(h, w, f.channels());
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < f.channels(); ++c) crop.at(y, x, c) = f.at(y, x, c);
    Frame lr = bicubic_resize_to(crop, h / s, w / s);
    pairs.push_back({std::move(crop), std::move(lr)});
  }
  return pairs;
}

struct SequenceResult {
  Sequence frames;
  BlurKernel kernel;
  std::optional<KernelEstimate> estimate;  // set when the kernel was estimated
  std::vector<FrameDiagnostics> diagnostics;
};

/// Super-resolves every frame with a sliding window of three; missing
/// neighbours at the ends are replaced by the reference. Without a kernel, one
/// is estimated blindly once for the whole sequence.
inline SequenceResult superresolve_sequence(const Sequence& seq, const PipelineConfig& cfg,
                                            std::optional<BlurKernel> kernel = std::nullopt,
                                            const std::vector<FlowPair>* flows = nullptr) {
  seq.validate();
  validate(cfg);
  if (flows && flows->size() != seq.size()) throw DimensionError("superresolve_sequence: one flow pair per frame needed");
  SequenceResult result;
  if (kernel) {
    result.kernel = *kernel;
  } else {
    result.estimate = estimate_kernel(make_blind_pairs(seq, cfg.scale), cfg.estimator);
    result.kernel = result.estimate->kernel;
  }
  const auto restorer = make_restorer(cfg);
  const std::size_t n = seq.size();
  std::vector<Frame> out(n);
  result.diagnostics.resize(n);
  parallel_for(n, [&](std::size_t i) {
    const Frame& prev = seq[i == 0 ? 0 : i - 1];
    const Frame& next = seq[i + 1 < n ? i + 1 : n - 1];
    out[i] = superresolve_frame(prev, seq[i], next, result.kernel, cfg, *restorer, i,
                                flows ? &(*flows)[i] : nullptr, &result.diagnostics[i]);
  });
  result.frames = Sequence(std::move(out));
  return result;
}

}  // namespace bvsr
