// bvsr: command-line driver for degradation synthesis, kernel estimation,
// super-resolution and evaluation.
//
// Exit codes: 0 success, 2 configuration/usage error, 3 I/O error,
// 4 numerical failure.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bvsr/bvsr.hpp"

namespace fs = std::filesystem;
using namespace bvsr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumerical = 4;

struct CommonOptions {
  std::string config_file;
  std::vector<std::string> assignments;
  int threads = 0;  // 0: leave the config value
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_file, "key=value config file");
  cmd->add_option("--set", opts.assignments, "override a config key (key=value), repeatable");
}

/// Config file first, then --set overrides, then dedicated flags (applied by
/// the caller through `flag`).
RunConfig resolve(const CommonOptions& opts) {
  RunConfig cfg;
  if (!opts.config_file.empty()) cfg.load_file(opts.config_file);
  for (const auto& a : opts.assignments) cfg.set_assignment(a);
  return cfg;
}

template <class T>
void flag(RunConfig& cfg, const std::string& key, const std::optional<T>& value) {
  if (!value) return;
  std::ostringstream os;
  os.precision(17);
  os << std::boolalpha << *value;
  cfg.set(key, os.str());
}

void apply_threads(const RunConfig& cfg, int cli_threads) {
  const long long n = cli_threads > 0 ? cli_threads : cfg.get_int("threads");
  set_thread_count(static_cast<int>(n));
}

void write_run_cfg(const fs::path& dir, const RunConfig& cfg) {
  fs::create_directories(dir);
  std::ofstream os(dir / "run.cfg");
  if (!os) throw IoError("cannot write " + (dir / "run.cfg").string());
  cfg.write(os);
}

void write_loss_csv(const fs::path& path, const KernelEstimate& est) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "iteration,objective\n";
  os.precision(17);
  for (std::size_t i = 0; i < est.history.size(); ++i) os << i << ',' << est.history[i] << '\n';
}

// ---------------------------------------------------------------------------

struct DegradeArgs {
  CommonOptions common;
  std::string in_dir, out_dir;
  std::optional<int> scale, seed, bit_depth;
  std::optional<double> sigma, noise;
  std::optional<std::string> kernel;
};

int cmd_degrade(const DegradeArgs& a) {
  RunConfig cfg = resolve(a.common);
  flag(cfg, "scale", a.scale);
  flag(cfg, "seed", a.seed);
  flag(cfg, "io.bit_depth", a.bit_depth);
  flag(cfg, "degrade.sigma", a.sigma);
  flag(cfg, "degrade.noise_std", a.noise);
  flag(cfg, "degrade.kernel_file", a.kernel);
  apply_threads(cfg, a.common.threads);
  const DegradationConfig dc = cfg.degradation();
  const int bits = cfg.bit_depth();

  const Sequence hr = read_sequence(a.in_dir);
  const Sequence lr = degrade(hr, {}, dc);
  const fs::path out(a.out_dir);
  write_sequence(out, lr, bits);
  save_kernel(out / "kernel.txt", dc.kernel);
  std::ofstream(out / "seed.txt") << dc.rng_seed << '\n';
  write_run_cfg(out, cfg);
  std::cerr << "degraded " << hr.size() << " frames " << hr[0].shape_string() << " -> " << lr[0].shape_string()
            << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct EstimateArgs {
  CommonOptions common;
  std::string pairs_dir, out_kernel, loss_csv;
  bool blind = false;
  std::optional<int> scale, kernel_size, max_iters;
  std::optional<double> init_sigma, step_size;
  std::optional<std::string> mode;
};

int cmd_estimate_kernel(const EstimateArgs& a) {
  RunConfig cfg = resolve(a.common);
  flag(cfg, "scale", a.scale);
  flag(cfg, "estimator.kernel_size", a.kernel_size);
  flag(cfg, "estimator.max_iters", a.max_iters);
  flag(cfg, "estimator.init_sigma", a.init_sigma);
  flag(cfg, "estimator.step_size", a.step_size);
  flag(cfg, "estimator.mode", a.mode);
  apply_threads(cfg, a.common.threads);
  const EstimatorConfig ec = cfg.estimator();

  std::vector<FramePair> pairs;
  if (a.blind) {
    pairs = make_blind_pairs(read_sequence(a.pairs_dir), cfg.scale());
  } else {
    const fs::path root(a.pairs_dir);
    if (!fs::is_directory(root / "hr") || !fs::is_directory(root / "lr")) {
      throw IoError(a.pairs_dir + " must contain hr/ and lr/ subdirectories (or pass --blind)");
    }
    const auto hr_files = list_png_files(root / "hr");
    const auto lr_files = list_png_files(root / "lr");
    if (hr_files.empty()) throw IoError("no HR/LR pairs found in " + a.pairs_dir);
    if (hr_files.size() != lr_files.size()) {
      throw DimensionError("hr/ has " + std::to_string(hr_files.size()) + " frames, lr/ has " +
                           std::to_string(lr_files.size()));
    }
    for (std::size_t i = 0; i < hr_files.size(); ++i) pairs.push_back({read_png(hr_files[i]), read_png(lr_files[i])});
  }

  const KernelEstimate est = estimate_kernel(std::move(pairs), ec);
  const fs::path out(a.out_kernel);
  const fs::path dir = out.has_parent_path() ? out.parent_path() : fs::path(".");
  fs::create_directories(dir);
  save_kernel(out, est.kernel);
  write_loss_csv(a.loss_csv.empty() ? fs::path(out.string() + ".loss.csv") : fs::path(a.loss_csv), est);
  write_run_cfg(dir, cfg);
  std::cerr << "objective " << est.initial_loss << " -> " << est.best_loss << " (best at iteration "
            << est.best_iteration << " of " << est.history.size() << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct SuperResolveArgs {
  CommonOptions common;
  std::string in_dir, out_dir;
  std::string kernel_path;
  bool blind = false;
  bool strict = false;
  std::optional<int> scale, cg_max_iters;
  std::optional<double> gamma, cg_tol;
  std::optional<std::string> restorer, external_command;
};

int cmd_superresolve(const SuperResolveArgs& a) {
  RunConfig cfg = resolve(a.common);
  flag(cfg, "scale", a.scale);
  flag(cfg, "solver.gamma", a.gamma);
  flag(cfg, "solver.cg_tolerance", a.cg_tol);
  flag(cfg, "solver.cg_max_iters", a.cg_max_iters);
  flag(cfg, "pipeline.restorer", a.restorer);
  flag(cfg, "pipeline.external_command", a.external_command);
  if (a.strict) cfg.set("strict", "true");
  apply_threads(cfg, a.common.threads);
  if (a.blind == !a.kernel_path.empty()) throw ConfigError("pass exactly one of --kernel or --blind");

  const fs::path out(a.out_dir);
  PipelineConfig pc = cfg.pipeline();
  pc.work_dir = out / "restorer_work";
  const bool strict = cfg.get_bool("strict");
  const Sequence lr = read_sequence(a.in_dir);

  std::vector<FlowPair> flows;
  if (pc.flow.estimator == FlowEstimatorKind::external) {
    for (std::size_t i = 0; i < lr.size(); ++i) {
      char prev[48], next[48];
      std::snprintf(prev, sizeof prev, "flow_%06zu_prev.flo", i);
      std::snprintf(next, sizeof next, "flow_%06zu_next.flo", i);
      flows.push_back({load_flo(pc.flow.external_dir / prev), load_flo(pc.flow.external_dir / next)});
    }
  }

  std::optional<BlurKernel> kernel;
  if (!a.blind) kernel = load_kernel(a.kernel_path);
  const auto t0 = std::chrono::steady_clock::now();
  const SequenceResult result = superresolve_sequence(lr, pc, kernel, flows.empty() ? nullptr : &flows);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_sequence(out, result.frames, cfg.bit_depth());
  write_run_cfg(out, cfg);
  if (result.estimate) {
    save_kernel(out / "kernel.txt", result.kernel);
    write_loss_csv(out / "kernel.txt.loss.csv", *result.estimate);
  }

  std::ofstream log(out / "run.log");
  bool numerical_failure = false;
  log.precision(6);
  for (std::size_t i = 0; i < result.diagnostics.size(); ++i) {
    const auto& d = result.diagnostics[i];
    log << "frame " << i;
    for (std::size_t c = 0; c < d.cg.size(); ++c) {
      log << " cg[" << c << "]=" << d.cg[c].iterations << "it/" << std::scientific << d.cg[c].relative_residual
          << std::defaultfloat << (d.cg[c].converged ? "" : "(not converged)");
      if (strict && !d.cg[c].converged) numerical_failure = true;
    }
    log << " flow_prev_max=" << d.flow_prev_max << " flow_next_max=" << d.flow_next_max;
    if (d.singular_warning) log << " warning=singular-system(gamma=0,s>1)";
    log << '\n';
    if (strict && d.singular_warning) numerical_failure = true;
  }
  log << "total_seconds " << seconds << '\n';
  std::cerr << "super-resolved " << lr.size() << " frames in " << seconds << " s\n";
  if (numerical_failure) {
    std::cerr << "error: solver did not converge or system is singular (--strict)\n";
    return kExitNumerical;
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------

void emit_report(const MetricReport& r, const std::string& csv_path) {
  write_report_csv(std::cout, r);
  if (!csv_path.empty()) {
    std::ofstream os(csv_path);
    if (!os) throw IoError("cannot write " + csv_path);
    write_report_csv(os, r);
  }
  std::cerr << "mean PSNR " << format_metric(r.psnr_db) << " dB, mean SSIM " << format_metric(r.ssim) << '\n';
}

struct EvaluateArgs {
  std::string pred_dir, truth_dir, csv;
  int threads = 1;
};

int cmd_evaluate(const EvaluateArgs& a) {
  set_thread_count(a.threads);
  const auto pred = read_sequence(a.pred_dir);
  const auto truth = read_sequence(a.truth_dir);
  emit_report(evaluate_sequences(pred, truth), a.csv);
  return kExitOk;
}

struct KernelAccuracyArgs {
  std::string hr_dir, lr_dir, kernel_path, csv;
  int scale = 4;
  int threads = 1;
};

int cmd_kernel_accuracy(const KernelAccuracyArgs& a) {
  set_thread_count(a.threads);
  if (a.scale < 1) throw ConfigError("--scale must be >= 1");
  const auto hr = read_sequence(a.hr_dir);
  const auto lr = read_sequence(a.lr_dir);
  const BlurKernel k = load_kernel(a.kernel_path);
  emit_report(kernel_accuracy(hr, lr, k, a.scale), a.csv);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind video super-resolution toolkit"};
  app.require_subcommand(1);

  DegradeArgs dg;
  auto* degrade_cmd = app.add_subcommand("degrade", "synthesize LR frames: blur, decimate, add noise");
  degrade_cmd->add_option("in_dir", dg.in_dir, "directory of HR PNG frames")->required();
  degrade_cmd->add_option("out_dir", dg.out_dir, "output directory")->required();
  add_common(degrade_cmd, dg.common);
  degrade_cmd->add_option("--threads", dg.common.threads);
  degrade_cmd->add_option("--scale", dg.scale);
  degrade_cmd->add_option("--sigma", dg.sigma, "Gaussian kernel sigma (ignored with --kernel)");
  degrade_cmd->add_option("--kernel", dg.kernel, "kernel file");
  degrade_cmd->add_option("--noise", dg.noise, "additive Gaussian noise std in [0,1] units");
  degrade_cmd->add_option("--seed", dg.seed);
  degrade_cmd->add_option("--bit-depth", dg.bit_depth);

  EstimateArgs es;
  auto* est_cmd = app.add_subcommand("estimate-kernel", "estimate the blur kernel from HR/LR pairs or blindly");
  est_cmd->add_option("pairs_dir", es.pairs_dir, "directory with hr/ and lr/ (or LR frames with --blind)")->required();
  est_cmd->add_option("out_kernel", es.out_kernel, "output kernel file")->required();
  add_common(est_cmd, es.common);
  est_cmd->add_option("--threads", es.common.threads);
  est_cmd->add_flag("--blind", es.blind, "estimate from LR frames alone");
  est_cmd->add_option("--loss-csv", es.loss_csv, "loss history CSV (default <out_kernel>.loss.csv)");
  est_cmd->add_option("--scale", es.scale);
  est_cmd->add_option("--kernel-size", es.kernel_size);
  est_cmd->add_option("--max-iters", es.max_iters);
  est_cmd->add_option("--init-sigma", es.init_sigma);
  est_cmd->add_option("--step-size", es.step_size);
  est_cmd->add_option("--mode", es.mode, "direct-logits | fc-net");

  SuperResolveArgs sr;
  auto* sr_cmd = app.add_subcommand("superresolve", "super-resolve a sequence of LR frames");
  sr_cmd->add_option("in_dir", sr.in_dir, "directory of LR PNG frames")->required();
  sr_cmd->add_option("out_dir", sr.out_dir, "output directory")->required();
  add_common(sr_cmd, sr.common);
  sr_cmd->add_option("--threads", sr.common.threads);
  sr_cmd->add_option("--kernel", sr.kernel_path, "kernel file");
  sr_cmd->add_flag("--blind", sr.blind, "estimate the kernel from the LR frames");
  sr_cmd->add_flag("--strict", sr.strict, "treat solver non-convergence as failure");
  sr_cmd->add_option("--scale", sr.scale);
  sr_cmd->add_option("--gamma", sr.gamma);
  sr_cmd->add_option("--cg-tol", sr.cg_tol);
  sr_cmd->add_option("--cg-max-iters", sr.cg_max_iters);
  sr_cmd->add_option("--restorer", sr.restorer, "confidence-fusion | external");
  sr_cmd->add_option("--external-command", sr.external_command, "command with {input} and {output} placeholders");

  EvaluateArgs ev;
  auto* eval_cmd = app.add_subcommand("evaluate", "PSNR/SSIM of predicted frames against ground truth");
  eval_cmd->add_option("pred_dir", ev.pred_dir)->required();
  eval_cmd->add_option("truth_dir", ev.truth_dir)->required();
  eval_cmd->add_option("--csv", ev.csv, "also write the CSV report here");
  eval_cmd->add_option("--threads", ev.threads);

  KernelAccuracyArgs ka;
  auto* ka_cmd = app.add_subcommand("kernel-accuracy", "score a kernel by regenerating LR frames from HR truth");
  ka_cmd->add_option("hr_dir", ka.hr_dir)->required();
  ka_cmd->add_option("lr_dir", ka.lr_dir)->required();
  ka_cmd->add_option("kernel", ka.kernel_path)->required();
  ka_cmd->add_option("--scale", ka.scale);
  ka_cmd->add_option("--csv", ka.csv);
  ka_cmd->add_option("--threads", ka.threads);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (degrade_cmd->parsed()) return cmd_degrade(dg);
    if (est_cmd->parsed()) return cmd_estimate_kernel(es);
    if (sr_cmd->parsed()) return cmd_superresolve(sr);
    if (eval_cmd->parsed()) return cmd_evaluate(ev);
    if (ka_cmd->parsed()) return cmd_kernel_accuracy(ka);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DimensionError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return kExitConfig;
}
