#pragma once

// key = value run configuration. Every key has a documented default; unknown
// keys are rejected. Files may contain blank lines and '#' comments.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>

#include "bvsr/error.hpp"
#include "bvsr/flow.hpp"
#include "bvsr/kernel_estimator.hpp"
#include "bvsr/operators.hpp"
#include "bvsr/pipeline.hpp"

namespace bvsr {

class RunConfig {
 public:
  RunConfig() : values_(defaults()) {}

  static const std::map<std::string, std::string>& defaults() {
    static const std::map<std::string, std::string> d = {
        {"scale", "4"},
        {"seed", "0"},
        {"threads", "1"},
        {"strict", "false"},
        {"io.bit_depth", "8"},
        {"degrade.kernel_file", ""},
        {"degrade.sigma", "1.2"},
        {"degrade.kernel_size", "15"},
        {"degrade.noise_std", "0"},
        {"estimator.mode", "direct-logits"},
        {"estimator.init_sigma", "2.0"},
        {"estimator.kernel_size", "15"},
        {"estimator.max_iters", "1500"},
        {"estimator.step_size", "0.01"},
        {"estimator.final_step_fraction", "1"},
        {"estimator.grad_tolerance", "1e-10"},
        {"estimator.hidden", "1000"},
        {"estimator.net_seed", "0"},
        {"solver.gamma", "0.02"},
        {"solver.cg_tolerance", "1e-6"},
        {"solver.cg_max_iters", "200"},
        {"solver.warm_start", "false"},
        {"flow.estimator", "horn-schunck-pyramidal"},
        {"flow.pyramid_levels", "4"},
        {"flow.smoothness_weight", "15"},
        {"flow.iters_per_level", "100"},
        {"flow.warp_steps_per_level", "3"},
        {"flow.external_dir", ""},
        {"pipeline.restorer", "confidence-fusion"},
        {"pipeline.fusion_bandwidth", "0.05"},
        {"pipeline.external_command", ""},
    };
    return d;
  }

  void set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second = value;
  }

  /// Parses "key=value" (as given to --set).
  void set_assignment(std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key=value, got '" + std::string(assignment) + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
  }

  void load(std::istream& is, const std::string& origin = "config") {
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      if (trim(line).empty()) continue;
      try {
        set_assignment(line);
      } catch (const ConfigError& e) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + e.what());
      }
    }
  }

  void load_file(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open config " + path.string());
    load(is, path.string());
  }

  const std::string& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
  }

  double get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
      std::size_t used = 0;
      const double d = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return d;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
    }
  }

  long long get_int(const std::string& key) const {
    const std::string& v = get(key);
    long long out = 0;
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size()) {
      throw ConfigError("config key '" + key + "': expected an integer, got '" + v + "'");
    }
    return out;
  }

  bool get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config key '" + key + "': expected true/false, got '" + v + "'");
  }

  /// Fully resolved configuration, one key per line, sorted.
  void write(std::ostream& os) const {
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
  }

  // -- module configs -------------------------------------------------------

  int scale() const {
    const auto s = get_int("scale");
    if (s < 1) throw ConfigError("scale must be >= 1");
    return static_cast<int>(s);
  }

  int bit_depth() const {
    const auto b = get_int("io.bit_depth");
    if (b != 8 && b != 16) throw ConfigError("io.bit_depth must be 8 or 16");
    return static_cast<int>(b);
  }

  DegradationConfig degradation() const {
    DegradationConfig cfg;
    cfg.scale = scale();
    const std::string& file = get("degrade.kernel_file");
    if (!file.empty()) {
      cfg.kernel = load_kernel(file);
    } else {
      cfg.kernel = gaussian_kernel(static_cast<int>(get_int("degrade.kernel_size")), get_double("degrade.sigma"));
    }
    cfg.noise_std = get_double("degrade.noise_std");
    if (cfg.noise_std < 0.0) throw ConfigError("degrade.noise_std must be >= 0");
    cfg.rng_seed = static_cast<std::uint64_t>(get_int("seed"));
    return cfg;
  }

  EstimatorConfig estimator() const {
    EstimatorConfig cfg;
    const std::string& mode = get("estimator.mode");
    if (mode == "direct-logits") cfg.mode = EstimatorMode::direct_logits;
    else if (mode == "fc-net") cfg.mode = EstimatorMode::fc_net;
    else throw ConfigError("estimator.mode must be direct-logits or fc-net, got '" + mode + "'");
    cfg.init_sigma = get_double("estimator.init_sigma");
    cfg.kernel_size = static_cast<int>(get_int("estimator.kernel_size"));
    cfg.max_iters = static_cast<int>(get_int("estimator.max_iters"));
    cfg.step_size = get_double("estimator.step_size");
    cfg.final_step_fraction = get_double("estimator.final_step_fraction");
    cfg.grad_tolerance = get_double("estimator.grad_tolerance");
    cfg.hidden = static_cast<int>(get_int("estimator.hidden"));
    cfg.net_seed = static_cast<std::uint64_t>(get_int("estimator.net_seed"));
    validate(cfg);
    return cfg;
  }

  SolverConfig solver() const {
    SolverConfig cfg;
    cfg.gamma = get_double("solver.gamma");
    cfg.cg_tolerance = get_double("solver.cg_tolerance");
    cfg.cg_max_iters = static_cast<int>(get_int("solver.cg_max_iters"));
    cfg.warm_start = get_bool("solver.warm_start");
    validate(cfg);
    return cfg;
  }

  FlowConfig flow() const {
    FlowConfig cfg;
    const std::string& est = get("flow.estimator");
    if (est == "horn-schunck-pyramidal") cfg.estimator = FlowEstimatorKind::horn_schunck_pyramidal;
    else if (est == "external") cfg.estimator = FlowEstimatorKind::external;
    else throw ConfigError("flow.estimator must be horn-schunck-pyramidal or external, got '" + est + "'");
    cfg.pyramid_levels = static_cast<int>(get_int("flow.pyramid_levels"));
    cfg.smoothness_weight = get_double("flow.smoothness_weight");
    cfg.iters_per_level = static_cast<int>(get_int("flow.iters_per_level"));
    cfg.warp_steps_per_level = static_cast<int>(get_int("flow.warp_steps_per_level"));
    cfg.external_dir = get("flow.external_dir");
    if (cfg.estimator == FlowEstimatorKind::external && cfg.external_dir.empty()) {
      throw ConfigError("flow.estimator = external requires flow.external_dir");
    }
    validate(cfg);
    return cfg;
  }

  PipelineConfig pipeline() const {
    PipelineConfig cfg;
    cfg.scale = scale();
    cfg.estimator = estimator();
    cfg.solver = solver();
    cfg.flow = flow();
    const std::string& r = get("pipeline.restorer");
    if (r == "confidence-fusion") cfg.restorer = RestorerKind::confidence_fusion;
    else if (r == "external") cfg.restorer = RestorerKind::external;
    else throw ConfigError("pipeline.restorer must be confidence-fusion or external, got '" + r + "'");
    cfg.fusion_bandwidth = get_double("pipeline.fusion_bandwidth");
    cfg.external_command = get("pipeline.external_command");
    if (cfg.restorer == RestorerKind::external && cfg.external_command.empty()) {
      throw ConfigError("pipeline.restorer = external requires pipeline.external_command");
    }
    validate(cfg);
    return cfg;
  }

 private:
  static std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
  }

  std::map<std::string, std::string> values_;
};

}  // namespace bvsr
