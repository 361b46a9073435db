#pragma once

// Run configuration for the command-line tools and the named ablation
// presets used by sweeps.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "vfunnel/error.hpp"
#include "vfunnel/portfolio.hpp"

namespace vfunnel {

enum class Mode { Funnel, TopK, Static };

struct RunMode {
  Mode kind = Mode::Funnel;
  std::size_t topk = 3;

  std::string label() const {
    switch (kind) {
    case Mode::Funnel:
      return "funnel";
    case Mode::Static:
      return "static";
    case Mode::TopK:
      return "topk:" + std::to_string(topk);
    }
    return "funnel";
  }

  friend bool operator==(const RunMode &, const RunMode &) = default;
};

inline RunMode parse_mode(std::string_view text) {
  if (text == "funnel") {
    return {Mode::Funnel, 3};
  }
  if (text == "static") {
    return {Mode::Static, 3};
  }
  if (text.starts_with("topk:")) {
    const std::string n(text.substr(5));
    std::size_t used = 0;
    long long value = 0;
    try {
      value = std::stoll(n, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used == 0 || used != n.size() || value < 1) {
      throw InvalidInput("mode: topk needs a positive count, got '" + std::string(text) + "'");
    }
    return {Mode::TopK, static_cast<std::size_t>(value)};
  }
  throw InvalidInput("mode: expected funnel, static or topk:N, got '" + std::string(text) + "'");
}

/// Per-level (beta, gamma) overrides keyed by level number >= 1.
struct LevelOverrides {
  std::map<std::size_t, double> beta;
  std::map<std::size_t, double> gamma;
};

/// Builds a ScaleConfig for `levels`, taking published defaults where a
/// level has one and the overrides otherwise.
inline ScaleConfig resolve_scale(std::int64_t resolution, std::size_t levels,
                                 const LevelOverrides &ov) {
  for (const auto *m : {&ov.beta, &ov.gamma}) {
    for (const auto &[k, v] : *m) {
      if (k < 1 || k >= levels) {
        throw InvalidInput("level override " + std::to_string(k) + " outside [1, " +
                           std::to_string(levels) + ")");
      }
    }
  }
  ScaleConfig cfg;
  cfg.input_resolution = resolution;
  cfg.levels = levels;
  for (std::size_t k = 1; k < levels; ++k) {
    const auto b = ov.beta.find(k);
    const auto g = ov.gamma.find(k);
    const bool both = b != ov.beta.end() && g != ov.gamma.end();
    LevelParams p;
    if (k < ScaleConfig::kMaxDefaultLevels) {
      p = ScaleConfig::default_level(k);
    } else if (!both) {
      throw InvalidInput("level " + std::to_string(k) +
                         " has no default expansion parameters; set both beta and gamma");
    }
    if (b != ov.beta.end()) {
      p.beta = b->second;
    }
    if (g != ov.gamma.end()) {
      p.gamma = g->second;
    }
    if (both) {
      p.extrapolated = false;
    }
    cfg.params.push_back(p);
  }
  cfg.validate();
  return cfg;
}

struct RunConfig {
  std::int64_t resolution = 336;
  std::size_t levels = 3;
  LevelOverrides overrides;
  RunMode mode;
  std::optional<double> window_side;
  double max_iou = 0.0;
  std::filesystem::path out;
  bool overlay = false;
  int precision = 9;

  /// Scale configuration after applying the mode (static zeroes every gamma).
  ScaleConfig scale() const {
    ScaleConfig cfg = resolve_scale(resolution, levels, overrides);
    if (mode.kind == Mode::Static) {
      for (auto &p : cfg.params) {
        p.gamma = 0.0;
      }
    }
    return cfg;
  }

  double topk_window() const {
    return window_side ? *window_side : static_cast<double>(resolution);
  }

  void validate() const {
    if (precision < 0 || precision > 17) {
      throw InvalidInput("precision must lie in [0, 17]");
    }
    if (window_side && !(*window_side > 0.0)) {
      throw InvalidInput("window_side must be positive");
    }
    if (!(max_iou >= 0.0 && max_iou < 1.0)) {
      throw InvalidInput("max_iou must lie in [0, 1)");
    }
    (void)scale();
  }
};

namespace detail {

inline std::size_t parse_level_key(const std::string &key) {
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(key, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != key.size()) {
    throw InvalidInput("level key '" + key + "' is not a level number");
  }
  return static_cast<std::size_t>(v);
}

} // namespace detail

/// Parses "K=V" as a level override.
inline std::pair<std::size_t, double> parse_level_assignment(std::string_view text) {
  const auto eq = text.find('=');
  if (eq == std::string_view::npos) {
    throw InvalidInput("expected LEVEL=VALUE, got '" + std::string(text) + "'");
  }
  const std::size_t level = detail::parse_level_key(std::string(text.substr(0, eq)));
  const std::string rhs(text.substr(eq + 1));
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(rhs, &used);
  } catch (const std::exception &) {
    used = 0;
  }
  if (used == 0 || used != rhs.size()) {
    throw InvalidInput("expected a number after '=', got '" + rhs + "'");
  }
  return {level, value};
}

/// Reads a JSON config file into `cfg`. Keys mirror RunConfig:
/// resolution, levels, beta {"1": v, ...}, gamma, mode, window_side,
/// max_iou, out, overlay, precision.
inline void apply_config_json(RunConfig &cfg, const nlohmann::json &j) {
  if (!j.is_object()) {
    throw InvalidInput("config: expected a JSON object");
  }
  try {
    for (const auto &[key, value] : j.items()) {
      if (key == "resolution") {
        cfg.resolution = value.get<std::int64_t>();
      } else if (key == "levels") {
        cfg.levels = value.get<std::size_t>();
      } else if (key == "beta" || key == "gamma") {
        auto &dst = key == "beta" ? cfg.overrides.beta : cfg.overrides.gamma;
        for (const auto &[lvl, v] : value.items()) {
          dst[detail::parse_level_key(lvl)] = v.get<double>();
        }
      } else if (key == "mode") {
        cfg.mode = parse_mode(value.get<std::string>());
      } else if (key == "window_side") {
        cfg.window_side = value.get<double>();
      } else if (key == "max_iou") {
        cfg.max_iou = value.get<double>();
      } else if (key == "out") {
        cfg.out = value.get<std::string>();
      } else if (key == "overlay") {
        cfg.overlay = value.get<bool>();
      } else if (key == "precision") {
        cfg.precision = value.get<int>();
      } else {
        throw InvalidInput("config: unknown key '" + key + "'");
      }
    }
  } catch (const nlohmann::json::exception &e) {
    throw InvalidInput(std::string("config: ") + e.what());
  }
}

inline void load_config_file(RunConfig &cfg, const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidInput("cannot open config file " + path.string());
  }
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error &e) {
    throw InvalidInput("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  apply_config_json(cfg, j);
}

/// Named ablation configurations accepted by sweeps.
inline const std::vector<std::string> &sweep_labels() {
  static const std::vector<std::string> labels = {
      "static", "weak", "default", "strong", "beta-0.2", "beta+0.2",
      "k0",     "k1",   "k2",      "k3",     "k4"};
  return labels;
}

/// Resolves a sweep label to a scale configuration at input resolution `s`.
/// Besides the named presets, "custom:K:b1:g1:b2:g2:..." gives explicit
/// (beta, gamma) pairs for every context level.
inline ScaleConfig sweep_preset(std::string_view label, std::int64_t s) {
  auto with_gammas = [s](double g1, double g2) {
    ScaleConfig cfg = ScaleConfig::defaults(3, s);
    cfg.params[0].gamma = g1;
    cfg.params[1].gamma = g2;
    return cfg;
  };
  auto with_betas = [s](double b1, double b2) {
    ScaleConfig cfg = ScaleConfig::defaults(3, s);
    cfg.params[0].beta = b1;
    cfg.params[1].beta = b2;
    return cfg;
  };
  if (label == "static") {
    return with_gammas(0.0, 0.0);
  }
  if (label == "weak") {
    return with_gammas(0.3, 0.6);
  }
  if (label == "default") {
    return ScaleConfig::defaults(3, s);
  }
  if (label == "strong") {
    return with_gammas(0.9, 1.8);
  }
  if (label == "beta-0.2" || label == "beta−0.2") {
    return with_betas(1.0, 1.4);
  }
  if (label == "beta+0.2") {
    return with_betas(1.4, 1.8);
  }
  if (label.size() == 2 && label[0] == 'k' && label[1] >= '0' && label[1] <= '4') {
    return ScaleConfig::defaults(static_cast<std::size_t>(label[1] - '0'), s);
  }
  if (label.starts_with("custom:")) {
    std::vector<std::string> parts;
    std::stringstream ss{std::string(label.substr(7))};
    for (std::string part; std::getline(ss, part, ':');) {
      parts.push_back(part);
    }
    try {
      if (parts.empty()) {
        throw InvalidInput("missing level count");
      }
      std::size_t used = 0;
      const long long levels = std::stoll(parts[0], &used);
      if (used != parts[0].size() || levels < 0) {
        throw InvalidInput("bad level count");
      }
      const std::size_t pairs = levels > 0 ? static_cast<std::size_t>(levels) - 1 : 0;
      if (parts.size() != 1 + 2 * pairs) {
        throw InvalidInput("expected " + std::to_string(pairs) + " beta:gamma pairs");
      }
      ScaleConfig cfg;
      cfg.input_resolution = s;
      cfg.levels = static_cast<std::size_t>(levels);
      for (std::size_t k = 0; k < pairs; ++k) {
        cfg.params.push_back({std::stod(parts[1 + 2 * k]), std::stod(parts[2 + 2 * k]), false});
      }
      cfg.validate();
      return cfg;
    } catch (const std::logic_error &e) {
      throw InvalidInput("sweep label '" + std::string(label) +
                         "': " + e.what() + " (form custom:K:b1:g1:...)");
    }
  }
  std::string valid;
  for (const auto &l : sweep_labels()) {
    valid += (valid.empty() ? "" : ", ") + l;
  }
  throw InvalidInput("unknown sweep label '" + std::string(label) + "'; valid labels: " + valid +
                     ", custom:K:b1:g1:...");
}

} // namespace vfunnel
