#pragma once

// Encoder configuration: one table of named fields drives the key=value file
// parser, the command-line flags and the textual dump.

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fbv/bgmodel.hpp"
#include "fbv/fgregion.hpp"
#include "fbv/motion.hpp"
#include "fbv/residual_codec.hpp"

namespace fbv {

struct EncoderConfig {
  double gamma = 0.98;
  double fg_delta = 6.0;   // foreground quantization step
  int level_bits = 1;
  double bg_delta = 2.0;   // template quantization step
  bool perceptual_weights = false;
  GmmParams gmm;
  RegionParams regions;
  MotionSearchParams motion;
  int feather_width = 3;
  int anchor_period = 16;     // every A-th template is coded against mid-gray
  int refresh_exponent = 5;   // foreground predicted from the template alone every 2^e frames
  bool parallel = true;       // run the template path on its own thread

  QualityPoint fg_quality() const { return QualityPoint::from_delta(fg_delta, level_bits, perceptual_weights); }
  QualityPoint bg_quality() const { return QualityPoint::from_delta(bg_delta, level_bits, perceptual_weights); }
};

/// Foreground step for the single-number quality knob: 48 * 2^(-Q/2).
inline double delta_for_quality(double q) {
  if (!(q >= 0.0 && q <= 20.0)) throw ConfigError("quality must be in [0, 20]");
  return 48.0 * std::pow(2.0, -q / 2.0);
}

inline void validate(const EncoderConfig& c) {
  if (!(c.gamma > 0.0 && c.gamma < 1.0)) throw ConfigError("gamma must be in (0, 1)");
  if (std::floor(c.gamma * 10000.0 + 0.5) >= 10000.0) throw ConfigError("gamma rounds to 1 at 1e-4 precision");
  c.fg_quality();
  c.bg_quality();
  GmmState::validate(c.gmm);
  for (int s : {c.regions.majority_size, c.regions.open_size, c.regions.dilate_size})
    if (s < 1 || s > 15 || s % 2 == 0) throw ConfigError("morphology window sizes must be odd and in [1, 15]");
  if (c.regions.min_component < 0) throw ConfigError("minimum component size must be >= 0");
  if (c.regions.grid != 8) throw ConfigError("region grid is fixed at 8");
  if (c.motion.range < 0 || c.motion.range * 2 > kMaxHalfPel) throw ConfigError("motion range must be in [0, 16]");
  if (!(c.motion.full_search_mad >= 0.0)) throw ConfigError("full-search threshold must be >= 0");
  if (c.feather_width < 0 || c.feather_width > 16) throw ConfigError("feather width must be in [0, 16]");
  if (c.anchor_period < 0) throw ConfigError("anchor period must be >= 0");
  if (c.refresh_exponent < 0 || c.refresh_exponent > 15) throw ConfigError("refresh exponent must be in [0, 15]");
}

namespace config_detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  }
}

inline int to_int(const std::string& key, const std::string& v) {
  int out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw ConfigError(key + ": expected an integer, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + v + "'");
}

inline std::string fmt(double d) {
  std::ostringstream os;
  os.precision(17);
  os << d;
  return os.str();
}

}  // namespace config_detail

struct ConfigField {
  std::string key;
  std::string help;
  std::function<void(EncoderConfig&, const std::string&)> set;
  std::function<std::string(const EncoderConfig&)> get;
};

inline const std::vector<ConfigField>& config_fields() {
  using namespace config_detail;
  static const std::vector<ConfigField> fields = [] {
    std::vector<ConfigField> f;
    auto dbl = [&f](std::string key, std::string help, double EncoderConfig::*member) {
      f.push_back({key, std::move(help), [member, key](EncoderConfig& c, const std::string& v) { c.*member = to_double(key, v); },
                   [member](const EncoderConfig& c) { return fmt(c.*member); }});
    };
    auto num = [&f](std::string key, std::string help, auto getter) {
      using T = std::remove_reference_t<decltype(getter(std::declval<EncoderConfig&>()))>;
      f.push_back({key, std::move(help),
                   [getter, key](EncoderConfig& c, const std::string& v) {
                     if constexpr (std::is_same_v<T, bool>) getter(c) = to_bool(key, v);
                     else if constexpr (std::is_integral_v<T>) getter(c) = to_int(key, v);
                     else getter(c) = to_double(key, v);
                   },
                   [getter](const EncoderConfig& c) {
                     auto& mc = const_cast<EncoderConfig&>(c);
                     if constexpr (std::is_same_v<T, bool>) return std::string(getter(mc) ? "true" : "false");
                     else if constexpr (std::is_integral_v<T>) return std::to_string(getter(mc));
                     else return fmt(getter(mc));
                   }});
    };
    dbl("gamma", "template update threshold on MS-SSIM", &EncoderConfig::gamma);
    f.push_back({"quality", "quality knob Q in [0, 20]; sets fg_delta = 48 * 2^(-Q/2)",
                 [](EncoderConfig& c, const std::string& v) { c.fg_delta = delta_for_quality(to_double("quality", v)); },
                 [](const EncoderConfig& c) { return fmt(-2.0 * std::log2(c.fg_delta / 48.0)); }});
    dbl("fg_delta", "foreground quantization step", &EncoderConfig::fg_delta);
    dbl("bg_delta", "background template quantization step", &EncoderConfig::bg_delta);
    num("level_bits", "center quantizer level bits L", [](EncoderConfig& c) -> int& { return c.level_bits; });
    num("perceptual_weights", "JPEG-style band weights", [](EncoderConfig& c) -> bool& { return c.perceptual_weights; });
    num("gmm_components", "mixture components per pixel", [](EncoderConfig& c) -> int& { return c.gmm.components; });
    num("gmm_learning_rate", "mixture learning rate", [](EncoderConfig& c) -> double& { return c.gmm.learning_rate; });
    num("gmm_initial_variance", "variance of new components", [](EncoderConfig& c) -> double& { return c.gmm.initial_variance; });
    num("gmm_variance_threshold", "match gate in variances", [](EncoderConfig& c) -> double& { return c.gmm.variance_threshold; });
    num("gmm_variance_floor", "minimum component variance", [](EncoderConfig& c) -> double& { return c.gmm.variance_floor; });
    num("gmm_background_ratio", "cumulative weight treated as background", [](EncoderConfig& c) -> double& { return c.gmm.background_ratio; });
    num("gmm_init_frames", "frames used to train the mixture", [](EncoderConfig& c) -> int& { return c.gmm.init_frames; });
    num("morph_majority", "isolated-point filter window", [](EncoderConfig& c) -> int& { return c.regions.majority_size; });
    num("morph_open", "opening window", [](EncoderConfig& c) -> int& { return c.regions.open_size; });
    num("morph_dilate", "dilation window", [](EncoderConfig& c) -> int& { return c.regions.dilate_size; });
    num("min_component", "smallest kept component in pixels", [](EncoderConfig& c) -> int& { return c.regions.min_component; });
    num("motion_range", "block search range in pixels", [](EncoderConfig& c) -> int& { return c.motion.range; });
    num("motion_half_pel", "half-pel refinement", [](EncoderConfig& c) -> bool& { return c.motion.half_pel; });
    num("motion_full_search_mad", "per-pixel SAD that triggers exhaustive search", [](EncoderConfig& c) -> double& { return c.motion.full_search_mad; });
    num("feather_width", "boundary feather width d", [](EncoderConfig& c) -> int& { return c.feather_width; });
    num("anchor_period", "anchor-template period A (0 = only the first)", [](EncoderConfig& c) -> int& { return c.anchor_period; });
    num("refresh_exponent", "foreground refresh every 2^e frames (0 = off)", [](EncoderConfig& c) -> int& { return c.refresh_exponent; });
    num("parallel", "run foreground and background paths concurrently", [](EncoderConfig& c) -> bool& { return c.parallel; });
    return f;
  }();
  return fields;
}

inline void set_config_value(EncoderConfig& c, const std::string& key, const std::string& value) {
  for (const auto& f : config_fields())
    if (f.key == key) {
      f.set(c, config_detail::trim(value));
      return;
    }
  throw ConfigError("unknown configuration key '" + key + "'");
}

/// Flat key=value text; '#' starts a comment.
inline void parse_config_text(EncoderConfig& c, const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = config_detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    set_config_value(c, config_detail::trim(line.substr(0, eq)), line.substr(eq + 1));
  }
}

inline EncoderConfig load_config_file(const std::string& path, EncoderConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  parse_config_text(base, ss.str());
  return base;
}

inline std::string config_to_text(const EncoderConfig& c) {
  std::string out;
  for (const auto& f : config_fields()) out += f.key + " = " + f.get(c) + "\n";
  return out;
}

}  // namespace fbv
