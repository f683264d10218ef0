#pragma once

// Per-pixel adaptive Gaussian mixture background model.
//
// Each pixel keeps K components (weight, Y'CbCr mean, isotropic variance)
// sorted by weight / sigma. A sample matches the first component whose
// squared distance summed over channels is within 3 * threshold * variance.
// Matching components ranked inside the background prefix (cumulative weight
// exceeding the background ratio) mark the pixel as background.
//
// Learning rate is annealed as max(alpha, 1/n) over the first updates; the
// matched component adapts its mean and variance at rate alpha / weight.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fbv/core.hpp"

namespace fbv {

struct GmmParams {
  int components = 4;
  double learning_rate = 0.005;
  double initial_variance = 15.0;
  double variance_threshold = 16.0;  // squared-Mahalanobis match gate
  double variance_floor = 4.0;
  double background_ratio = 0.75;
  int init_frames = 200;

  friend bool operator==(const GmmParams&, const GmmParams&) = default;
};

struct SeparationResult {
  Frame background;  // b_t
  Mask points;       // p_t, raw foreground points
};

class GmmState {
 public:
  struct Gaussian {
    double weight = 0.0;
    double mean[kChannels] = {0.0, 0.0, 0.0};
    double variance = 0.0;
  };

  GmmState() = default;

  /// Seeds the model from a single frame (one component per pixel, weight 1).
  GmmState(const Frame& first, const GmmParams& params) : params_(params), width_(first.width()), height_(first.height()) {
    validate(params);
    const int k = params.components;
    mix_.assign(static_cast<std::size_t>(width_) * height_ * k, Gaussian{});
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x) {
        Gaussian* g = pixel(x, y);
        for (int j = 0; j < k; ++j) g[j].variance = params.initial_variance;
        g[0].weight = 1.0;
        for (int c = 0; c < kChannels; ++c) g[0].mean[c] = first.at(c, x, y);
      }
    updates_ = 1;
  }

  const GmmParams& params() const { return params_; }
  int width() const { return width_; }
  int height() const { return height_; }
  long updates() const { return updates_; }

  std::span<const Gaussian> components(int x, int y) const {
    return {pixel(x, y), static_cast<std::size_t>(params_.components)};
  }

  /// Learning rate that the next update will use.
  double next_learning_rate() const {
    return std::max(params_.learning_rate, 1.0 / static_cast<double>(updates_ + 1));
  }

  /// Classifies `frame` against the current model, then adapts the model.
  SeparationResult update(const Frame& frame) {
    if (frame.width() != width_ || frame.height() != height_)
      throw std::invalid_argument("gmm_update: frame size mismatch");
    const double alpha = next_learning_rate();
    ++updates_;
    SeparationResult out{Frame(width_, height_, 0, frame.frame_index()), Mask(width_, height_)};
    const int k = params_.components;
    const double gate = 3.0 * params_.variance_threshold;
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x) {
        Gaussian* g = pixel(x, y);
        const double px[kChannels] = {static_cast<double>(frame.at(0, x, y)), static_cast<double>(frame.at(1, x, y)),
                                      static_cast<double>(frame.at(2, x, y))};

        int background_count = k;
        double cum = 0.0;
        for (int j = 0; j < k; ++j) {
          cum += g[j].weight;
          if (cum > params_.background_ratio) {
            background_count = j + 1;
            break;
          }
        }

        int match = -1;
        double match_d2 = 0.0;
        for (int j = 0; j < k; ++j) {
          if (g[j].weight <= 0.0) continue;
          double d2 = 0.0;
          for (int c = 0; c < kChannels; ++c) {
            const double d = px[c] - g[j].mean[c];
            d2 += d * d;
          }
          if (d2 <= gate * g[j].variance) {
            match = j;
            match_d2 = d2;
            break;
          }
        }
        out.points.set(x, y, !(match >= 0 && match < background_count));

        for (int j = 0; j < k; ++j) g[j].weight *= (1.0 - alpha);
        if (match >= 0) {
          Gaussian& m = g[match];
          m.weight += alpha;
          const double rho = std::min(1.0, alpha / m.weight);
          for (int c = 0; c < kChannels; ++c) m.mean[c] += rho * (px[c] - m.mean[c]);
          m.variance += rho * (match_d2 / kChannels - m.variance);
          m.variance = std::max(m.variance, params_.variance_floor);
        } else {
          Gaussian& m = g[k - 1];
          m.weight = alpha;
          for (int c = 0; c < kChannels; ++c) m.mean[c] = px[c];
          m.variance = params_.initial_variance;
        }
        double total = 0.0;
        for (int j = 0; j < k; ++j) total += g[j].weight;
        for (int j = 0; j < k; ++j) g[j].weight /= total;

        // Stable insertion sort by weight / sigma, descending.
        for (int j = 1; j < k; ++j) {
          Gaussian cur = g[j];
          const double key = cur.weight / std::sqrt(cur.variance);
          int i = j - 1;
          while (i >= 0 && g[i].weight / std::sqrt(g[i].variance) < key) {
            g[i + 1] = g[i];
            --i;
          }
          g[i + 1] = cur;
        }

        for (int c = 0; c < kChannels; ++c)
          out.background.at(c, x, y) = clamp_u8(static_cast<int>(std::floor(g[0].mean[c] + 0.5)));
      }
    return out;
  }

  /// Most probable component means, rounded.
  Frame background() const {
    Frame out(width_, height_);
    for (int y = 0; y < height_; ++y)
      for (int x = 0; x < width_; ++x)
        for (int c = 0; c < kChannels; ++c)
          out.at(c, x, y) = clamp_u8(static_cast<int>(std::floor(pixel(x, y)[0].mean[c] + 0.5)));
    return out;
  }

  // Opaque snapshot: "GMMS", u32 version, params, dims, update count, raw mixtures.
  std::vector<std::uint8_t> snapshot() const {
    std::vector<std::uint8_t> out;
    auto put = [&out](const void* p, std::size_t n) {
      const auto* b = static_cast<const std::uint8_t*>(p);
      out.insert(out.end(), b, b + n);
    };
    put("GMMS", 4);
    const std::uint32_t version = kSnapshotVersion;
    put(&version, 4);
    put(&params_, sizeof(params_));
    put(&width_, sizeof(width_));
    put(&height_, sizeof(height_));
    put(&updates_, sizeof(updates_));
    put(mix_.data(), mix_.size() * sizeof(Gaussian));
    return out;
  }

  static GmmState from_snapshot(std::span<const std::uint8_t> bytes) {
    GmmState s;
    std::size_t pos = 0;
    auto get = [&](void* p, std::size_t n) {
      if (pos + n > bytes.size()) throw FormatError("GMM snapshot truncated");
      std::memcpy(p, bytes.data() + pos, n);
      pos += n;
    };
    char magic[4];
    get(magic, 4);
    if (std::memcmp(magic, "GMMS", 4) != 0) throw FormatError("GMM snapshot: bad magic");
    std::uint32_t version = 0;
    get(&version, 4);
    if (version != kSnapshotVersion) throw FormatError("GMM snapshot: unsupported version");
    get(&s.params_, sizeof(s.params_));
    get(&s.width_, sizeof(s.width_));
    get(&s.height_, sizeof(s.height_));
    get(&s.updates_, sizeof(s.updates_));
    validate(s.params_);
    s.mix_.resize(static_cast<std::size_t>(s.width_) * s.height_ * s.params_.components);
    get(s.mix_.data(), s.mix_.size() * sizeof(Gaussian));
    if (pos != bytes.size()) throw FormatError("GMM snapshot: trailing bytes");
    return s;
  }

  static void validate(const GmmParams& p) {
    if (p.components < 1 || p.components > 8) throw ConfigError("GMM components must be in [1, 8]");
    if (!(p.learning_rate > 0.0 && p.learning_rate <= 1.0)) throw ConfigError("GMM learning rate must be in (0, 1]");
    if (!(p.variance_floor > 0.0)) throw ConfigError("GMM variance floor must be positive");
    if (!(p.initial_variance >= p.variance_floor)) throw ConfigError("GMM initial variance below floor");
    if (!(p.variance_threshold > 0.0)) throw ConfigError("GMM variance threshold must be positive");
    if (!(p.background_ratio > 0.0 && p.background_ratio < 1.0)) throw ConfigError("GMM background ratio must be in (0, 1)");
    if (p.init_frames < 1) throw ConfigError("GMM init frames must be >= 1");
  }

  friend bool operator==(const GmmState& a, const GmmState& b) {
    return a.snapshot() == b.snapshot();
  }

 private:
  static constexpr std::uint32_t kSnapshotVersion = 1;

  Gaussian* pixel(int x, int y) {
    return mix_.data() + (static_cast<std::size_t>(y) * width_ + x) * params_.components;
  }
  const Gaussian* pixel(int x, int y) const {
    return mix_.data() + (static_cast<std::size_t>(y) * width_ + x) * params_.components;
  }

  GmmParams params_;
  int width_ = 0;
  int height_ = 0;
  long updates_ = 0;
  std::vector<Gaussian> mix_;
};

/// Trains the model on exactly params.init_frames frames by running the online
/// update recurrence over them.
inline GmmState gmm_init(std::span<const Frame> training, const GmmParams& params = {}) {
  GmmState::validate(params);
  if (training.size() != static_cast<std::size_t>(params.init_frames))
    throw ConfigError("gmm_init needs exactly " + std::to_string(params.init_frames) + " frames, got " +
                      std::to_string(training.size()));
  for (const auto& f : training)
    if (!f.same_shape(training.front())) throw ConfigError("gmm_init: frame size mismatch");
  GmmState state(training.front(), params);
  for (std::size_t i = 1; i < training.size(); ++i) state.update(training[i]);
  return state;
}

inline std::pair<GmmState, SeparationResult> gmm_update(GmmState state, const Frame& frame) {
  auto result = state.update(frame);
  return {std::move(state), std::move(result)};
}

}  // namespace fbv
