#pragma once

// Synthetic scenes shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "fbv.hpp"

namespace fbv::fixtures {

/// Band-limited random texture: sum of a few random sinusoids (spatial
/// frequencies up to `max_freq` rad/pixel) plus fine noise of relative
/// amplitude `grain`.
inline Plane texture(int w, int h, std::uint32_t seed, int lo = 30, int hi = 220, double grain = 0.1,
                     double max_freq = 0.45) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  struct Wave { double fx, fy, phase, amp; };
  std::vector<Wave> waves;
  const double span = max_freq - 0.05;
  for (int i = 0; i < 6; ++i)
    waves.push_back({0.05 + span * u(rng), 0.05 + span * u(rng), 6.28 * u(rng), 0.5 + u(rng)});
  double total = 0.0;
  for (const auto& wv : waves) total += wv.amp;
  Plane p(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double v = 0.0;
      for (const auto& wv : waves) v += wv.amp * std::sin(wv.fx * x + wv.fy * y + wv.phase);
      v = 0.5 + 0.4 * v / total + grain * (u(rng) - 0.5);
      p.at(x, y) = clamp_u8(static_cast<int>(lo + (hi - lo) * v));
    }
  return p;
}

inline Frame textured_frame(int w, int h, std::uint32_t seed, double grain = 0.1) {
  Frame f(w, h);
  f.plane(0) = texture(w, h, seed, 30, 220, grain);
  f.plane(1) = texture(w, h, seed + 101, 110, 146, grain);
  f.plane(2) = texture(w, h, seed + 202, 110, 146, grain);
  return f;
}

/// Low-frequency, noise-free scene (a plain wall or road surface).
inline Frame smooth_frame(int w, int h, std::uint32_t seed) {
  Frame f(w, h);
  f.plane(0) = texture(w, h, seed, 30, 220, 0.0, 0.12);
  f.plane(1) = texture(w, h, seed + 101, 110, 146, 0.0, 0.12);
  f.plane(2) = texture(w, h, seed + 202, 110, 146, 0.0, 0.12);
  return f;
}

inline Frame random_frame(int w, int h, std::mt19937& rng) {
  Frame f(w, h);
  std::uniform_int_distribution<int> d(0, 255);
  for (int c = 0; c < kChannels; ++c)
    for (auto& s : f.plane(c).samples()) s = static_cast<std::uint8_t>(d(rng));
  return f;
}

/// Copies `patch` (a frame used as a sprite) into `dst` at (x0, y0), clipped.
inline void blit(Frame& dst, const Frame& sprite, int sw, int sh, int x0, int y0) {
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < sh; ++y)
      for (int x = 0; x < sw; ++x) {
        const int dx = x0 + x, dy = y0 + y;
        if (dx >= 0 && dy >= 0 && dx < dst.width() && dy < dst.height()) dst.at(c, dx, dy) = sprite.at(c, x, y);
      }
}

inline VideoSequence static_sequence(int w, int h, int n, std::uint32_t seed = 7, bool smooth = false) {
  VideoSequence s;
  const Frame bg = smooth ? smooth_frame(w, h, seed) : textured_frame(w, h, seed);
  for (int t = 0; t < n; ++t) {
    s.frames.push_back(bg);
    s.frames.back().set_frame_index(t);
  }
  return s;
}

struct SquareMotion {
  int size = 16;
  int x0 = 8, y0 = 8;
  int vx = 2, vy = 1;
  int start = 0;           // first frame showing the object
  int end = 1 << 30;       // one past the last frame showing it
};

/// Position of a bouncing object at frame t.
inline std::pair<int, int> square_position(const SquareMotion& m, int w, int h, int t) {
  auto bounce = [](int p0, int v, int t, int span) {
    if (span <= 0) return 0;
    long p = p0 + static_cast<long>(v) * t;
    const long period = 2L * span;
    p %= period;
    if (p < 0) p += period;
    return static_cast<int>(p <= span ? p : period - p);
  };
  return {bounce(m.x0, m.vx, t, w - m.size), bounce(m.y0, m.vy, t, h - m.size)};
}

inline VideoSequence moving_objects(int w, int h, int n, const std::vector<SquareMotion>& objs,
                                    double drift_per_frame = 0.0, std::uint32_t seed = 11) {
  VideoSequence s;
  const Frame bg = textured_frame(w, h, seed);
  std::vector<Frame> sprites;
  for (std::size_t i = 0; i < objs.size(); ++i) sprites.push_back(textured_frame(16, 16, seed + 1000 + static_cast<std::uint32_t>(i)));
  for (int t = 0; t < n; ++t) {
    Frame f = bg;
    if (drift_per_frame != 0.0) {
      const int shift = static_cast<int>(std::lround(drift_per_frame * t));
      for (auto& v : f.plane(0).samples()) v = clamp_u8(v + shift);
    }
    for (std::size_t i = 0; i < objs.size(); ++i) {
      const auto& o = objs[i];
      if (t < o.start || t >= o.end) continue;
      Frame sprite = sprites[i];
      const auto [px, py] = square_position(o, w, h, t);
      // Sprites larger than 16 are tiled from the 16x16 texture.
      Frame big(std::max(16, o.size), std::max(16, o.size));
      for (int c = 0; c < kChannels; ++c)
        for (int y = 0; y < o.size; ++y)
          for (int x = 0; x < o.size; ++x) big.at(c, x, y) = sprite.at(c, x % 16, y % 16);
      blit(f, big, o.size, o.size, px, py);
    }
    f.set_frame_index(t);
    s.frames.push_back(std::move(f));
  }
  return s;
}

inline VideoSequence moving_square(int w, int h, int n, std::uint32_t seed = 11) {
  return moving_objects(w, h, n, {SquareMotion{}}, 0.0, seed);
}

// Current frame whose content is `prev` moved by (dx, dy) pels.
inline Frame translated(const Frame& prev, int dx, int dy) {
  Frame out(prev.width(), prev.height());
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < prev.height(); ++y)
      for (int x = 0; x < prev.width(); ++x) out.at(c, x, y) = prev.plane(c).clamped(x - dx, y - dy);
  return out;
}

/// Structurally valid stream with random records and opaque payload bytes.
inline FbvStream random_stream(std::mt19937& rng) {
  FbvStream s;
  const std::uint32_t n = 1 + rng() % 60;
  s.header.width = static_cast<std::uint16_t>(16 + 8 * (rng() % 6));
  s.header.height = static_cast<std::uint16_t>(16 + 8 * (rng() % 6));
  s.header.frame_count = n;
  s.header.level_bits = static_cast<std::uint8_t>(1 + rng() % 8);
  s.header.delta_q = static_cast<std::uint16_t>(1 + rng() % 60000);
  s.header.gamma_q = static_cast<std::uint16_t>(1 + rng() % 9999);
  s.header.flags = make_header_flags(rng() % 2, static_cast<int>(rng() % 16));
  for (std::uint32_t t = 0; t < n; ++t) {
    if (t == 0 || rng() % 5 == 0) {
      TemplateRecord r{t, std::vector<std::uint8_t>(rng() % 20)};
      for (auto& b : r.payload) b = static_cast<std::uint8_t>(rng());
      s.templates.push_back(std::move(r));
    }
    if (rng() % 2) {
      ForegroundRecord f;
      f.frame_no = t;
      const int cols = s.header.width / 8, rows = s.header.height / 8;
      // Disjoint 8x8 cells on a random subset of the grid.
      for (int cy = 0; cy < rows; ++cy)
        for (int cx = 0; cx < cols; ++cx)
          if (rng() % 7 == 0) f.regions.push_back({8 * cx, 8 * cy, 8, 8});
      if (f.regions.empty()) f.regions.push_back({0, 0, 8, 8});
      f.flow.resize(rng() % 10, 0x55);
      f.residual.resize(rng() % 40, 0xAA);
      s.foregrounds.push_back(std::move(f));
    }
  }
  return s;
}

/// Encoder settings for short fixtures: the mixture trains on a short prefix
/// and learns fast enough to settle within it.
inline EncoderConfig short_config(int init_frames = 20) {
  EncoderConfig c;
  c.gmm.init_frames = init_frames;
  return c;
}

}  // namespace fbv::fixtures
