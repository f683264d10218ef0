#pragma once

// Residual plane coding: 8x8 fixed-point DCT, center quantization, zig-zag
// scan and context-adaptive binarization.
//
// Bitstream (normative), one range-coder stream per plane. Blocks are visited
// region by region, block rows top to bottom, block columns left to right, and
// channels Y, Cb, Cr inside each block position. Per block:
//
//   cbf                 ctx cbf[n]      n = coded left + coded above neighbour
//                                       (same channel, same region)
//   for scan pos i while cbf:
//     sig               ctx sig[band(i)][s]   s = sig(i-1) + sig(i-2)
//     if sig:
//       last            ctx last[band(i)]
//       gt_k, k=1..U    ctx gt[min(k-1,3)][i>0]   (level > k), stop on 0
//       escape          Exp-Golomb-0 bypass of (level - U - 1) when level > U
//       sign            bypass, 1 = negative
//       stop after last
//
// U = 2^L (L = level bits of the quality point). Every context group is
// replicated per plane kind (foreground / template) and channel class
// (luma / chroma).

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "fbv/core.hpp"
#include "fbv/entropy.hpp"
#include "fbv/quantizer.hpp"
#include "fbv/transform.hpp"

namespace fbv {

enum class PlaneKind : int { kForeground = 0, kTemplate = 1 };

/// Rate/quality knob: step size (fixed point x256) and level bits.
struct QualityPoint {
  std::uint16_t delta_q = 8 * 256;
  int level_bits = 1;
  bool perceptual_weights = false;  // JPEG-style band weights instead of flat

  double delta() const { return delta_q / 256.0; }
  static QualityPoint from_delta(double delta, int level_bits = 1, bool perceptual = false) {
    if (!(delta > 0.0) || delta * 256.0 > 65535.0)
      throw ConfigError("quantization step must be in (0, 255.99]");
    const auto q = static_cast<std::uint16_t>(std::max(1.0, std::floor(delta * 256.0 + 0.5)));
    if (level_bits < 1 || level_bits > 8) throw ConfigError("level bits must be in [1, 8]");
    return {q, level_bits, perceptual};
  }
  friend bool operator==(const QualityPoint&, const QualityPoint&) = default;
};

/// Signed residual samples over a set of 8-aligned regions.
struct ResidualPlane {
  int width = 0;
  int height = 0;
  std::vector<Region> regions;
  std::array<std::vector<std::int16_t>, kChannels> samples;  // full-frame storage

  ResidualPlane() = default;
  ResidualPlane(int w, int h, std::vector<Region> rs) : width(w), height(h), regions(std::move(rs)) {
    for (auto& s : samples) s.assign(static_cast<std::size_t>(w) * h, 0);
  }

  std::int16_t at(int c, int x, int y) const { return samples[c][static_cast<std::size_t>(y) * width + x]; }
  std::int16_t& at(int c, int x, int y) { return samples[c][static_cast<std::size_t>(y) * width + x]; }

  friend bool operator==(const ResidualPlane&, const ResidualPlane&) = default;
};

/// Whole frame as a single region.
inline std::vector<Region> full_frame_regions(int w, int h) { return {Region{0, 0, w, h}}; }

/// Quantized levels, one 64-entry scan-ordered block per (block, channel).
struct QuantizedResidual {
  std::vector<std::array<std::int32_t, 64>> blocks;
  friend bool operator==(const QuantizedResidual&, const QuantizedResidual&) = default;
};

namespace residual_detail {

inline constexpr std::array<int, 64> kJpegLuma = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};
inline constexpr std::array<int, 64> kJpegChroma = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

/// Band weight in 1/16 units for a row-major coefficient index.
inline int band_weight16(const QualityPoint& q, int channel, int rm_index) {
  if (!q.perceptual_weights) return 16;
  return channel == 0 ? kJpegLuma[rm_index] : kJpegChroma[rm_index];
}

inline int band_class(int scan_pos) {
  static constexpr std::array<int, 8> kEdges = {1, 3, 6, 10, 15, 21, 28, 64};
  for (int b = 0; b < 8; ++b)
    if (scan_pos < kEdges[b]) return b;
  return 7;
}

// Context layout.
inline constexpr int kCbfCtx = 3;
inline constexpr int kSigCtx = 8 * 3;
inline constexpr int kLastCtx = 8;
inline constexpr int kGtCtx = 4 * 2;
inline constexpr int kGroupCtx = kCbfCtx + kSigCtx + kLastCtx + kGtCtx;
inline constexpr int kResidualContexts = 4 * kGroupCtx;

struct ContextIndex {
  int base;
  int cbf(int n) const { return base + n; }
  int sig(int band, int s) const { return base + kCbfCtx + band * 3 + s; }
  int last(int band) const { return base + kCbfCtx + kSigCtx + band; }
  int gt(int k, bool ac) const { return base + kCbfCtx + kSigCtx + kLastCtx + std::min(k - 1, 3) * 2 + (ac ? 1 : 0); }
};

inline ContextIndex contexts_for(PlaneKind kind, int channel) {
  return {(static_cast<int>(kind) * 2 + (channel == 0 ? 0 : 1)) * kGroupCtx};
}

inline void check_geometry(const ResidualPlane& r) {
  for (const auto& reg : r.regions) {
    if (!reg.inside(r.width, r.height) || reg.x % 8 || reg.y % 8 || reg.w % 8 || reg.h % 8)
      throw std::invalid_argument("residual regions must be 8-aligned and inside the frame");
  }
}

inline std::size_t block_count(const ResidualPlane& r) {
  std::size_t n = 0;
  for (const auto& reg : r.regions) n += static_cast<std::size_t>(reg.w / 8) * (reg.h / 8);
  return n * kChannels;
}

/// Calls fn(region_index, bx, by, channel, block_index) in coding order.
template <typename Fn>
void for_each_block(const std::vector<Region>& regions, Fn&& fn) {
  std::size_t index = 0;
  for (std::size_t ri = 0; ri < regions.size(); ++ri) {
    const auto& reg = regions[ri];
    for (int by = reg.y; by < reg.bottom(); by += 8)
      for (int bx = reg.x; bx < reg.right(); bx += 8)
        for (int c = 0; c < kChannels; ++c) fn(ri, bx, by, c, index++);
  }
}

}  // namespace residual_detail

/// Transform + quantize. Throws on samples outside [-255, 255].
inline QuantizedResidual quantize_residual(const ResidualPlane& r, const QualityPoint& q) {
  using namespace residual_detail;
  check_geometry(r);
  const CenterSet centers(q.level_bits);
  QuantizedResidual out;
  out.blocks.resize(block_count(r));
  for_each_block(r.regions, [&](std::size_t, int bx, int by, int c, std::size_t index) {
    Block8 blk{};
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) {
        const int v = r.at(c, bx + x, by + y);
        if (v < -255 || v > 255) throw std::out_of_range("residual sample outside [-255, 255]");
        blk[y * 8 + x] = v;
      }
    const Block8 coef = forward_dct8(blk);
    auto& levels = out.blocks[index];
    for (int i = 0; i < 64; ++i) {
      const int rm = kZigZag8[i];
      const std::int64_t step256 = static_cast<std::int64_t>(q.delta_q) * band_weight16(q, c, rm);
      // step in coefficient units is kDctGain * delta * (w16 / 16) == step256 / 256
      const double mag = static_cast<double>(std::abs(coef[rm])) * 256.0 / static_cast<double>(step256);
      const long level = quantize_magnitude(mag, centers);
      levels[i] = static_cast<std::int32_t>(coef[rm] < 0 ? -level : level);
    }
  });
  return out;
}

/// Dequantize + inverse transform into a residual plane with the given geometry.
inline ResidualPlane reconstruct_residual(const QuantizedResidual& levels, int width, int height,
                                          const std::vector<Region>& regions, const QualityPoint& q) {
  using namespace residual_detail;
  ResidualPlane out(width, height, regions);
  check_geometry(out);
  if (levels.blocks.size() != block_count(out)) throw FormatError("residual block count mismatch");
  for_each_block(regions, [&](std::size_t, int bx, int by, int c, std::size_t index) {
    const auto& lv = levels.blocks[index];
    Block8 coef{};
    bool any = false;
    for (int i = 0; i < 64; ++i) {
      if (lv[i] == 0) continue;
      any = true;
      const int rm = kZigZag8[i];
      const std::int64_t step256 = static_cast<std::int64_t>(q.delta_q) * band_weight16(q, c, rm);
      const std::int64_t mag = (static_cast<std::int64_t>(std::abs(lv[i])) * step256 + 128) >> 8;
      const std::int64_t v = std::min<std::int64_t>(mag, 32767);
      coef[rm] = static_cast<std::int32_t>(lv[i] < 0 ? -v : v);
    }
    if (!any) return;
    const Block8 res = inverse_dct8(coef);
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x)
        out.at(c, bx + x, by + y) = static_cast<std::int16_t>(std::clamp(res[y * 8 + x], -255, 255));
  });
  return out;
}

/// Entropy-codes quantized levels.
inline std::vector<std::uint8_t> encode_levels(const QuantizedResidual& levels, const std::vector<Region>& regions,
                                               const QualityPoint& q, PlaneKind kind) {
  using namespace residual_detail;
  std::vector<AdaptiveBit> model(kResidualContexts);
  RangeEncoder enc;
  const std::uint32_t cap = 1u << q.level_bits;
  std::vector<std::uint8_t> cbf(levels.blocks.size(), 0);
  std::size_t region_first = 0;
  std::size_t current_region = static_cast<std::size_t>(-1);
  int blocks_per_row = 0;
  for_each_block(regions, [&](std::size_t ri, int bx, int by, int c, std::size_t index) {
    const auto& reg = regions[ri];
    if (ri != current_region) {
      current_region = ri;
      region_first = index;
      blocks_per_row = reg.w / 8;
    }
    const auto ctx = contexts_for(kind, c);
    const auto& lv = levels.blocks[index];
    const std::size_t local = (index - region_first) / kChannels;
    const int col = static_cast<int>(local % blocks_per_row);
    const int row = static_cast<int>(local / blocks_per_row);
    int n = 0;
    if (col > 0) n += cbf[index - kChannels];
    if (row > 0) n += cbf[index - static_cast<std::size_t>(blocks_per_row) * kChannels];
    int last_nz = -1;
    for (int i = 0; i < 64; ++i)
      if (lv[i] != 0) last_nz = i;
    cbf[index] = last_nz >= 0;
    enc.encode(cbf[index], model[ctx.cbf(n)]);
    if (!cbf[index]) return;
    int prev1 = 0, prev2 = 0;
    for (int i = 0; i <= last_nz; ++i) {
      const int band = band_class(i);
      const int sig = lv[i] != 0;
      enc.encode(sig, model[ctx.sig(band, prev1 + prev2)]);
      prev2 = prev1;
      prev1 = sig;
      if (!sig) continue;
      enc.encode(i == last_nz, model[ctx.last(band)]);
      const auto level = static_cast<std::uint32_t>(std::abs(lv[i]));
      std::uint32_t k = 1;
      for (; k <= cap; ++k) {
        const int gt = level > k;
        enc.encode(gt, model[ctx.gt(static_cast<int>(k), i > 0)]);
        if (!gt) break;
      }
      if (k > cap) encode_exp_golomb(enc, level - cap - 1);
      enc.encode_bypass(lv[i] < 0);
    }
  });
  return std::move(enc).finish();
}

inline QuantizedResidual decode_levels(std::span<const std::uint8_t> bytes, const std::vector<Region>& regions,
                                       int width, int height, const QualityPoint& q, PlaneKind kind) {
  using namespace residual_detail;
  ResidualPlane geometry;
  geometry.width = width;
  geometry.height = height;
  geometry.regions = regions;
  check_geometry(geometry);
  QuantizedResidual out;
  out.blocks.resize(block_count(geometry));
  std::vector<AdaptiveBit> model(kResidualContexts);
  RangeDecoder dec(bytes);
  const std::uint32_t cap = 1u << q.level_bits;
  std::vector<std::uint8_t> cbf(out.blocks.size(), 0);
  std::size_t region_first = 0;
  std::size_t current_region = static_cast<std::size_t>(-1);
  int blocks_per_row = 0;
  for_each_block(regions, [&](std::size_t ri, int, int, int c, std::size_t index) {
    const auto& reg = regions[ri];
    if (ri != current_region) {
      current_region = ri;
      region_first = index;
      blocks_per_row = reg.w / 8;
    }
    const auto ctx = contexts_for(kind, c);
    auto& lv = out.blocks[index];
    lv.fill(0);
    const std::size_t local = (index - region_first) / kChannels;
    const int col = static_cast<int>(local % blocks_per_row);
    const int row = static_cast<int>(local / blocks_per_row);
    int n = 0;
    if (col > 0) n += cbf[index - kChannels];
    if (row > 0) n += cbf[index - static_cast<std::size_t>(blocks_per_row) * kChannels];
    cbf[index] = static_cast<std::uint8_t>(dec.decode(model[ctx.cbf(n)]));
    if (!cbf[index]) return;
    int prev1 = 0, prev2 = 0;
    bool done = false;
    for (int i = 0; i < 64 && !done; ++i) {
      const int band = band_class(i);
      const int sig = dec.decode(model[ctx.sig(band, prev1 + prev2)]);
      prev2 = prev1;
      prev1 = sig;
      if (!sig) continue;
      done = dec.decode(model[ctx.last(band)]) != 0;
      std::uint32_t level = 1;
      std::uint32_t k = 1;
      for (; k <= cap; ++k) {
        if (!dec.decode(model[ctx.gt(static_cast<int>(k), i > 0)])) break;
        level = k + 1;
      }
      if (k > cap) {
        const std::uint32_t extra = decode_exp_golomb(dec);
        if (extra > (1u << 24)) throw FormatError("residual level out of range");
        level = cap + 1 + extra;
      }
      const int neg = dec.decode_bypass();
      lv[i] = static_cast<std::int32_t>(neg ? -static_cast<std::int64_t>(level) : level);
    }
    if (!done) throw FormatError("residual block without terminating coefficient");
  });
  dec.finish();
  return out;
}

/// Full encoder path: returns the coded bytes.
inline std::vector<std::uint8_t> encode_residual(const ResidualPlane& r, const QualityPoint& q,
                                                 PlaneKind kind = PlaneKind::kForeground) {
  return encode_levels(quantize_residual(r, q), r.regions, q, kind);
}

inline ResidualPlane decode_residual(std::span<const std::uint8_t> bytes, int width, int height,
                                     const std::vector<Region>& regions, const QualityPoint& q,
                                     PlaneKind kind = PlaneKind::kForeground) {
  return reconstruct_residual(decode_levels(bytes, regions, width, height, q, kind), width, height, regions, q);
}

/// f_bar = clamp(f_hat + r_hat) on the residual's regions, zero elsewhere.
inline Frame reconstruct_foreground(const Frame& predicted, const ResidualPlane& r) {
  if (predicted.width() != r.width || predicted.height() != r.height)
    throw std::invalid_argument("reconstruct_foreground: geometry mismatch");
  Frame out(predicted.width(), predicted.height(), 0, predicted.frame_index());
  for (const auto& reg : r.regions)
    for (int c = 0; c < kChannels; ++c)
      for (int y = reg.y; y < reg.bottom(); ++y)
        for (int x = reg.x; x < reg.right(); ++x)
          out.at(c, x, y) = clamp_u8(predicted.at(c, x, y) + r.at(c, x, y));
  return out;
}

}  // namespace fbv
