#pragma once

// Block motion field over foreground regions, its lossless predictive coding,
// backward warping and (identity) motion compensation.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <tuple>
#include <vector>

#include "fbv/core.hpp"
#include "fbv/entropy.hpp"

namespace fbv {

inline constexpr int kMotionBlock = 8;

/// Motion vector in half-pel units.
struct MotionVector {
  int x = 0;
  int y = 0;
  friend bool operator==(const MotionVector&, const MotionVector&) = default;
};

/// One vector per 8x8 block of each region, in coding order
/// (region, block row, block column).
struct FlowField {
  std::vector<Region> regions;
  std::vector<MotionVector> vectors;
  friend bool operator==(const FlowField&, const FlowField&) = default;
};

struct MotionSearchParams {
  int range = 16;                  // integer pels, each direction
  bool half_pel = true;
  /// Mean absolute difference per pixel above which diamond search falls back
  /// to exhaustive search over the window.
  double full_search_mad = 1.0;
};

namespace motion_detail {

/// Half-pel bilinear sample with edge clamping. hx, hy in half-pel units.
inline int sample_half(const Plane& p, int hx, int hy) {
  const int ix = hx >> 1, iy = hy >> 1;
  const int fx = hx & 1, fy = hy & 1;
  if (!fx && !fy) return p.clamped(ix, iy);
  if (fx && !fy) return (p.clamped(ix, iy) + p.clamped(ix + 1, iy) + 1) >> 1;
  if (!fx && fy) return (p.clamped(ix, iy) + p.clamped(ix, iy + 1) + 1) >> 1;
  return (p.clamped(ix, iy) + p.clamped(ix + 1, iy) + p.clamped(ix, iy + 1) + p.clamped(ix + 1, iy + 1) + 2) >> 2;
}

inline void check_regions(const std::vector<Region>& regions, int w, int h) {
  for (const auto& r : regions)
    if (!r.inside(w, h) || r.x % kMotionBlock || r.y % kMotionBlock || r.w % kMotionBlock || r.h % kMotionBlock)
      throw std::invalid_argument("motion regions must be 8-aligned and inside the frame");
}

template <typename Fn>
void for_each_block(const std::vector<Region>& regions, Fn&& fn) {
  std::size_t index = 0;
  for (const auto& r : regions)
    for (int by = r.y; by < r.bottom(); by += kMotionBlock)
      for (int bx = r.x; bx < r.right(); bx += kMotionBlock) fn(bx, by, index++);
}

inline std::size_t block_count(const std::vector<Region>& regions) {
  std::size_t n = 0;
  for (const auto& r : regions) n += static_cast<std::size_t>(r.w / kMotionBlock) * (r.h / kMotionBlock);
  return n;
}

struct Candidate {
  long sad = std::numeric_limits<long>::max();
  MotionVector v;

  // (sad, |v|^2, v.y, v.x) lexicographic
  bool better_than(const Candidate& o) const {
    const long n1 = static_cast<long>(v.x) * v.x + static_cast<long>(v.y) * v.y;
    const long n2 = static_cast<long>(o.v.x) * o.v.x + static_cast<long>(o.v.y) * o.v.y;
    return std::tie(sad, n1, v.y, v.x) < std::tie(o.sad, n2, o.v.y, o.v.x);
  }
};

class BlockMatcher {
 public:
  BlockMatcher(const Plane& prev, const Plane& cur, int bx, int by, const MotionSearchParams& params)
      : prev_(prev), cur_(cur), bx_(bx), by_(by), params_(params) {}

  /// SAD for a half-pel vector; stops early once `limit` is exceeded.
  long sad(MotionVector v, long limit = std::numeric_limits<long>::max()) const {
    long acc = 0;
    const bool integer = !(v.x & 1) && !(v.y & 1);
    for (int y = 0; y < kMotionBlock; ++y) {
      const int py = by_ + y;
      const std::uint8_t* crow = cur_.row(py) + bx_;
      if (integer) {
        const int sy = py - v.y / 2;
        for (int x = 0; x < kMotionBlock; ++x)
          acc += std::abs(static_cast<int>(crow[x]) - prev_.clamped(bx_ + x - v.x / 2, sy));
      } else {
        for (int x = 0; x < kMotionBlock; ++x)
          acc += std::abs(static_cast<int>(crow[x]) - sample_half(prev_, 2 * (bx_ + x) - v.x, 2 * py - v.y));
      }
      if (acc > limit) return acc;
    }
    return acc;
  }

  bool in_window(MotionVector v) const {
    const int lim = 2 * params_.range;
    return std::abs(v.x) <= lim && std::abs(v.y) <= lim;
  }

  void consider(Candidate& best, MotionVector v) const {
    if (!in_window(v)) return;
    Candidate c{sad(v, best.sad), v};
    if (c.better_than(best)) best = c;
  }

  Candidate search(std::span<const MotionVector> starts) const {
    Candidate best;
    consider(best, {0, 0});
    for (auto s : starts) consider(best, {s.x & ~1, s.y & ~1});

    // Large diamond, step 2 pels, until the center wins.
    static constexpr std::array<std::array<int, 2>, 8> kLarge = {
        {{0, -2}, {1, -1}, {2, 0}, {1, 1}, {0, 2}, {-1, 1}, {-2, 0}, {-1, -1}}};
    for (int iter = 0; iter < 4 * params_.range; ++iter) {
      const MotionVector center = best.v;
      for (auto [dx, dy] : kLarge) consider(best, {center.x + 2 * dx, center.y + 2 * dy});
      if (best.v == center) break;
    }
    // Small diamond, then full +-1 refinement.
    static constexpr std::array<std::array<int, 2>, 4> kSmall = {{{0, -1}, {1, 0}, {0, 1}, {-1, 0}}};
    const MotionVector c1 = best.v;
    for (auto [dx, dy] : kSmall) consider(best, {c1.x + 2 * dx, c1.y + 2 * dy});
    const MotionVector c2 = best.v;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) consider(best, {c2.x + 2 * dx, c2.y + 2 * dy});

    if (best.sad > static_cast<long>(params_.full_search_mad * kMotionBlock * kMotionBlock)) {
      for (int vy = -params_.range; vy <= params_.range; ++vy)
        for (int vx = -params_.range; vx <= params_.range; ++vx) consider(best, {2 * vx, 2 * vy});
    }

    if (params_.half_pel && best.sad > 0) {
      const MotionVector c3 = best.v;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx)
          if (dx || dy) consider(best, {c3.x + dx, c3.y + dy});
    }
    return best;
  }

 private:
  const Plane& prev_;
  const Plane& cur_;
  int bx_, by_;
  const MotionSearchParams& params_;
};

/// Availability-aware grid of already-visited block vectors.
class VectorGrid {
 public:
  VectorGrid(int width, int height)
      : cols_(width / kMotionBlock + 1), rows_(height / kMotionBlock + 1),
        cells_(static_cast<std::size_t>(cols_) * rows_), known_(cells_.size(), 0) {}

  const MotionVector* get(int bx, int by) const {
    if (bx < 0 || by < 0) return nullptr;
    const int cx = bx / kMotionBlock, cy = by / kMotionBlock;
    if (cx >= cols_ || cy >= rows_) return nullptr;
    const auto i = static_cast<std::size_t>(cy) * cols_ + cx;
    return known_[i] ? &cells_[i] : nullptr;
  }
  void set(int bx, int by, MotionVector v) {
    const auto i = static_cast<std::size_t>(by / kMotionBlock) * cols_ + bx / kMotionBlock;
    cells_[i] = v;
    known_[i] = 1;
  }

  /// Median of left, above and above-right (above-left when above-right is
  /// unavailable); a lone available neighbour is used directly; none gives 0.
  MotionVector predictor(int bx, int by) const {
    const MotionVector* a = get(bx - kMotionBlock, by);
    const MotionVector* b = get(bx, by - kMotionBlock);
    const MotionVector* c = get(bx + kMotionBlock, by - kMotionBlock);
    if (!c) c = get(bx - kMotionBlock, by - kMotionBlock);
    const int avail = (a != nullptr) + (b != nullptr) + (c != nullptr);
    if (avail == 0) return {};
    if (avail == 1) return a ? *a : (b ? *b : *c);
    const MotionVector zero{};
    const MotionVector& va = a ? *a : zero;
    const MotionVector& vb = b ? *b : zero;
    const MotionVector& vc = c ? *c : zero;
    auto med = [](int p, int q, int r) { return std::max(std::min(p, q), std::min(std::max(p, q), r)); };
    return {med(va.x, vb.x, vc.x), med(va.y, vb.y, vc.y)};
  }

 private:
  int cols_, rows_;
  std::vector<MotionVector> cells_;
  std::vector<std::uint8_t> known_;
};

}  // namespace motion_detail

/// Block matching on luma between the reference `prev` and current `cur`.
inline FlowField estimate_flow(const Frame& prev, const Frame& cur, const std::vector<Region>& regions,
                               const MotionSearchParams& params = {}) {
  using namespace motion_detail;
  if (regions.empty()) throw std::invalid_argument("estimate_flow: empty region set");
  if (!prev.same_shape(cur)) throw std::invalid_argument("estimate_flow: frame size mismatch");
  check_regions(regions, cur.width(), cur.height());
  FlowField flow{regions, std::vector<MotionVector>(block_count(regions))};
  VectorGrid grid(cur.width(), cur.height());
  for_each_block(regions, [&](int bx, int by, std::size_t index) {
    std::array<MotionVector, 2> starts{};
    std::size_t n = 0;
    if (auto* l = grid.get(bx - kMotionBlock, by)) starts[n++] = *l;
    if (auto* u = grid.get(bx, by - kMotionBlock)) starts[n++] = *u;
    const BlockMatcher matcher(to_luma(prev), to_luma(cur), bx, by, params);
    const auto best = matcher.search(std::span(starts.data(), n));
    flow.vectors[index] = best.v;
    grid.set(bx, by, best.v);
  });
  return flow;
}

/// SAD of a block for a given vector (exposed for tests and analysis).
inline long block_sad(const Frame& prev, const Frame& cur, int bx, int by, MotionVector v) {
  const MotionSearchParams params;
  return motion_detail::BlockMatcher(to_luma(prev), to_luma(cur), bx, by, params).sad(v);
}

inline constexpr int kMaxHalfPel = 32;

// Flow payload contexts: zero flag per component, magnitude bins per component.
inline constexpr int kFlowContexts = 2 + 2 * 4;

/// Predictive coding of a lattice-valued flow field.
inline std::vector<std::uint8_t> encode_flow(const FlowField& flow) {
  using namespace motion_detail;
  std::vector<AdaptiveBit> model(kFlowContexts);
  RangeEncoder enc;
  if (flow.vectors.size() != block_count(flow.regions)) throw std::invalid_argument("flow/region mismatch");
  int max_x = 0, max_y = 0;
  for (const auto& r : flow.regions) {
    max_x = std::max(max_x, r.right());
    max_y = std::max(max_y, r.bottom());
  }
  VectorGrid grid(max_x, max_y);
  for_each_block(flow.regions, [&](int bx, int by, std::size_t index) {
    const MotionVector v = flow.vectors[index];
    if (std::abs(v.x) > kMaxHalfPel || std::abs(v.y) > kMaxHalfPel)
      throw std::out_of_range("motion vector outside +-32 half-pels");
    const MotionVector p = grid.predictor(bx, by);
    const int d[2] = {v.x - p.x, v.y - p.y};
    for (int comp = 0; comp < 2; ++comp) {
      const int mag = std::abs(d[comp]);
      enc.encode(mag != 0, model[comp]);
      if (!mag) continue;
      int k = 1;
      for (; k <= 8; ++k) {
        const int gt = mag > k;
        enc.encode(gt, model[2 + comp * 4 + std::min(k - 1, 3)]);
        if (!gt) break;
      }
      if (k > 8) encode_exp_golomb(enc, static_cast<std::uint32_t>(mag - 9));
      enc.encode_bypass(d[comp] < 0);
    }
    grid.set(bx, by, v);
  });
  return std::move(enc).finish();
}

inline FlowField decode_flow(std::span<const std::uint8_t> bytes, const std::vector<Region>& regions) {
  using namespace motion_detail;
  std::vector<AdaptiveBit> model(kFlowContexts);
  RangeDecoder dec(bytes);
  FlowField flow{regions, std::vector<MotionVector>(block_count(regions))};
  int max_x = 0, max_y = 0;
  for (const auto& r : regions) {
    max_x = std::max(max_x, r.right());
    max_y = std::max(max_y, r.bottom());
  }
  VectorGrid grid(max_x, max_y);
  for_each_block(regions, [&](int bx, int by, std::size_t index) {
    const MotionVector p = grid.predictor(bx, by);
    int d[2] = {0, 0};
    for (int comp = 0; comp < 2; ++comp) {
      if (!dec.decode(model[comp])) continue;
      int mag = 1, k = 1;
      for (; k <= 8; ++k) {
        if (!dec.decode(model[2 + comp * 4 + std::min(k - 1, 3)])) break;
        mag = k + 1;
      }
      if (k > 8) {
        const auto extra = decode_exp_golomb(dec);
        if (extra > 2 * kMaxHalfPel) throw FormatError("motion residual out of range");
        mag = 9 + static_cast<int>(extra);
      }
      d[comp] = dec.decode_bypass() ? -mag : mag;
    }
    const MotionVector v{p.x + d[0], p.y + d[1]};
    if (std::abs(v.x) > kMaxHalfPel || std::abs(v.y) > kMaxHalfPel)
      throw FormatError("decoded motion vector outside +-32 half-pels");
    flow.vectors[index] = v;
    grid.set(bx, by, v);
  });
  dec.finish();
  return flow;
}

/// Residual symbols of the median predictor, in coding order (for inspection).
inline std::vector<MotionVector> flow_prediction_residuals(const FlowField& flow) {
  using namespace motion_detail;
  int max_x = 0, max_y = 0;
  for (const auto& r : flow.regions) {
    max_x = std::max(max_x, r.right());
    max_y = std::max(max_y, r.bottom());
  }
  VectorGrid grid(max_x, max_y);
  std::vector<MotionVector> out(flow.vectors.size());
  for_each_block(flow.regions, [&](int bx, int by, std::size_t index) {
    const MotionVector p = grid.predictor(bx, by);
    out[index] = {flow.vectors[index].x - p.x, flow.vectors[index].y - p.y};
    grid.set(bx, by, flow.vectors[index]);
  });
  return out;
}

/// Backward warp: w(x, y) = prev(x - v_x, y - v_y) on the flow's regions,
/// bilinear at half-pel positions, zero outside the regions.
inline Frame warp(const Frame& prev, const FlowField& flow) {
  using namespace motion_detail;
  check_regions(flow.regions, prev.width(), prev.height());
  if (flow.vectors.size() != block_count(flow.regions)) throw std::invalid_argument("flow/region mismatch");
  Frame out(prev.width(), prev.height(), 0, prev.frame_index());
  for_each_block(flow.regions, [&](int bx, int by, std::size_t index) {
    const MotionVector v = flow.vectors[index];
    for (int c = 0; c < kChannels; ++c)
      for (int y = by; y < by + kMotionBlock; ++y)
        for (int x = bx; x < bx + kMotionBlock; ++x)
          out.at(c, x, y) = static_cast<std::uint8_t>(sample_half(prev.plane(c), 2 * x - v.x, 2 * y - v.y));
  });
  return out;
}

/// Motion-compensated prediction. Identity compensation: the warped frame is
/// the prediction; the reference and flow are accepted so that a richer
/// compensator can use them.
inline Frame predict(const Frame& /*prev*/, const Frame& warped, const FlowField& /*flow*/) { return warped; }

}  // namespace fbv
