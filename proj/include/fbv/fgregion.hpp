#pragma once

// Foreground region proposal: raw mixture-model points -> morphology ->
// connected components -> merged, grid-aligned bounding rectangles.

#include <algorithm>
#include <tuple>
#include <vector>

#include "fbv/core.hpp"

namespace fbv {

struct RegionParams {
  int majority_size = 3;     // isolated-point removal window
  int open_size = 3;         // erode then dilate
  int dilate_size = 5;
  int min_component = 16;    // pixels, after morphology
  int grid = 8;
};

/// Non-overlapping grid-aligned rectangles and their union mask.
struct RegionSet {
  std::vector<Region> regions;
  Mask mask;

  bool empty() const { return regions.empty(); }
};

namespace region_detail {

/// Box filter count of set bits in a size x size window (zero outside).
inline std::vector<int> window_counts(const Mask& m, int size) {
  const int w = m.width(), h = m.height(), r = size / 2;
  std::vector<int> integral(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      integral[static_cast<std::size_t>(y + 1) * (w + 1) + x + 1] =
          m.at(x, y) + integral[static_cast<std::size_t>(y) * (w + 1) + x + 1] +
          integral[static_cast<std::size_t>(y + 1) * (w + 1) + x] - integral[static_cast<std::size_t>(y) * (w + 1) + x];
  std::vector<int> out(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r), y0 = std::max(0, y - r);
      const int x1 = std::min(w, x + r + 1), y1 = std::min(h, y + r + 1);
      out[static_cast<std::size_t>(y) * w + x] =
          integral[static_cast<std::size_t>(y1) * (w + 1) + x1] - integral[static_cast<std::size_t>(y0) * (w + 1) + x1] -
          integral[static_cast<std::size_t>(y1) * (w + 1) + x0] + integral[static_cast<std::size_t>(y0) * (w + 1) + x0];
    }
  return out;
}

inline Mask majority(const Mask& m, int size) {
  const auto counts = window_counts(m, size);
  const int need = size * size / 2 + 1;
  Mask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x)
      out.set(x, y, counts[static_cast<std::size_t>(y) * m.width() + x] >= need);
  return out;
}

inline Mask dilate(const Mask& m, int size) {
  const auto counts = window_counts(m, size);
  Mask out(m.width(), m.height());
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width(); ++x) out.set(x, y, counts[static_cast<std::size_t>(y) * m.width() + x] > 0);
  return out;
}

/// Erosion; pixels outside the frame count as set so borders do not erode.
inline Mask erode(const Mask& m, int size) {
  const int w = m.width(), h = m.height(), r = size / 2;
  const auto counts = window_counts(m, size);
  Mask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int inside = (std::min(w, x + r + 1) - std::max(0, x - r)) * (std::min(h, y + r + 1) - std::max(0, y - r));
      out.set(x, y, counts[static_cast<std::size_t>(y) * w + x] == inside);
    }
  return out;
}

struct Component {
  Region box;
  long pixels = 0;
};

/// 8-connected components in raster order of their first pixel.
inline std::vector<Component> connected_components(const Mask& m) {
  const int w = m.width(), h = m.height();
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<Component> comps;
  std::vector<std::pair<int, int>> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!m.at(x, y) || seen[static_cast<std::size_t>(y) * w + x]) continue;
      int x0 = x, x1 = x, y0 = y, y1 = y;
      long n = 0;
      stack.assign(1, {x, y});
      seen[static_cast<std::size_t>(y) * w + x] = 1;
      while (!stack.empty()) {
        auto [cx, cy] = stack.back();
        stack.pop_back();
        ++n;
        x0 = std::min(x0, cx); x1 = std::max(x1, cx);
        y0 = std::min(y0, cy); y1 = std::max(y1, cy);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            auto& s = seen[static_cast<std::size_t>(ny) * w + nx];
            if (s || !m.at(nx, ny)) continue;
            s = 1;
            stack.emplace_back(nx, ny);
          }
      }
      comps.push_back({{x0, y0, x1 - x0 + 1, y1 - y0 + 1}, n});
    }
  return comps;
}

/// Transitive closure of `pred` over rectangle pairs; merged into bounding boxes.
template <typename Pred>
std::vector<Region> merge_closure(std::vector<Region> rs, Pred pred) {
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < rs.size() && !changed; ++i)
      for (std::size_t j = i + 1; j < rs.size(); ++j)
        if (pred(rs[i], rs[j])) {
          rs[i] = rs[i].united(rs[j]);
          rs.erase(rs.begin() + static_cast<std::ptrdiff_t>(j));
          changed = true;
          break;
        }
  }
  std::sort(rs.begin(), rs.end(), [](const Region& a, const Region& b) {
    return std::tie(a.y, a.x, a.h, a.w) < std::tie(b.y, b.x, b.h, b.w);
  });
  return rs;
}

/// Snap every rectangle to the grid and merge until no two overlap.
inline std::vector<Region> snap_and_merge(std::vector<Region> rs, int width, int height, int grid) {
  for (auto& r : rs) r = snap_to_grid(r, width, height, grid);
  for (;;) {
    auto merged = merge_closure(rs, [](const Region& a, const Region& b) { return a.overlaps(b); });
    for (auto& r : merged) r = snap_to_grid(r, width, height, grid);
    if (merged == rs) return merged;
    rs = std::move(merged);
  }
}

}  // namespace region_detail

/// Region proposal from raw foreground points.
inline RegionSet fp(const Frame& frame, const Mask& points, const RegionParams& params = {}) {
  using namespace region_detail;
  if (points.width() != frame.width() || points.height() != frame.height())
    throw std::invalid_argument("fp: mask/frame size mismatch");
  Mask m = majority(points, params.majority_size);
  m = dilate(erode(m, params.open_size), params.open_size);
  m = dilate(m, params.dilate_size);
  std::vector<Region> boxes;
  for (const auto& c : connected_components(m))
    if (c.pixels >= params.min_component) boxes.push_back(c.box);
  boxes = merge_closure(std::move(boxes), [](const Region& a, const Region& b) { return a.touches(b); });
  RegionSet out;
  out.regions = snap_and_merge(std::move(boxes), frame.width(), frame.height(), params.grid);
  out.mask = mask_from_regions(out.regions, frame.width(), frame.height());
  return out;
}

inline RegionSet empty_region_set(int width, int height) { return {{}, Mask(width, height)}; }

inline RegionSet make_region_set(std::vector<Region> regions, int width, int height, int grid = 8) {
  RegionSet out;
  out.regions = region_detail::snap_and_merge(std::move(regions), width, height, grid);
  out.mask = mask_from_regions(out.regions, width, height);
  return out;
}

/// m_t = FP(x_{t-1}) OR FP(x_t), re-rectangularized.
inline RegionSet combine_masks(const RegionSet& prev, const RegionSet& cur) {
  if (!prev.mask.same_shape(cur.mask)) throw std::invalid_argument("combine_masks: size mismatch");
  std::vector<Region> all = prev.regions;
  all.insert(all.end(), cur.regions.begin(), cur.regions.end());
  return make_region_set(std::move(all), cur.mask.width(), cur.mask.height());
}

/// f_t = m_t (Hadamard) x_t.
inline Frame extract_foreground(const Frame& frame, const Mask& m) {
  if (m.width() != frame.width() || m.height() != frame.height())
    throw std::invalid_argument("extract_foreground: size mismatch");
  Frame out(frame.width(), frame.height(), 0, frame.frame_index());
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < frame.height(); ++y)
      for (int x = 0; x < frame.width(); ++x)
        if (m.at(x, y)) out.at(c, x, y) = frame.at(c, x, y);
  return out;
}

}  // namespace fbv
