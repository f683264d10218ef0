#pragma once

// Two-stage reconstruction: paste the decoded foreground into the decoded
// background, then feather the seam.

#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "fbv/core.hpp"

namespace fbv {

struct CompositeFrame {
  Frame image;                  // x_hat
  Mask mask;                    // m_t
  std::vector<Region> regions;  // rectangles whose union is `mask`
};

inline CompositeFrame composite(const Frame& fg, const Frame& bg, const Mask& m, std::vector<Region> regions = {}) {
  if (!fg.same_shape(bg) || m.width() != fg.width() || m.height() != fg.height())
    throw std::invalid_argument("composite: dimension mismatch");
  CompositeFrame out{bg, m, std::move(regions)};
  out.image.set_frame_index(bg.frame_index());
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < fg.height(); ++y)
      for (int x = 0; x < fg.width(); ++x)
        if (m.at(x, y)) out.image.at(c, x, y) = fg.at(c, x, y);
  return out;
}

namespace enhance_detail {

inline int chebyshev(const Region& r, int x, int y, int& qx, int& qy) {
  qx = std::clamp(x, r.x, r.right() - 1);
  qy = std::clamp(y, r.y, r.bottom() - 1);
  return std::max(std::abs(x - qx), std::abs(y - qy));
}

inline int sign(int v) { return (v > 0) - (v < 0); }

/// Rectangles covering a mask: one per maximal horizontal run per row.
inline std::vector<Region> runs_of(const Mask& m) {
  std::vector<Region> out;
  for (int y = 0; y < m.height(); ++y)
    for (int x = 0; x < m.width();) {
      if (!m.at(x, y)) {
        ++x;
        continue;
      }
      int e = x;
      while (e < m.width() && m.at(e, y)) ++e;
      out.push_back({x, y, e - x, 1});
      x = e;
    }
  return out;
}

}  // namespace enhance_detail

/// Boundary feathering over a band of `width` pixels outside the mask.
///
/// For a background pixel p at Chebyshev distance k <= d from the mask, with
/// nearest mask pixel q and outward direction u = sign(p - q), the output is
///   lambda * x_hat(q) + (1 - lambda) * x_hat(q + (d + 1) u),  lambda = (d + 1 - k) / (d + 1)
/// rounded half up. Both samples lie outside the band, so a second pass
/// reproduces the first. Mask pixels and pixels farther than d are untouched.
inline Frame enhance(const CompositeFrame& xc, int width = 3) {
  using namespace enhance_detail;
  if (width < 0) throw std::invalid_argument("enhance: negative feather width");
  Frame out = xc.image;
  if (width == 0) return out;
  const auto regions = xc.regions.empty() ? runs_of(xc.mask) : xc.regions;
  if (regions.empty()) return out;
  const int W = out.width(), H = out.height(), d = width;
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < W; ++x) {
      if (xc.mask.at(x, y)) continue;
      int best = std::numeric_limits<int>::max(), qx = 0, qy = 0;
      for (const auto& r : regions) {
        int rx, ry;
        const int k = chebyshev(r, x, y, rx, ry);
        if (k < best) {
          best = k;
          qx = rx;
          qy = ry;
        }
      }
      if (best > d) continue;
      const int bx = std::clamp(qx + (d + 1) * sign(x - qx), 0, W - 1);
      const int by = std::clamp(qy + (d + 1) * sign(y - qy), 0, H - 1);
      const bool far_ok = !xc.mask.at(bx, by);
      const int num = d + 1 - best, den = d + 1;
      for (int c = 0; c < kChannels; ++c) {
        const int f = xc.image.at(c, qx, qy);
        const int b = far_ok ? xc.image.at(c, bx, by) : xc.image.at(c, x, y);
        out.at(c, x, y) = static_cast<std::uint8_t>((2 * (f * num + b * (den - num)) + den) / (2 * den));
      }
    }
  return out;
}

/// Pluggable enhancement stage; the default is boundary feathering.
using Enhancer = std::function<Frame(const CompositeFrame&)>;

inline Enhancer feather_enhancer(int width = 3) {
  return [width](const CompositeFrame& c) { return enhance(c, width); };
}

}  // namespace fbv
