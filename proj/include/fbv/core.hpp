#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace fbv {

/// Malformed input data (bitstream, Y4M header, truncated payload).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// File system or stream failure.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid configuration value or violated precondition.
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kMinFrameDim = 16;
inline constexpr int kChannels = 3;

inline std::uint8_t clamp_u8(int v) {
  return static_cast<std::uint8_t>(std::clamp(v, 0, 255));
}

/// Single 8-bit sample plane.
class Plane {
 public:
  Plane() = default;
  Plane(int width, int height, std::uint8_t fill = 0)
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * height, fill) {
    if (width < 0 || height < 0) throw ConfigError("negative plane size");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }

  std::uint8_t at(int x, int y) const { return data_[index(x, y)]; }
  std::uint8_t& at(int x, int y) { return data_[index(x, y)]; }

  /// Edge-clamped read.
  std::uint8_t clamped(int x, int y) const {
    return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
  }

  std::span<const std::uint8_t> samples() const { return data_; }
  std::span<std::uint8_t> samples() { return data_; }
  const std::uint8_t* row(int y) const { return data_.data() + static_cast<std::size_t>(y) * width_; }
  std::uint8_t* row(int y) { return data_.data() + static_cast<std::size_t>(y) * width_; }

  friend bool operator==(const Plane&, const Plane&) = default;

 private:
  std::size_t index(int x, int y) const {
    return static_cast<std::size_t>(y) * width_ + x;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Y'CbCr 4:4:4 frame, 8 bits per sample. Plane 0 is luma.
class Frame {
 public:
  Frame() = default;
  Frame(int width, int height, std::uint8_t fill = 0, std::int64_t frame_index = 0)
      : width_(width), height_(height), frame_index_(frame_index) {
    if (width < kMinFrameDim || height < kMinFrameDim)
      throw ConfigError("frame dimensions must be at least 16x16, got " +
                        std::to_string(width) + "x" + std::to_string(height));
    for (auto& p : planes_) p = Plane(width, height, fill);
  }
  Frame(int width, int height, std::array<std::uint8_t, 3> fill, std::int64_t frame_index = 0)
      : Frame(width, height, 0, frame_index) {
    for (int c = 0; c < kChannels; ++c)
      std::fill(planes_[c].samples().begin(), planes_[c].samples().end(), fill[c]);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::int64_t frame_index() const { return frame_index_; }
  void set_frame_index(std::int64_t t) { frame_index_ = t; }
  bool empty() const { return width_ == 0; }

  const Plane& plane(int c) const { return planes_[c]; }
  Plane& plane(int c) { return planes_[c]; }
  std::uint8_t at(int c, int x, int y) const { return planes_[c].at(x, y); }
  std::uint8_t& at(int c, int x, int y) { return planes_[c].at(x, y); }

  bool same_shape(const Frame& o) const { return width_ == o.width_ && height_ == o.height_; }

  /// Sample equality; frame_index is not compared.
  friend bool operator==(const Frame& a, const Frame& b) {
    return a.width_ == b.width_ && a.height_ == b.height_ && a.planes_ == b.planes_;
  }

 private:
  int width_ = 0;
  int height_ = 0;
  std::int64_t frame_index_ = 0;
  std::array<Plane, kChannels> planes_;
};

struct Rational {
  int num = 30;
  int den = 1;
  friend bool operator==(const Rational&, const Rational&) = default;
};

struct VideoSequence {
  std::vector<Frame> frames;
  Rational fps;

  int width() const { return frames.empty() ? 0 : frames.front().width(); }
  int height() const { return frames.empty() ? 0 : frames.front().height(); }
};

/// Axis-aligned rectangle in pixel coordinates.
struct Region {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const { return x + w; }
  int bottom() const { return y + h; }
  long area() const { return static_cast<long>(w) * h; }
  bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }
  bool inside(int width, int height) const {
    return w >= 1 && h >= 1 && x >= 0 && y >= 0 && x + w <= width && y + h <= height;
  }
  bool overlaps(const Region& o) const {
    return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom();
  }
  /// Overlapping or sharing an edge/corner.
  bool touches(const Region& o) const {
    return x <= o.right() && o.x <= right() && y <= o.bottom() && o.y <= bottom();
  }
  Region united(const Region& o) const {
    int x0 = std::min(x, o.x), y0 = std::min(y, o.y);
    int x1 = std::max(right(), o.right()), y1 = std::max(bottom(), o.bottom());
    return {x0, y0, x1 - x0, y1 - y0};
  }

  friend bool operator==(const Region&, const Region&) = default;
};

/// Snaps a region outward to the 8-pixel grid and clamps it to the frame.
inline Region snap_to_grid(const Region& r, int width, int height, int grid = 8) {
  int x0 = (r.x / grid) * grid;
  int y0 = (r.y / grid) * grid;
  int x1 = ((r.right() + grid - 1) / grid) * grid;
  int y1 = ((r.bottom() + grid - 1) / grid) * grid;
  x0 = std::max(x0, 0);
  y0 = std::max(y0, 0);
  x1 = std::min(x1, width);
  y1 = std::min(y1, height);
  return {x0, y0, x1 - x0, y1 - y0};
}

/// Binary per-pixel mask, one byte (0/1) per pixel.
class Mask {
 public:
  Mask() = default;
  Mask(int width, int height, bool fill = false)
      : width_(width), height_(height),
        bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool at(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool v = true) { bits_[static_cast<std::size_t>(y) * width_ + x] = v ? 1 : 0; }

  void fill(const Region& r, bool v = true) {
    for (int y = r.y; y < r.bottom(); ++y)
      std::fill_n(bits_.begin() + static_cast<std::ptrdiff_t>(y) * width_ + r.x, r.w, v ? 1 : 0);
  }

  long count() const { return static_cast<long>(std::count(bits_.begin(), bits_.end(), 1)); }
  bool none() const { return std::find(bits_.begin(), bits_.end(), 1) == bits_.end(); }
  bool same_shape(const Mask& o) const { return width_ == o.width_ && height_ == o.height_; }

  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const Mask&, const Mask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

inline Mask mask_from_regions(std::span<const Region> regions, int width, int height) {
  Mask m(width, height);
  for (const auto& r : regions) m.fill(r);
  return m;
}

/// Luma plane of a frame.
inline const Plane& to_luma(const Frame& f) { return f.plane(0); }

inline void require_inside(const Frame& f, const Region& r) {
  if (!r.inside(f.width(), f.height()))
    throw std::out_of_range("region (" + std::to_string(r.x) + "," + std::to_string(r.y) + "," +
                            std::to_string(r.w) + "," + std::to_string(r.h) +
                            ") outside frame");
}

/// Patch of a frame covering `region`; may be smaller than the frame minimum.
struct Patch {
  Region region;
  std::array<Plane, kChannels> planes;
};

inline Patch crop(const Frame& f, const Region& r) {
  require_inside(f, r);
  Patch p{r, {}};
  for (int c = 0; c < kChannels; ++c) {
    p.planes[c] = Plane(r.w, r.h);
    for (int y = 0; y < r.h; ++y)
      std::copy_n(f.plane(c).row(r.y + y) + r.x, r.w, p.planes[c].row(y));
  }
  return p;
}

inline Frame paste(Frame dst, const Patch& patch, const Region& r) {
  require_inside(dst, r);
  if (patch.region.w != r.w || patch.region.h != r.h)
    throw std::invalid_argument("patch size does not match region");
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < r.h; ++y)
      std::copy_n(patch.planes[c].row(y), r.w, dst.plane(c).row(r.y + y) + r.x);
  return dst;
}

}  // namespace fbv
