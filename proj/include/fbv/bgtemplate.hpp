#pragma once

// Background templates: MS-SSIM-gated updating, closed-loop residual coding of
// each template against its predecessor (or a mid-gray anchor), and linear
// interpolation of the backgrounds between two templates.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "fbv/core.hpp"
#include "fbv/metrics.hpp"
#include "fbv/residual_codec.hpp"

namespace fbv {

inline constexpr std::uint8_t kAnchorValue = 128;

struct BackgroundTemplate {
  std::int64_t frame_index = 0;
  Frame image;                        // reconstruction as the decoder sees it
  std::vector<std::uint8_t> payload;  // record payload, see template_payload layout
  bool anchor = false;
};

/// True iff MS-SSIM(current, candidate) < gamma.
inline bool should_update(const Frame& current_template, const Frame& candidate, double gamma) {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("should_update: gamma must be in (0, 1)");
  return ms_ssim(current_template, candidate) < gamma;
}

namespace template_detail {

// Payload: flags u8 (bit 0 = anchor), delta_q u16 LE, level bits u8, residual bytes.
inline constexpr std::size_t kPayloadHeader = 4;

inline Frame base_image(const BackgroundTemplate* prev, bool anchor, int w, int h) {
  if (anchor || prev == nullptr) return Frame(w, h, kAnchorValue);
  return prev->image;
}

inline Frame add_residual(const Frame& base, const ResidualPlane& r) {
  Frame out = base;
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < base.height(); ++y)
      for (int x = 0; x < base.width(); ++x) out.at(c, x, y) = clamp_u8(base.at(c, x, y) + r.at(c, x, y));
  return out;
}

}  // namespace template_detail

/// Codes `candidate` against the previous template's reconstruction, or against
/// a constant 128 frame when `anchor` is set or there is no previous template.
inline BackgroundTemplate encode_template(const BackgroundTemplate* prev, const Frame& candidate,
                                          const QualityPoint& q, bool anchor = false) {
  using namespace template_detail;
  const int w = candidate.width(), h = candidate.height();
  if (prev && !prev->image.same_shape(candidate)) throw std::invalid_argument("encode_template: size mismatch");
  if (prev && candidate.frame_index() <= prev->frame_index)
    throw std::invalid_argument("encode_template: template frame indices must increase");
  anchor = anchor || prev == nullptr;
  const Frame base = base_image(prev, anchor, w, h);
  ResidualPlane r(w, h, full_frame_regions(w, h));
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) r.at(c, x, y) = static_cast<std::int16_t>(candidate.at(c, x, y) - base.at(c, x, y));
  const auto levels = quantize_residual(r, q);
  const auto coded = encode_levels(levels, r.regions, q, PlaneKind::kTemplate);
  const auto decoded = reconstruct_residual(levels, w, h, r.regions, q);

  BackgroundTemplate t;
  t.frame_index = candidate.frame_index();
  t.anchor = anchor;
  t.image = add_residual(base, decoded);
  t.image.set_frame_index(t.frame_index);
  t.payload = {static_cast<std::uint8_t>(anchor ? 1 : 0), static_cast<std::uint8_t>(q.delta_q & 0xFF),
               static_cast<std::uint8_t>(q.delta_q >> 8), static_cast<std::uint8_t>(q.level_bits)};
  t.payload.insert(t.payload.end(), coded.begin(), coded.end());
  return t;
}

/// Decoder mirror of encode_template.
inline BackgroundTemplate decode_template(const BackgroundTemplate* prev, std::span<const std::uint8_t> payload,
                                          std::int64_t frame_index, int width, int height) {
  using namespace template_detail;
  if (payload.size() < kPayloadHeader) throw FormatError("template payload too short");
  const bool anchor = (payload[0] & 1) != 0;
  if (payload[0] & ~1u) throw FormatError("template payload: unknown flags");
  if (!anchor && prev == nullptr) throw FormatError("template payload: missing predecessor");
  QualityPoint q;
  q.delta_q = static_cast<std::uint16_t>(payload[1] | (payload[2] << 8));
  q.level_bits = payload[3];
  if (q.delta_q == 0 || q.level_bits < 1 || q.level_bits > 8) throw FormatError("template payload: bad quality point");
  const auto regions = full_frame_regions(width, height);
  const auto r = decode_residual(payload.subspan(kPayloadHeader), width, height, regions, q, PlaneKind::kTemplate);
  BackgroundTemplate t;
  t.frame_index = frame_index;
  t.anchor = anchor;
  t.image = add_residual(base_image(prev, anchor, width, height), r);
  t.image.set_frame_index(frame_index);
  t.payload.assign(payload.begin(), payload.end());
  return t;
}

/// Background at offset j before B_next (j = 0 -> B_next, j = m -> B_prev):
/// B_prev + (B_next - B_prev) * (m - j) / m, rounded half up.
inline Frame interpolate_background(const Frame& b_prev, const Frame& b_next, int m, int j) {
  if (m < 1) throw std::invalid_argument("interpolate: interval must be >= 1");
  if (j < 0 || j > m) throw std::invalid_argument("interpolate: offset outside [0, m]");
  if (!b_prev.same_shape(b_next)) throw std::invalid_argument("interpolate: size mismatch");
  Frame out(b_prev.width(), b_prev.height());
  const long num_w = m - j;
  for (int c = 0; c < kChannels; ++c) {
    auto p = b_prev.plane(c).samples();
    auto n = b_next.plane(c).samples();
    auto o = out.plane(c).samples();
    for (std::size_t i = 0; i < p.size(); ++i) {
      const long num = static_cast<long>(p[i]) * m + (static_cast<long>(n[i]) - p[i]) * num_w;
      o[i] = static_cast<std::uint8_t>((2 * num + m) / (2L * m));
    }
  }
  return out;
}

/// The m - 1 interior backgrounds, ordered j = m-1, ..., 1 (i.e. in time order).
inline std::vector<Frame> interpolate_backgrounds(const Frame& b_prev, const Frame& b_next, int m) {
  if (m < 1) throw std::invalid_argument("interpolate: interval must be >= 1");
  std::vector<Frame> out;
  out.reserve(static_cast<std::size_t>(m - 1));
  for (int j = m - 1; j >= 1; --j) out.push_back(interpolate_background(b_prev, b_next, m, j));
  return out;
}

/// Encoder-side template chain driven by the MS-SSIM update gate.
class TemplateChain {
 public:
  TemplateChain(double gamma, QualityPoint quality, int anchor_period)
      : gamma_(gamma), quality_(quality), anchor_period_(anchor_period) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("gamma must be in (0, 1)");
    if (anchor_period < 0) throw ConfigError("anchor period must be >= 0");
  }

  /// Offers the background candidate of the next frame. The first candidate
  /// always becomes a template. Returns the new template, if any.
  const BackgroundTemplate* offer(const Frame& candidate) {
    if (templates_.empty()) {
      trace_.push_back(1.0);
      templates_.push_back(encode_template(nullptr, candidate, quality_, true));
      return &templates_.back();
    }
    const double score = ms_ssim(templates_.back().image, candidate);
    trace_.push_back(score);
    if (!(score < gamma_)) return nullptr;
    const bool anchor = anchor_period_ > 0 && templates_.size() % static_cast<std::size_t>(anchor_period_) == 0;
    templates_.push_back(encode_template(&templates_.back(), candidate, quality_, anchor));
    return &templates_.back();
  }

  const std::vector<BackgroundTemplate>& templates() const { return templates_; }
  const BackgroundTemplate& current() const { return templates_.back(); }
  /// MS-SSIM of each offered candidate against the then-current template.
  const std::vector<double>& trace() const { return trace_; }
  double gamma() const { return gamma_; }

 private:
  double gamma_;
  QualityPoint quality_;
  int anchor_period_;
  std::vector<BackgroundTemplate> templates_;
  std::vector<double> trace_;
};

}  // namespace fbv
