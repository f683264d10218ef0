#pragma once

// The .fbv container.
//
// All integers little-endian.
//
//   "FBVC" u8 version(=1)
//   header: u16 width, u16 height, u16 fps_num, u16 fps_den, u32 frame_count,
//           u8 level_bits, u16 delta_q (x256), u16 gamma (x10^4), u8 flags
//   records, ordered by (frame_no, tag):
//     u8 tag (1 = template, 2 = foreground), u32 frame_no, u32 payload_len, payload
//     foreground payload: u16 region_count, region_count x {u16 x, y, w, h},
//                         u32 flow_len, flow bytes, u32 residual_len, residual bytes
//   background index: u32 count, count x {u32 frame_no, u64 record_offset}
//   foreground index: u32 count, count x {u32 frame_no, u64 record_offset}
//   non-foreground segments: u32 count, count x {u32 start, u32 end}  (inclusive)
//   footer: u64 bg_index_offset, u64 fg_index_offset, u32 crc, "FBIX"
//
// crc is the CRC-32 (zlib polynomial) of every byte before it. It is checked
// after the structural validation, so structural damage is reported by name
// and damage confined to payload bytes as a checksum mismatch.
//
// Header flags: bit 0 = perceptual band weights, bits 1-3 reserved (zero),
// bits 4-7 = foreground refresh exponent e (refresh every 2^e frames, 0 = off).

#include <algorithm>
#include <cstdint>
#include <cstring>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <zlib.h>

#include "fbv/core.hpp"
#include "fbv/entropy.hpp"

namespace fbv {

inline constexpr std::uint8_t kStreamVersion = 1;
inline constexpr std::uint8_t kTagTemplate = 0x01;
inline constexpr std::uint8_t kTagForeground = 0x02;
inline constexpr std::size_t kStreamHeaderBytes = 4 + 1 + 18;
inline constexpr std::size_t kFooterBytes = 8 + 8 + 4 + 4;

struct StreamHeader {
  std::uint16_t width = 0;
  std::uint16_t height = 0;
  std::uint16_t fps_num = 30;
  std::uint16_t fps_den = 1;
  std::uint32_t frame_count = 0;
  std::uint8_t level_bits = 1;
  std::uint16_t delta_q = 0;
  std::uint16_t gamma_q = 9800;
  std::uint8_t flags = 0;

  bool perceptual_weights() const { return flags & 1; }
  int refresh_exponent() const { return flags >> 4; }
  /// Foreground refresh period in frames, 0 when disabled.
  std::uint32_t refresh_period() const { return refresh_exponent() == 0 ? 0 : 1u << refresh_exponent(); }
  double gamma() const { return gamma_q / 10000.0; }

  friend bool operator==(const StreamHeader&, const StreamHeader&) = default;
};

inline std::uint8_t make_header_flags(bool perceptual, int refresh_exponent) {
  if (refresh_exponent < 0 || refresh_exponent > 15) throw ConfigError("refresh exponent must be in [0, 15]");
  return static_cast<std::uint8_t>((perceptual ? 1 : 0) | (refresh_exponent << 4));
}

struct TemplateRecord {
  std::uint32_t frame_no = 0;
  std::vector<std::uint8_t> payload;
  friend bool operator==(const TemplateRecord&, const TemplateRecord&) = default;
};

struct ForegroundRecord {
  std::uint32_t frame_no = 0;
  std::vector<Region> regions;
  std::vector<std::uint8_t> flow;
  std::vector<std::uint8_t> residual;

  std::size_t payload_size() const { return 2 + 8 * regions.size() + 4 + flow.size() + 4 + residual.size(); }
  friend bool operator==(const ForegroundRecord&, const ForegroundRecord&) = default;
};

struct Segment {
  std::uint32_t start = 0;
  std::uint32_t end = 0;  // inclusive
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct IndexEntry {
  std::uint32_t frame_no = 0;
  std::uint64_t offset = 0;
  friend bool operator==(const IndexEntry&, const IndexEntry&) = default;
};

/// Decoded container contents. Index tables and segments are derived from the
/// records; see stream_layout.
struct FbvStream {
  StreamHeader header;
  std::vector<TemplateRecord> templates;      // increasing frame_no
  std::vector<ForegroundRecord> foregrounds;  // increasing frame_no
  friend bool operator==(const FbvStream&, const FbvStream&) = default;
};

struct StreamLayout {
  std::vector<IndexEntry> bg_index;
  std::vector<IndexEntry> fg_index;
  std::vector<Segment> segments;
  std::uint64_t bg_index_offset = 0;
  std::uint64_t fg_index_offset = 0;
  std::uint64_t total_bytes = 0;
};

/// Maximal runs of frames in [0, frame_count) that have no foreground record.
inline std::vector<Segment> non_foreground_segments(const FbvStream& s) {
  std::vector<Segment> out;
  std::uint32_t next = 0;
  auto close_run = [&](std::uint32_t until) {
    if (until > next) out.push_back({next, until - 1});
  };
  for (const auto& f : s.foregrounds) {
    close_run(f.frame_no);
    next = f.frame_no + 1;
  }
  close_run(s.header.frame_count);
  return out;
}

/// Throws FormatError describing the first violated stream invariant.
inline void validate_stream(const FbvStream& s) {
  const auto& h = s.header;
  if (h.frame_count == 0) throw FormatError("stream has no frames");
  if (h.width < kMinFrameDim || h.height < kMinFrameDim || h.width % 8 || h.height % 8)
    throw FormatError("frame dimensions must be multiples of 8 and at least 16");
  if (h.fps_num == 0 || h.fps_den == 0) throw FormatError("invalid frame rate");
  if (h.level_bits < 1 || h.level_bits > 8) throw FormatError("level bits out of range");
  if (h.delta_q == 0) throw FormatError("zero quantization step");
  if (h.gamma_q == 0 || h.gamma_q >= 10000) throw FormatError("gamma out of range");
  if (h.flags & 0x0E) throw FormatError("reserved header flags set");
  if (s.templates.empty() || s.templates.front().frame_no != 0) throw FormatError("first template must be frame 0");
  for (std::size_t i = 0; i < s.templates.size(); ++i) {
    if (s.templates[i].frame_no >= h.frame_count) throw FormatError("template frame out of range");
    if (i && s.templates[i].frame_no <= s.templates[i - 1].frame_no)
      throw FormatError("template frames not strictly increasing");
  }
  for (std::size_t i = 0; i < s.foregrounds.size(); ++i) {
    const auto& f = s.foregrounds[i];
    if (f.frame_no >= h.frame_count) throw FormatError("foreground frame out of range");
    if (i && f.frame_no <= s.foregrounds[i - 1].frame_no) throw FormatError("foreground frames not strictly increasing");
    if (f.regions.empty()) throw FormatError("foreground record without regions");
    if (f.regions.size() > 0xFFFF) throw FormatError("too many regions");
    for (std::size_t a = 0; a < f.regions.size(); ++a) {
      const Region& r = f.regions[a];
      if (r.w < 8 || r.h < 8 || r.x % 8 || r.y % 8 || r.w % 8 || r.h % 8 || !r.inside(h.width, h.height))
        throw FormatError("foreground region not 8-aligned inside the frame");
      for (std::size_t b = 0; b < a; ++b)
        if (r.overlaps(f.regions[b])) throw FormatError("foreground regions overlap");
    }
  }
}

namespace container_detail {

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void magic(const char* m) { out_.insert(out_.end(), m, m + 4); }
  std::size_t size() const { return out_.size(); }
  std::vector<std::uint8_t> take() && { return std::move(out_); }
  std::span<const std::uint8_t> view() const { return out_; }

 private:
  void le(std::uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> data, std::size_t pos = 0) : data_(data), pos_(pos) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  std::span<const std::uint8_t> bytes(std::size_t n) {
    need(n);
    auto s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  bool magic(const char* m) { return std::memcmp(bytes(4).data(), m, 4) == 0; }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (n > data_.size() - pos_) throw FormatError("truncated stream at byte " + std::to_string(pos_));
  }
  std::uint64_t le(int n) {
    need(static_cast<std::size_t>(n));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + i]) << (8 * i);
    pos_ += static_cast<std::size_t>(n);
    return v;
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_;
};

struct RecordRef {
  std::uint32_t frame_no;
  std::uint8_t tag;
  std::size_t index;
};

/// Records in stream order: by frame, template before foreground.
inline std::vector<RecordRef> record_order(const FbvStream& s) {
  std::vector<RecordRef> order;
  for (std::size_t i = 0; i < s.templates.size(); ++i) order.push_back({s.templates[i].frame_no, kTagTemplate, i});
  for (std::size_t i = 0; i < s.foregrounds.size(); ++i)
    order.push_back({s.foregrounds[i].frame_no, kTagForeground, i});
  std::stable_sort(order.begin(), order.end(), [](const RecordRef& a, const RecordRef& b) {
    return a.frame_no != b.frame_no ? a.frame_no < b.frame_no : a.tag < b.tag;
  });
  return order;
}

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (!bytes.empty()) {
    const auto n = std::min<std::size_t>(bytes.size(), 1u << 30);
    crc = crc32(crc, bytes.data(), static_cast<uInt>(n));
    bytes = bytes.subspan(n);
  }
  return static_cast<std::uint32_t>(crc);
}

inline void write_header(Writer& w, const StreamHeader& h) {
  w.magic("FBVC");
  w.u8(kStreamVersion);
  w.u16(h.width);
  w.u16(h.height);
  w.u16(h.fps_num);
  w.u16(h.fps_den);
  w.u32(h.frame_count);
  w.u8(h.level_bits);
  w.u16(h.delta_q);
  w.u16(h.gamma_q);
  w.u8(h.flags);
}

}  // namespace container_detail

inline std::vector<std::uint8_t> write_stream(const FbvStream& s, StreamLayout* layout_out = nullptr) {
  using namespace container_detail;
  validate_stream(s);
  Writer w;
  write_header(w, s.header);
  StreamLayout layout;
  for (const auto& ref : record_order(s)) {
    const std::uint64_t offset = w.size();
    w.u8(ref.tag);
    w.u32(ref.frame_no);
    if (ref.tag == kTagTemplate) {
      const auto& t = s.templates[ref.index];
      w.u32(static_cast<std::uint32_t>(t.payload.size()));
      w.bytes(t.payload);
      layout.bg_index.push_back({ref.frame_no, offset});
    } else {
      const auto& f = s.foregrounds[ref.index];
      w.u32(static_cast<std::uint32_t>(f.payload_size()));
      w.u16(static_cast<std::uint16_t>(f.regions.size()));
      for (const auto& r : f.regions) {
        w.u16(static_cast<std::uint16_t>(r.x));
        w.u16(static_cast<std::uint16_t>(r.y));
        w.u16(static_cast<std::uint16_t>(r.w));
        w.u16(static_cast<std::uint16_t>(r.h));
      }
      w.u32(static_cast<std::uint32_t>(f.flow.size()));
      w.bytes(f.flow);
      w.u32(static_cast<std::uint32_t>(f.residual.size()));
      w.bytes(f.residual);
      layout.fg_index.push_back({ref.frame_no, offset});
    }
  }
  layout.segments = non_foreground_segments(s);
  layout.bg_index_offset = w.size();
  w.u32(static_cast<std::uint32_t>(layout.bg_index.size()));
  for (const auto& e : layout.bg_index) {
    w.u32(e.frame_no);
    w.u64(e.offset);
  }
  layout.fg_index_offset = w.size();
  w.u32(static_cast<std::uint32_t>(layout.fg_index.size()));
  for (const auto& e : layout.fg_index) {
    w.u32(e.frame_no);
    w.u64(e.offset);
  }
  w.u32(static_cast<std::uint32_t>(layout.segments.size()));
  for (const auto& g : layout.segments) {
    w.u32(g.start);
    w.u32(g.end);
  }
  w.u64(layout.bg_index_offset);
  w.u64(layout.fg_index_offset);
  w.u32(crc32_of(w.view()));
  w.magic("FBIX");
  layout.total_bytes = w.size();
  if (layout_out) *layout_out = layout;
  return std::move(w).take();
}

/// Parses and fully validates a stream: header, every record, both index
/// tables and the segment list must agree.
inline FbvStream read_stream(std::span<const std::uint8_t> bytes, StreamLayout* layout_out = nullptr) {
  using namespace container_detail;
  if (bytes.size() < kStreamHeaderBytes + kFooterBytes) throw FormatError("truncated stream: too short");
  Reader hr(bytes);
  if (!hr.magic("FBVC")) throw FormatError("bad magic");
  if (const auto v = hr.u8(); v != kStreamVersion) throw FormatError("unsupported version " + std::to_string(v));
  FbvStream s;
  auto& h = s.header;
  h.width = hr.u16();
  h.height = hr.u16();
  h.fps_num = hr.u16();
  h.fps_den = hr.u16();
  h.frame_count = hr.u32();
  h.level_bits = hr.u8();
  h.delta_q = hr.u16();
  h.gamma_q = hr.u16();
  h.flags = hr.u8();

  Reader fr(bytes, bytes.size() - kFooterBytes);
  const std::uint64_t bg_off = fr.u64();
  const std::uint64_t fg_off = fr.u64();
  const std::uint32_t stored_crc = fr.u32();
  if (!fr.magic("FBIX")) throw FormatError("bad index footer");
  const std::uint64_t index_end = bytes.size() - kFooterBytes;
  if (bg_off < kStreamHeaderBytes || bg_off > fg_off || fg_off > index_end)
    throw FormatError("index offset out of bounds");

  StreamLayout layout;
  layout.bg_index_offset = bg_off;
  layout.fg_index_offset = fg_off;
  layout.total_bytes = bytes.size();

  auto region_bytes = bytes.first(index_end);
  Reader rr(region_bytes, kStreamHeaderBytes);
  std::vector<IndexEntry> seen_bg, seen_fg;
  while (rr.pos() < bg_off) {
    const std::uint64_t offset = rr.pos();
    const auto tag = rr.u8();
    const auto frame_no = rr.u32();
    const auto len = rr.u32();
    if (offset + 9 + len > bg_off) throw FormatError("record overruns the index");
    auto payload = rr.bytes(len);
    if (tag == kTagTemplate) {
      s.templates.push_back({frame_no, {payload.begin(), payload.end()}});
      seen_bg.push_back({frame_no, offset});
    } else if (tag == kTagForeground) {
      Reader pr(payload);
      ForegroundRecord f;
      f.frame_no = frame_no;
      const auto n = pr.u16();
      for (int i = 0; i < n; ++i) {
        Region r;
        r.x = pr.u16();
        r.y = pr.u16();
        r.w = pr.u16();
        r.h = pr.u16();
        f.regions.push_back(r);
      }
      auto flow = pr.bytes(pr.u32());
      f.flow.assign(flow.begin(), flow.end());
      auto res = pr.bytes(pr.u32());
      f.residual.assign(res.begin(), res.end());
      if (pr.remaining() != 0) throw FormatError("foreground payload length disagrees with its contents");
      s.foregrounds.push_back(std::move(f));
      seen_fg.push_back({frame_no, offset});
    } else {
      throw FormatError("unknown record tag " + std::to_string(tag));
    }
  }
  if (rr.pos() != bg_off) throw FormatError("records do not end at the background index");

  Reader ir(region_bytes, bg_off);
  const auto nbg = ir.u32();
  if (nbg > ir.remaining() / 12) throw FormatError("truncated background index");
  for (std::uint32_t i = 0; i < nbg; ++i) {
    IndexEntry e;
    e.frame_no = ir.u32();
    e.offset = ir.u64();
    layout.bg_index.push_back(e);
  }
  if (ir.pos() != fg_off) throw FormatError("background index size disagrees with footer");
  const auto nfg = ir.u32();
  if (nfg > ir.remaining() / 12) throw FormatError("truncated foreground index");
  for (std::uint32_t i = 0; i < nfg; ++i) {
    IndexEntry e;
    e.frame_no = ir.u32();
    e.offset = ir.u64();
    layout.fg_index.push_back(e);
  }
  const auto nseg = ir.u32();
  if (nseg > ir.remaining() / 8) throw FormatError("truncated segment list");
  for (std::uint32_t i = 0; i < nseg; ++i) {
    Segment g;
    g.start = ir.u32();
    g.end = ir.u32();
    layout.segments.push_back(g);
  }
  if (ir.remaining() != 0) throw FormatError("trailing bytes before footer");

  // Record order must be canonical: by frame, template before foreground.
  {
    auto order = record_order(s);
    std::vector<IndexEntry> all;
    std::size_t bi = 0, fi = 0;
    for (const auto& ref : order)
      all.push_back(ref.tag == kTagTemplate ? seen_bg.at(bi++) : seen_fg.at(fi++));
    for (std::size_t i = 1; i < all.size(); ++i)
      if (all[i].offset <= all[i - 1].offset) throw FormatError("records out of order");
  }

  validate_stream(s);
  if (layout.bg_index != seen_bg) throw FormatError("background index disagrees with records");
  if (layout.fg_index != seen_fg) throw FormatError("foreground index disagrees with records");
  if (layout.segments != non_foreground_segments(s))
    throw FormatError("segment list does not cover exactly the frames without foreground");
  if (crc32_of(bytes.first(bytes.size() - 8)) != stored_crc) throw FormatError("checksum mismatch");
  if (layout_out) *layout_out = std::move(layout);
  return s;
}

/// Categorized payload bits: template payloads are background, residual bytes
/// are foreground residual, and the rest of each foreground payload (regions,
/// length fields, flow) is foreground motion. Sums to all record payload bits.
inline BitBudgetReport stream_bit_cost(const FbvStream& s) {
  std::vector<TaggedPayload> p;
  for (const auto& t : s.templates) p.push_back({PayloadKind::kBackgroundResidual, t.payload.size()});
  for (const auto& f : s.foregrounds) {
    p.push_back({PayloadKind::kForegroundResidual, f.residual.size()});
    p.push_back({PayloadKind::kForegroundMotion, f.payload_size() - f.residual.size()});
  }
  return bit_cost(p);
}

/// Everything needed to reconstruct one frame.
struct RetrievalPlan {
  std::uint32_t frame_no = 0;
  std::size_t template_prev = 0;  // index into templates
  std::size_t template_next = 0;  // == template_prev when the frame holds a template
  std::uint32_t interval = 0;     // m; 0 when holding the last template
  std::uint32_t offset = 0;       // j
  std::optional<std::size_t> foreground;     // index into foregrounds
  std::optional<std::uint64_t> fg_offset;    // byte offset of that record
  /// Foreground records (indices, ascending) whose reconstructions feed the
  /// prediction of this frame, ending with `foreground` itself.
  std::vector<std::size_t> fg_chain;
  /// Templates to decode, ascending, starting at an anchor.
  std::vector<std::size_t> template_chain;

  bool background_only() const { return !foreground.has_value(); }
};

/// Index of the latest template with frame_no <= t.
inline std::size_t template_at_or_before(const FbvStream& s, std::uint32_t t) {
  auto it = std::upper_bound(s.templates.begin(), s.templates.end(), t,
                             [](std::uint32_t v, const TemplateRecord& r) { return v < r.frame_no; });
  if (it == s.templates.begin()) throw FormatError("no template at or before frame " + std::to_string(t));
  return static_cast<std::size_t>(it - s.templates.begin()) - 1;
}

/// Template used as the prediction canvas for foreground frame t.
inline std::size_t reference_template(const FbvStream& s, std::uint32_t t) {
  return template_at_or_before(s, t == 0 ? 0 : t - 1);
}

/// True when foreground frame t is predicted from the template alone.
inline bool starts_prediction_run(const FbvStream& s, std::size_t fg_index) {
  const auto t = s.foregrounds[fg_index].frame_no;
  if (t == 0) return true;
  const auto period = s.header.refresh_period();
  if (period && t % period == 0) return true;
  return fg_index == 0 || s.foregrounds[fg_index - 1].frame_no != t - 1;
}

inline bool template_is_anchor(const TemplateRecord& r) { return !r.payload.empty() && (r.payload[0] & 1); }

inline RetrievalPlan lookup(const FbvStream& s, const StreamLayout& layout, std::uint32_t frame_no) {
  if (frame_no >= s.header.frame_count)
    throw std::out_of_range("frame " + std::to_string(frame_no) + " outside [0, " +
                            std::to_string(s.header.frame_count) + ")");
  RetrievalPlan p;
  p.frame_no = frame_no;
  p.template_prev = template_at_or_before(s, frame_no);
  const auto& prev = s.templates[p.template_prev];
  if (prev.frame_no == frame_no || p.template_prev + 1 == s.templates.size()) {
    p.template_next = p.template_prev;
  } else {
    p.template_next = p.template_prev + 1;
    p.interval = s.templates[p.template_next].frame_no - prev.frame_no;
    p.offset = s.templates[p.template_next].frame_no - frame_no;
  }

  std::size_t lowest_template = p.template_prev;
  auto it = std::lower_bound(s.foregrounds.begin(), s.foregrounds.end(), frame_no,
                             [](const ForegroundRecord& r, std::uint32_t v) { return r.frame_no < v; });
  if (it != s.foregrounds.end() && it->frame_no == frame_no) {
    const auto idx = static_cast<std::size_t>(it - s.foregrounds.begin());
    p.foreground = idx;
    p.fg_offset = layout.fg_index.at(idx).offset;
    std::size_t first = idx;
    while (!starts_prediction_run(s, first)) --first;
    for (std::size_t i = first; i <= idx; ++i) p.fg_chain.push_back(i);
    lowest_template = std::min(lowest_template, reference_template(s, s.foregrounds[first].frame_no));
  }
  std::size_t start = lowest_template;
  while (start > 0 && !template_is_anchor(s.templates[start])) --start;
  for (std::size_t i = start; i <= p.template_next; ++i) p.template_chain.push_back(i);
  return p;
}

inline RetrievalPlan lookup(const FbvStream& s, std::uint32_t frame_no) {
  StreamLayout layout;
  write_stream(s, &layout);
  return lookup(s, layout, frame_no);
}

}  // namespace fbv
