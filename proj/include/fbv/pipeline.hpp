#pragma once

// End-to-end encoder and decoder.
//
// Encoder, per frame t:
//   separation     GMM update -> background candidate b_t, raw points p_t
//   background     template gate on b_t; new templates are residual-coded
//   foreground     m_t = FP(x_{t-1}) | FP(x_t); block motion against the
//                  prediction reference; residual coding; closed-loop f_bar_t
//
// The prediction reference for foreground frame t is the latest template with
// frame number <= t-1, with f_bar_{t-1} pasted over m_{t-1}. A frame whose
// predecessor had no foreground, or whose number is a multiple of the refresh
// period, uses the bare template. Both paths therefore only need templates of
// earlier frames, which is what lets them run concurrently.

#include <algorithm>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>
#include <vector>

#include "fbv/bgmodel.hpp"
#include "fbv/bgtemplate.hpp"
#include "fbv/config.hpp"
#include "fbv/container.hpp"
#include "fbv/decode_pipeline.hpp"
#include "fbv/fgregion.hpp"
#include "fbv/motion.hpp"
#include "fbv/reports.hpp"
#include "fbv/residual_codec.hpp"

namespace fbv {

/// Reconstructions shared by encoder and decoder (pre-enhancement).
struct Reconstruction {
  std::vector<Frame> composites;   // x_hat_t
  std::vector<Frame> foregrounds;  // f_bar_t, zero outside m_t (all zero without foreground)
  std::vector<Frame> backgrounds;  // b_bar_t
  std::vector<Mask> masks;         // m_t
};

struct EncodeResult {
  FbvStream stream;
  std::vector<std::uint8_t> bytes;
  StreamLayout layout;
  Reconstruction recon;
  std::vector<Frame> output;  // enhanced frames, as a decoder with the same feather width produces
  QualityReport quality;
  BitBudgetReport bits;
  TimingReport timing;
  std::vector<double> template_trace;  // MS-SSIM of each candidate against the then-current template
};

namespace pipeline_detail {

inline Frame prediction_reference(const Frame& template_image, const Frame* prev_fg, const Mask* prev_mask) {
  Frame ref = template_image;
  if (prev_fg)
    for (int c = 0; c < kChannels; ++c)
      for (int y = 0; y < ref.height(); ++y)
        for (int x = 0; x < ref.width(); ++x)
          if (prev_mask->at(x, y)) ref.at(c, x, y) = prev_fg->at(c, x, y);
  return ref;
}

inline QualityPoint header_quality(const StreamHeader& h) {
  QualityPoint q;
  q.delta_q = h.delta_q;
  q.level_bits = h.level_bits;
  q.perceptual_weights = h.perceptual_weights();
  return q;
}

/// Background of frame t from the decoded templates (indexed like s.templates).
inline Frame background_at(const FbvStream& s, const std::vector<std::optional<BackgroundTemplate>>& tpl,
                           std::uint32_t t) {
  const auto i = template_at_or_before(s, t);
  const auto& prev = tpl.at(i).value();
  Frame out;
  if (prev.frame_index == t || i + 1 == s.templates.size()) {
    out = prev.image;
  } else {
    const auto& next = tpl.at(i + 1).value();
    const int m = static_cast<int>(next.frame_index - prev.frame_index);
    out = interpolate_background(prev.image, next.image, m, static_cast<int>(next.frame_index - t));
  }
  out.set_frame_index(t);
  return out;
}

/// Decodes foreground record `idx` given its prediction reference.
inline Frame decode_foreground(const FbvStream& s, std::size_t idx, const Frame& reference, TimingReport* timing) {
  const auto& rec = s.foregrounds[idx];
  const int w = s.header.width, h = s.header.height;
  FlowField flow;
  ResidualPlane r;
  {
    std::optional<StageClock> clk;
    if (timing) clk.emplace(timing->residual_codec);
    flow = decode_flow(rec.flow, rec.regions);
    r = decode_residual(rec.residual, w, h, rec.regions, header_quality(s.header), PlaneKind::kForeground);
  }
  std::optional<StageClock> clk;
  if (timing) clk.emplace(timing->motion_compensation);
  const Frame warped = warp(reference, flow);
  Frame out = reconstruct_foreground(predict(reference, warped, flow), r);
  out.set_frame_index(rec.frame_no);
  return out;
}

/// Decodes the templates listed in `chain` (ascending, first one self-contained).
inline void decode_templates(const FbvStream& s, std::span<const std::size_t> chain,
                             std::vector<std::optional<BackgroundTemplate>>& out) {
  out.resize(s.templates.size());
  const BackgroundTemplate* prev = nullptr;
  for (auto i : chain) {
    if (!out[i]) {
      const auto& rec = s.templates[i];
      out[i] = decode_template(prev, rec.payload, rec.frame_no, s.header.width, s.header.height);
    }
    prev = &*out[i];
  }
}

/// Published template images for the foreground path.
class TemplateBoard {
 public:
  void publish(std::int64_t frame, std::shared_ptr<const Frame> image) {
    std::lock_guard lock(mu_);
    if (image) entries_.emplace_back(frame, std::move(image));
    done_ = frame + 1;
    cv_.notify_all();
  }
  void fail() {
    std::lock_guard lock(mu_);
    failed_ = true;
    cv_.notify_all();
  }
  /// Latest template with frame <= t, once frames [0, t] have been processed.
  std::shared_ptr<const Frame> at_or_before(std::int64_t t) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return failed_ || done_ > t; });
    if (failed_) throw std::runtime_error("background path failed");
    std::shared_ptr<const Frame> best;
    for (const auto& [f, img] : entries_)
      if (f <= t) best = img;
    return best;
  }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::pair<std::int64_t, std::shared_ptr<const Frame>>> entries_;
  std::int64_t done_ = 0;
  bool failed_ = false;
};

inline void check_input(const VideoSequence& in) {
  if (in.frames.empty()) throw ConfigError("input video has no frames");
  const int w = in.width(), h = in.height();
  if (w % 8 || h % 8) throw ConfigError("frame dimensions must be multiples of 8");
  if (w > 0xFFFF || h > 0xFFFF) throw ConfigError("frame dimensions exceed 65535");
  if (in.frames.size() > 0xFFFFFFFFull) throw ConfigError("too many frames");
  if (in.fps.num <= 0 || in.fps.den <= 0 || in.fps.num > 0xFFFF || in.fps.den > 0xFFFF)
    throw ConfigError("frame rate must be a ratio of 16-bit positive integers");
  for (const auto& f : in.frames)
    if (f.width() != w || f.height() != h) throw ConfigError("frames differ in size");
}

}  // namespace pipeline_detail

inline EncodeResult encode(const VideoSequence& in, const EncoderConfig& cfg) {
  using namespace pipeline_detail;
  validate(cfg);
  check_input(in);
  const auto t_start = std::chrono::steady_clock::now();
  const int W = in.width(), H = in.height();
  const std::size_t N = in.frames.size();
  const QualityPoint fg_q = cfg.fg_quality();

  EncodeResult res;
  TimingReport& timing = res.timing;
  timing.frames = N;

  // Separation. Training runs over the first min(N, init) frames, then
  // every frame (training prefix included) is classified by the trained model.
  std::vector<Frame> candidates(N);
  std::vector<Mask> points(N);
  {
    StageClock clk(timing.separation);
    GmmParams gp = cfg.gmm;
    gp.init_frames = static_cast<int>(std::min<std::size_t>(N, static_cast<std::size_t>(gp.init_frames)));
    GmmState state = gmm_init(std::span(in.frames).first(static_cast<std::size_t>(gp.init_frames)), gp);
    for (std::size_t t = 0; t < N; ++t) {
      auto sep = state.update(in.frames[t]);
      candidates[t] = std::move(sep.background);
      candidates[t].set_frame_index(static_cast<std::int64_t>(t));
      points[t] = std::move(sep.points);
    }
  }

  // Background path.
  TemplateBoard board;
  TemplateChain chain(cfg.gamma, cfg.bg_quality(), cfg.anchor_period);
  auto background_path = [&] {
    try {
      StageClock clk(timing.background);
      for (std::size_t t = 0; t < N; ++t) {
        const BackgroundTemplate* added = chain.offer(candidates[t]);
        board.publish(static_cast<std::int64_t>(t), added ? std::make_shared<const Frame>(added->image) : nullptr);
      }
    } catch (...) {
      board.fail();
      throw;
    }
  };

  // Foreground path.
  std::vector<ForegroundRecord> fg_records;
  Reconstruction& rc = res.recon;
  rc.foregrounds.assign(N, Frame());
  rc.masks.assign(N, Mask());
  auto foreground_path = [&] {
    StageClock clk(timing.foreground);
    const std::uint32_t period = cfg.refresh_exponent ? (1u << cfg.refresh_exponent) : 0;
    RegionSet prev_fp = empty_region_set(W, H);
    bool prev_has_fg = false;
    std::vector<Region> prev_regions;
    for (std::size_t t = 0; t < N; ++t) {
      const Frame& x = in.frames[t];
      RegionSet cur_fp = fp(x, points[t], cfg.regions);
      RegionSet m = combine_masks(prev_fp, cur_fp);
      prev_fp = std::move(cur_fp);
      rc.masks[t] = m.mask;
      if (m.empty()) {
        rc.foregrounds[t] = Frame(W, H, 0, static_cast<std::int64_t>(t));
        prev_has_fg = false;
        continue;
      }
      const auto tpl = board.at_or_before(t == 0 ? 0 : static_cast<std::int64_t>(t) - 1);
      const bool run_start = t == 0 || !prev_has_fg || (period && t % period == 0);
      const Mask prev_mask = run_start ? Mask() : mask_from_regions(prev_regions, W, H);
      const Frame ref = prediction_reference(*tpl, run_start ? nullptr : &rc.foregrounds[t - 1], &prev_mask);

      FlowField flow;
      {
        StageClock c(timing.motion_estimation);
        flow = estimate_flow(ref, x, m.regions, cfg.motion);
      }
      Frame pred;
      {
        StageClock c(timing.motion_compensation);
        pred = predict(ref, warp(ref, flow), flow);
      }
      ForegroundRecord rec;
      rec.frame_no = static_cast<std::uint32_t>(t);
      rec.regions = m.regions;
      {
        StageClock c(timing.residual_codec);
        rec.flow = encode_flow(flow);
        ResidualPlane r(W, H, m.regions);
        for (const auto& reg : m.regions)
          for (int ch = 0; ch < kChannels; ++ch)
            for (int y = reg.y; y < reg.bottom(); ++y)
              for (int xx = reg.x; xx < reg.right(); ++xx)
                r.at(ch, xx, y) = static_cast<std::int16_t>(x.at(ch, xx, y) - pred.at(ch, xx, y));
        const auto levels = quantize_residual(r, fg_q);
        rec.residual = encode_levels(levels, m.regions, fg_q, PlaneKind::kForeground);
        rc.foregrounds[t] = reconstruct_foreground(pred, reconstruct_residual(levels, W, H, m.regions, fg_q));
        rc.foregrounds[t].set_frame_index(static_cast<std::int64_t>(t));
      }
      fg_records.push_back(std::move(rec));
      prev_regions = m.regions;
      prev_has_fg = true;
    }
  };

  if (cfg.parallel) {
    std::exception_ptr bg_error;
    std::thread bg([&] {
      try {
        background_path();
      } catch (...) {
        bg_error = std::current_exception();
      }
    });
    std::exception_ptr fg_error;
    try {
      foreground_path();
    } catch (...) {
      fg_error = std::current_exception();
    }
    bg.join();
    if (bg_error) std::rethrow_exception(bg_error);
    if (fg_error) std::rethrow_exception(fg_error);
  } else {
    background_path();
    foreground_path();
  }
  candidates.clear();

  // Assembly.
  FbvStream& s = res.stream;
  s.header.width = static_cast<std::uint16_t>(W);
  s.header.height = static_cast<std::uint16_t>(H);
  s.header.fps_num = static_cast<std::uint16_t>(in.fps.num);
  s.header.fps_den = static_cast<std::uint16_t>(in.fps.den);
  s.header.frame_count = static_cast<std::uint32_t>(N);
  s.header.level_bits = static_cast<std::uint8_t>(fg_q.level_bits);
  s.header.delta_q = fg_q.delta_q;
  s.header.gamma_q = static_cast<std::uint16_t>(std::floor(cfg.gamma * 10000.0 + 0.5));
  s.header.flags = make_header_flags(cfg.perceptual_weights, cfg.refresh_exponent);
  std::vector<std::optional<BackgroundTemplate>> tpl;
  for (const auto& t : chain.templates()) {
    s.templates.push_back({static_cast<std::uint32_t>(t.frame_index), t.payload});
    tpl.emplace_back(t);
  }
  s.foregrounds = std::move(fg_records);
  res.template_trace = chain.trace();
  res.bytes = write_stream(s, &res.layout);
  res.bits = stream_bit_cost(s);

  {
    StageClock clk(timing.decoding);
    for (std::size_t t = 0; t < N; ++t) {
      rc.backgrounds.push_back(background_at(s, tpl, static_cast<std::uint32_t>(t)));
      auto comp = composite(rc.foregrounds[t], rc.backgrounds[t], rc.masks[t]);
      res.output.push_back(enhance(comp, cfg.feather_width));
      res.output.back().set_frame_index(static_cast<std::int64_t>(t));
      rc.composites.push_back(std::move(comp.image));
    }
  }
  timing.encode_total = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t_start).count();
  res.quality = measure_quality(in.frames, res.output, rc.foregrounds, rc.masks, res.bytes.size(), res.bits);
  average_timing(timing);
  return res;
}

struct DecodeOptions {
  bool enhance = true;
  int feather_width = 3;
};

struct DecodeResult {
  FbvStream stream;
  VideoSequence video;  // final output (enhanced unless disabled)
  Reconstruction recon;
  TimingReport timing;
};

inline DecodeResult decode(std::span<const std::uint8_t> bytes, const DecodeOptions& opt = {}) {
  using namespace pipeline_detail;
  DecodeResult res;
  StreamLayout layout;
  res.stream = read_stream(bytes, &layout);
  const FbvStream& s = res.stream;
  const int W = s.header.width, H = s.header.height;
  const std::size_t N = s.header.frame_count;
  res.video.fps = {s.header.fps_num, s.header.fps_den};
  res.timing.frames = N;
  auto& rc = res.recon;

  std::vector<std::optional<BackgroundTemplate>> tpl;
  {
    StageClock clk(res.timing.background);
    std::vector<std::size_t> all(s.templates.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    decode_templates(s, all, tpl);
  }
  StageClock clk(res.timing.decoding);
  std::size_t next_fg = 0;
  for (std::size_t t = 0; t < N; ++t) {
    const auto tn = static_cast<std::uint32_t>(t);
    Mask mask(W, H);
    Frame fg(W, H, 0, static_cast<std::int64_t>(t));
    if (next_fg < s.foregrounds.size() && s.foregrounds[next_fg].frame_no == tn) {
      const auto& rec = s.foregrounds[next_fg];
      mask = mask_from_regions(rec.regions, W, H);
      const Frame& canvas = tpl[reference_template(s, tn)]->image;
      Frame ref;
      if (starts_prediction_run(s, next_fg)) {
        ref = prediction_reference(canvas, nullptr, nullptr);
      } else {
        const Mask prev_mask = mask_from_regions(s.foregrounds[next_fg - 1].regions, W, H);
        ref = prediction_reference(canvas, &rc.foregrounds[t - 1], &prev_mask);
      }
      fg = decode_foreground(s, next_fg, ref, &res.timing);
      ++next_fg;
    }
    rc.backgrounds.push_back(background_at(s, tpl, tn));
    auto comp = composite(fg, rc.backgrounds.back(), mask);
    Frame out = opt.enhance ? enhance(comp, opt.feather_width) : comp.image;
    out.set_frame_index(static_cast<std::int64_t>(t));
    res.video.frames.push_back(std::move(out));
    rc.foregrounds.push_back(std::move(fg));
    rc.masks.push_back(std::move(mask));
    rc.composites.push_back(std::move(comp.image));
  }
  average_timing(res.timing);
  return res;
}

struct FrameDecode {
  Frame output;     // enhanced unless disabled
  Frame composite;  // pre-enhancement
  RetrievalPlan plan;
};

/// Random access: reconstructs one frame from its retrieval plan, touching
/// only the templates and foreground records the plan lists.
inline FrameDecode decode_frame(std::span<const std::uint8_t> bytes, std::uint32_t frame_no,
                                const DecodeOptions& opt = {}) {
  using namespace pipeline_detail;
  StreamLayout layout;
  const FbvStream s = read_stream(bytes, &layout);
  const int W = s.header.width, H = s.header.height;
  FrameDecode out;
  out.plan = lookup(s, layout, frame_no);
  std::vector<std::optional<BackgroundTemplate>> tpl;
  decode_templates(s, out.plan.template_chain, tpl);

  Mask mask(W, H);
  Frame fg(W, H, 0, frame_no);
  Frame prev_fg;
  Mask prev_mask;
  for (std::size_t k = 0; k < out.plan.fg_chain.size(); ++k) {
    const auto idx = out.plan.fg_chain[k];
    const auto& rec = s.foregrounds[idx];
    const Frame& canvas = tpl.at(reference_template(s, rec.frame_no)).value().image;
    const Frame ref = k == 0 ? prediction_reference(canvas, nullptr, nullptr)
                             : prediction_reference(canvas, &prev_fg, &prev_mask);
    prev_fg = decode_foreground(s, idx, ref, nullptr);
    prev_mask = mask_from_regions(rec.regions, W, H);
  }
  if (!out.plan.background_only()) {
    fg = prev_fg;
    mask = prev_mask;
  }
  auto comp = composite(fg, background_at(s, tpl, frame_no), mask);
  out.output = opt.enhance ? enhance(comp, opt.feather_width) : comp.image;
  out.output.set_frame_index(frame_no);
  out.composite = std::move(comp.image);
  out.composite.set_frame_index(frame_no);
  return out;
}

struct AnalyzeReport {
  FbvStream stream;
  StreamLayout layout;
  BitBudgetReport bits;
  double bpp = 0.0;
};

inline AnalyzeReport analyze(std::span<const std::uint8_t> bytes) {
  AnalyzeReport r;
  r.stream = read_stream(bytes, &r.layout);
  r.bits = stream_bit_cost(r.stream);
  r.bpp = bpp(bytes.size(), r.stream.header.width, r.stream.header.height, r.stream.header.frame_count);
  return r;
}

inline void print_analysis(std::ostream& os, const AnalyzeReport& r) {
  const auto& h = r.stream.header;
  char buf[160];
  os << "header\n";
  std::snprintf(buf, sizeof buf,
                "  %ux%u  fps %u/%u  frames %u  L %u  delta %.4f  gamma %.4f  flags 0x%02x (refresh %u)\n", h.width,
                h.height, h.fps_num, h.fps_den, h.frame_count, h.level_bits, h.delta_q / 256.0, h.gamma(), h.flags,
                h.refresh_period());
  os << buf;
  os << "records\n  kind        frame     offset    payload  regions\n";
  std::vector<std::pair<std::uint64_t, std::string>> rows;
  for (std::size_t i = 0; i < r.stream.templates.size(); ++i) {
    const auto& t = r.stream.templates[i];
    std::snprintf(buf, sizeof buf, "  template %8u %10llu %10zu        -%s\n", t.frame_no,
                  static_cast<unsigned long long>(r.layout.bg_index[i].offset), t.payload.size(),
                  template_is_anchor(t) ? "  anchor" : "");
    rows.emplace_back(r.layout.bg_index[i].offset, buf);
  }
  for (std::size_t i = 0; i < r.stream.foregrounds.size(); ++i) {
    const auto& f = r.stream.foregrounds[i];
    std::snprintf(buf, sizeof buf, "  foreground %6u %10llu %10zu %8zu\n", f.frame_no,
                  static_cast<unsigned long long>(r.layout.fg_index[i].offset), f.payload_size(), f.regions.size());
    rows.emplace_back(r.layout.fg_index[i].offset, buf);
  }
  std::sort(rows.begin(), rows.end());
  for (const auto& row : rows) os << row.second;
  std::snprintf(buf, sizeof buf, "background index (offset %llu): %zu entries\n",
                static_cast<unsigned long long>(r.layout.bg_index_offset), r.layout.bg_index.size());
  os << buf;
  for (const auto& e : r.layout.bg_index) os << "  " << e.frame_no << " @ " << e.offset << "\n";
  std::snprintf(buf, sizeof buf, "foreground index (offset %llu): %zu entries\n",
                static_cast<unsigned long long>(r.layout.fg_index_offset), r.layout.fg_index.size());
  os << buf;
  for (const auto& e : r.layout.fg_index) os << "  " << e.frame_no << " @ " << e.offset << "\n";
  os << "non-foreground segments: " << r.layout.segments.size() << "\n";
  for (const auto& g : r.layout.segments) os << "  " << g.start << "-" << g.end << "\n";
  os << "bit allocation\n";
  std::snprintf(buf, sizeof buf, "  BR  %12llu bits  %.4f\n  FR  %12llu bits  %.4f\n  FMV %12llu bits  %.4f\n",
                static_cast<unsigned long long>(r.bits.bits_bg_residual), r.bits.ratio_bg_residual(),
                static_cast<unsigned long long>(r.bits.bits_fg_residual), r.bits.ratio_fg_residual(),
                static_cast<unsigned long long>(r.bits.bits_fg_motion), r.bits.ratio_fg_motion());
  os << buf;
  std::snprintf(buf, sizeof buf, "bpp %.6f (%llu bytes)\n", r.bpp, static_cast<unsigned long long>(r.layout.total_bytes));
  os << buf;
}

struct RdPoint {
  double quality = 0.0;
  double delta = 0.0;
  std::size_t bytes = 0;
  double bpp = 0.0;
  double psnr = 0.0;
  double ms_ssim = 0.0;
  double fb_mixture = 0.0;
};

/// One encode/measure cycle per quality value, in the given order.
inline std::vector<RdPoint> rd_sweep(const VideoSequence& in, std::span<const double> qualities, EncoderConfig cfg) {
  if (qualities.size() < 2) throw ConfigError("rd sweep needs at least two quality points");
  std::vector<RdPoint> out;
  for (double q : qualities) {
    cfg.fg_delta = delta_for_quality(q);
    const auto r = encode(in, cfg);
    out.push_back({q, cfg.fg_delta, r.bytes.size(), r.quality.bpp, r.quality.mean_psnr, r.quality.mean_ms_ssim,
                   r.quality.fb_mixture});
  }
  return out;
}

inline void write_rd_csv(std::ostream& os, std::span<const RdPoint> pts) {
  os << "quality,delta,bytes,bpp,psnr,ms_ssim,fb_mixture\n";
  char buf[192];
  for (const auto& p : pts) {
    std::snprintf(buf, sizeof buf, "%.4f,%.6f,%zu,%.6f,%.4f,%.6f,%.6f\n", p.quality, p.delta, p.bytes, p.bpp, p.psnr,
                  p.ms_ssim, p.fb_mixture);
    os << buf;
  }
}

inline nlohmann::json rd_json(std::span<const RdPoint> pts) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : pts)
    arr.push_back({{"quality", p.quality}, {"delta", p.delta}, {"bytes", p.bytes}, {"bpp", p.bpp}, {"psnr", p.psnr},
                   {"ms_ssim", p.ms_ssim}, {"fb_mixture", p.fb_mixture}});
  return {{"points", arr}};
}

}  // namespace fbv
