#pragma once

#include <chrono>
#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fbv/core.hpp"
#include "fbv/entropy.hpp"
#include "fbv/fgregion.hpp"
#include "fbv/metrics.hpp"

namespace fbv {

struct QualityReport {
  std::vector<double> psnr;
  std::vector<double> ms_ssim;
  double mean_psnr = 0.0;
  double mean_ms_ssim = 0.0;
  double bpp = 0.0;
  double fb_mixture = 0.0;
  double sharpness = 0.0;
  double rd_objective = 0.0;
};

/// Per-stage mean wall time in milliseconds per frame.
struct TimingReport {
  std::size_t frames = 0;
  double separation = 0.0;
  double background = 0.0;
  double foreground = 0.0;
  double decoding = 0.0;
  double motion_estimation = 0.0;
  double motion_compensation = 0.0;
  double residual_codec = 0.0;
  double encode_total = 0.0;
};

/// Accumulates wall time into a millisecond total.
class StageClock {
 public:
  explicit StageClock(double& total_ms) : total_(total_ms), start_(std::chrono::steady_clock::now()) {}
  ~StageClock() {
    total_ += std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start_).count();
  }
  StageClock(const StageClock&) = delete;
  StageClock& operator=(const StageClock&) = delete;

 private:
  double& total_;
  std::chrono::steady_clock::time_point start_;
};

inline void average_timing(TimingReport& t) {
  if (t.frames == 0) return;
  const double n = static_cast<double>(t.frames);
  for (double* v : {&t.separation, &t.background, &t.foreground, &t.decoding, &t.motion_estimation,
                    &t.motion_compensation, &t.residual_codec, &t.encode_total})
    *v /= n;
}

inline void print_timing(std::ostream& os, const TimingReport& t) {
  char buf[96];
  auto row = [&](const char* name, double v) {
    std::snprintf(buf, sizeof buf, "  %-26s %10.3f ms/frame\n", name, v);
    os << buf;
  };
  os << "timing (" << t.frames << " frames)\n";
  row("separation", t.separation);
  row("background compression", t.background);
  row("foreground compression", t.foreground);
  row("  motion estimation", t.motion_estimation);
  row("  motion compensation", t.motion_compensation);
  row("  residual codec", t.residual_codec);
  row("two-stage decoding", t.decoding);
  row("encode total", t.encode_total);
}

inline Frame zero_inside(const Frame& f, const Mask& m) {
  Frame out = f;
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < f.height(); ++y)
      for (int x = 0; x < f.width(); ++x)
        if (m.at(x, y)) out.at(c, x, y) = 0;
  return out;
}

/// Measures decoded output against the source. `fg_recon` holds the decoded
/// foreground of each frame (zero outside its mask).
inline QualityReport measure_quality(std::span<const Frame> original, std::span<const Frame> output,
                                     std::span<const Frame> fg_recon, std::span<const Mask> masks,
                                     std::size_t stream_bytes, const BitBudgetReport& bits,
                                     const RdWeights& weights = {}) {
  const std::size_t n = original.size();
  if (n == 0 || output.size() != n || fg_recon.size() != n || masks.size() != n)
    throw std::invalid_argument("measure_quality: sequence length mismatch");
  QualityReport q;
  double ms_fg = 0.0, ms_bg = 0.0, fg_pixels = 0.0, objective = 0.0;
  std::size_t fg_frames = 0;
  const BitBudgetReport no_bits;
  for (std::size_t i = 0; i < n; ++i) {
    q.psnr.push_back(psnr(original[i], output[i]));
    q.ms_ssim.push_back(ms_ssim(original[i], output[i]));
    q.mean_psnr += q.psnr.back();
    q.mean_ms_ssim += q.ms_ssim.back();
    q.sharpness += laplacian_sharpness(output[i]);
    const Frame f = extract_foreground(original[i], masks[i]);
    objective += rd_objective(std::span(&original[i], 1), std::span(&output[i], 1), std::span(&f, 1),
                              std::span(&fg_recon[i], 1), std::span(&masks[i], 1), no_bits, weights);
    ms_bg += ms_ssim(zero_inside(original[i], masks[i]), zero_inside(output[i], masks[i]));
    if (const long c = masks[i].count(); c > 0) {
      fg_pixels += static_cast<double>(c);
      ms_fg += ms_ssim(f, fg_recon[i]);
      ++fg_frames;
    }
  }
  const double dn = static_cast<double>(n);
  const int w = original[0].width(), h = original[0].height();
  q.mean_psnr /= dn;
  q.mean_ms_ssim /= dn;
  q.sharpness /= dn;
  q.bpp = fbv::bpp(stream_bytes, w, h, n);
  ms_bg /= dn;
  ms_fg = fg_frames ? ms_fg / static_cast<double>(fg_frames) : ms_bg;
  const double r_f = fg_pixels / (dn * w * h);
  q.fb_mixture = fb_mixture(ms_fg, ms_bg, r_f, 1.0 - r_f);
  q.rd_objective = objective / dn + weights.theta * static_cast<double>(bits.total()) / (dn * w * h);
  return q;
}

/// One row per frame plus a summary row.
inline void write_quality_csv(std::ostream& os, const QualityReport& q) {
  os << "frame,psnr,ms_ssim\n";
  char buf[128];
  for (std::size_t i = 0; i < q.psnr.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.4f,%.6f\n", i, q.psnr[i], q.ms_ssim[i]);
    os << buf;
  }
  std::snprintf(buf, sizeof buf, "mean,%.4f,%.6f\n", q.mean_psnr, q.mean_ms_ssim);
  os << buf;
}

inline nlohmann::json to_json(const QualityReport& q) {
  return {{"mean_psnr", q.mean_psnr}, {"mean_ms_ssim", q.mean_ms_ssim}, {"bpp", q.bpp},
          {"fb_mixture", q.fb_mixture}, {"sharpness", q.sharpness}, {"rd_objective", q.rd_objective},
          {"frames", q.psnr.size()}};
}

inline nlohmann::json to_json(const BitBudgetReport& b) {
  return {{"bits_bg_residual", b.bits_bg_residual}, {"bits_fg_residual", b.bits_fg_residual},
          {"bits_fg_motion", b.bits_fg_motion}, {"BR", b.ratio_bg_residual()}, {"FR", b.ratio_fg_residual()},
          {"FMV", b.ratio_fg_motion()}};
}

inline nlohmann::json to_json(const TimingReport& t) {
  return {{"frames", t.frames}, {"separation_ms", t.separation}, {"background_ms", t.background},
          {"foreground_ms", t.foreground}, {"decoding_ms", t.decoding},
          {"motion_estimation_ms", t.motion_estimation}, {"motion_compensation_ms", t.motion_compensation},
          {"residual_codec_ms", t.residual_codec}, {"encode_total_ms", t.encode_total}};
}

}  // namespace fbv
