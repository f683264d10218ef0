#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "fbv/core.hpp"
#include "fbv/entropy.hpp"

namespace fbv {

inline constexpr double kPsnrCap = 99.0;

/// PSNR over all three channels; identical frames report kPsnrCap.
inline double psnr(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("psnr: size mismatch");
  double sse = 0.0;
  for (int c = 0; c < kChannels; ++c) {
    auto pa = a.plane(c).samples();
    auto pb = b.plane(c).samples();
    for (std::size_t i = 0; i < pa.size(); ++i) {
      const double d = static_cast<double>(pa[i]) - pb[i];
      sse += d * d;
    }
  }
  const double mse = sse / (3.0 * a.width() * a.height());
  if (mse == 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(255.0 * 255.0 / mse));
}

namespace ssim_detail {

struct Image {
  int w = 0, h = 0;
  std::vector<double> px;
  double at(int x, int y) const { return px[static_cast<std::size_t>(y) * w + x]; }
};

inline Image from_plane(const Plane& p) {
  Image im{p.width(), p.height(), std::vector<double>(p.samples().begin(), p.samples().end())};
  return im;
}

inline Image downsample(const Image& in) {
  Image out{in.w / 2, in.h / 2, {}};
  out.px.resize(static_cast<std::size_t>(out.w) * out.h);
  for (int y = 0; y < out.h; ++y)
    for (int x = 0; x < out.w; ++x)
      out.px[static_cast<std::size_t>(y) * out.w + x] =
          0.25 * (in.at(2 * x, 2 * y) + in.at(2 * x + 1, 2 * y) + in.at(2 * x, 2 * y + 1) + in.at(2 * x + 1, 2 * y + 1));
  return out;
}

inline constexpr int kWindow = 11;

inline const std::array<double, kWindow>& gaussian_window() {
  static const std::array<double, kWindow> w = [] {
    std::array<double, kWindow> g{};
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kWindow / 2;
      g[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
      sum += g[i];
    }
    for (auto& v : g) v /= sum;
    return g;
  }();
  return w;
}

/// Separable Gaussian filter, valid region only.
inline Image filter_valid(const Image& in) {
  const auto& g = gaussian_window();
  const int ow = in.w - kWindow + 1, oh = in.h - kWindow + 1;
  Image tmp{ow, in.h, std::vector<double>(static_cast<std::size_t>(ow) * in.h)};
  for (int y = 0; y < in.h; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * in.at(x + k, y);
      tmp.px[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  Image out{ow, oh, std::vector<double>(static_cast<std::size_t>(ow) * oh)};
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) acc += g[k] * tmp.at(x, y + k);
      out.px[static_cast<std::size_t>(y) * ow + x] = acc;
    }
  return out;
}

inline Image product(const Image& a, const Image& b) {
  Image out{a.w, a.h, std::vector<double>(a.px.size())};
  for (std::size_t i = 0; i < a.px.size(); ++i) out.px[i] = a.px[i] * b.px[i];
  return out;
}

/// Mean contrast-structure term and mean full SSIM at one scale.
inline std::pair<double, double> ssim_terms(const Image& a, const Image& b) {
  constexpr double c1 = (0.01 * 255) * (0.01 * 255);
  constexpr double c2 = (0.03 * 255) * (0.03 * 255);
  const Image mu_a = filter_valid(a), mu_b = filter_valid(b);
  const Image aa = filter_valid(product(a, a)), bb = filter_valid(product(b, b)), ab = filter_valid(product(a, b));
  double cs_sum = 0.0, ssim_sum = 0.0;
  for (std::size_t i = 0; i < mu_a.px.size(); ++i) {
    const double ma = mu_a.px[i], mb = mu_b.px[i];
    const double va = aa.px[i] - ma * ma, vb = bb.px[i] - mb * mb, cov = ab.px[i] - ma * mb;
    const double cs = (2.0 * cov + c2) / (va + vb + c2);
    const double l = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
    cs_sum += cs;
    ssim_sum += l * cs;
  }
  const double n = static_cast<double>(mu_a.px.size());
  return {cs_sum / n, ssim_sum / n};
}

}  // namespace ssim_detail

inline constexpr std::array<double, 5> kMsSsimWeights = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

/// Number of scales usable for a w x h image (each scale needs an 11x11 window).
inline int ms_ssim_scales(int w, int h) {
  int s = 0;
  while (s < 5 && std::min(w, h) / (1 << s) >= ssim_detail::kWindow) ++s;
  return s;
}

/// Multi-scale SSIM on luma planes. Scales are truncated for small frames and
/// the exponents renormalized; negative per-scale terms are clamped to 0.
inline double ms_ssim(const Plane& a, const Plane& b) {
  using namespace ssim_detail;
  if (a.width() != b.width() || a.height() != b.height()) throw std::invalid_argument("ms_ssim: size mismatch");
  const int scales = ms_ssim_scales(a.width(), a.height());
  if (scales == 0) throw std::invalid_argument("ms_ssim: image smaller than the 11x11 window");
  double weight_sum = 0.0;
  for (int s = 0; s < scales; ++s) weight_sum += kMsSsimWeights[s];
  Image ia = from_plane(a), ib = from_plane(b);
  double result = 1.0;
  for (int s = 0; s < scales; ++s) {
    const auto [cs, full] = ssim_terms(ia, ib);
    const double term = std::max(0.0, s == scales - 1 ? full : cs);
    result *= std::pow(term, kMsSsimWeights[s] / weight_sum);
    if (s + 1 < scales) {
      ia = downsample(ia);
      ib = downsample(ib);
    }
  }
  return std::clamp(result, 0.0, 1.0);
}

inline double ms_ssim(const Frame& a, const Frame& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("ms_ssim: size mismatch");
  return ms_ssim(to_luma(a), to_luma(b));
}

/// Cross-weighted foreground/background mixture: r_b * M_f + r_f * M_b.
inline double fb_mixture(double ms_fg, double ms_bg, double ratio_fg, double ratio_bg) {
  if (ratio_fg < 0.0 || ratio_bg < 0.0 || std::abs(ratio_fg + ratio_bg - 1.0) > 1e-9)
    throw std::invalid_argument("fb_mixture: ratios must be nonnegative and sum to 1");
  return ratio_bg * ms_fg + ratio_fg * ms_bg;
}

/// Variance of the 4-neighbour Laplacian of luma over interior pixels.
inline double laplacian_sharpness(const Frame& f) {
  const Plane& y = to_luma(f);
  double sum = 0.0, sum2 = 0.0;
  long n = 0;
  for (int r = 1; r + 1 < y.height(); ++r)
    for (int c = 1; c + 1 < y.width(); ++c) {
      const double lap = -4.0 * y.at(c, r) + y.at(c - 1, r) + y.at(c + 1, r) + y.at(c, r - 1) + y.at(c, r + 1);
      sum += lap;
      sum2 += lap * lap;
      ++n;
    }
  if (n == 0) return 0.0;
  const double mean = sum / n;
  return std::max(0.0, sum2 / n - mean * mean);
}

/// Mean squared error over all channels, optionally restricted to a mask.
inline double mse(const Frame& a, const Frame& b, const Mask* mask = nullptr) {
  if (!a.same_shape(b)) throw std::invalid_argument("mse: size mismatch");
  if (mask && (mask->width() != a.width() || mask->height() != a.height()))
    throw std::invalid_argument("mse: mask size mismatch");
  double sse = 0.0;
  long n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (mask && !mask->at(x, y)) continue;
      for (int c = 0; c < kChannels; ++c) {
        const double d = static_cast<double>(a.at(c, x, y)) - b.at(c, x, y);
        sse += d * d;
      }
      n += kChannels;
    }
  return n == 0 ? 0.0 : sse / static_cast<double>(n);
}

struct RdWeights {
  double alpha = 1.0;
  double beta = 16.0;
  double theta = 0.1;
};

/// Distortion/rate objective: alpha*E[MSE(x, x_bar)] + beta*E[MSE_mask(f, f_bar)]
/// + theta*(categorized bits per pixel over the sequence).
inline double rd_objective(std::span<const Frame> x, std::span<const Frame> x_bar, std::span<const Frame> f,
                           std::span<const Frame> f_bar, std::span<const Mask> masks, const BitBudgetReport& bits,
                           const RdWeights& w = {}) {
  if (x.size() != x_bar.size() || f.size() != f_bar.size() || f.size() != masks.size() || x.size() != f.size())
    throw std::invalid_argument("rd_objective: sequence length mismatch");
  if (x.empty()) throw std::invalid_argument("rd_objective: empty sequence");
  double dx = 0.0, df = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dx += mse(x[i], x_bar[i]);
    df += mse(f[i], f_bar[i], &masks[i]);
  }
  dx /= static_cast<double>(x.size());
  df /= static_cast<double>(x.size());
  const double pixels = static_cast<double>(x.front().width()) * x.front().height() * static_cast<double>(x.size());
  const double rate = static_cast<double>(bits.total()) / pixels;
  return w.alpha * dx + w.beta * df + w.theta * rate;
}

/// Bits per pixel for a stream of `stream_bytes` covering `frames` frames.
inline double bpp(std::size_t stream_bytes, int width, int height, std::size_t frames) {
  if (frames == 0) throw std::invalid_argument("bpp: zero frames");
  return 8.0 * static_cast<double>(stream_bytes) / (static_cast<double>(width) * height * static_cast<double>(frames));
}

}  // namespace fbv
