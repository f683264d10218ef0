#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"

using namespace fbv;

namespace {

std::string y4m_bytes(int w, int h, int frames, const std::vector<std::uint8_t>& payload_per_frame) {
  std::string s = "YUV4MPEG2 W" + std::to_string(w) + " H" + std::to_string(h) + " F30:1 Ip A1:1 C420jpeg\n";
  for (int i = 0; i < frames; ++i) {
    s += "FRAME\n";
    s.append(payload_per_frame.begin(), payload_per_frame.end());
  }
  return s;
}

}  // namespace

TEST(VideoIo, ConstantY4mReadsAsConstantFrames) {
  const std::vector<std::uint8_t> payload(16 * 16 + 2 * 8 * 8, 128);
  std::istringstream in(y4m_bytes(16, 16, 2, payload));
  const auto seq = read_raw_video(in);
  ASSERT_EQ(seq.frames.size(), 2u);
  EXPECT_EQ(seq.fps, (Rational{30, 1}));
  for (const auto& f : seq.frames)
    for (int c = 0; c < kChannels; ++c)
      for (auto v : f.plane(c).samples()) EXPECT_EQ(v, 128);
  EXPECT_EQ(seq.frames[0].frame_index(), 0);
  EXPECT_EQ(seq.frames[1].frame_index(), 1);
}

TEST(VideoIo, TruncationNamesLastCompleteFrame) {
  const std::vector<std::uint8_t> payload(16 * 16 + 2 * 8 * 8, 90);
  std::string bytes = y4m_bytes(16, 16, 3, payload);
  bytes.resize(bytes.size() - 10);  // cut inside frame 2
  std::istringstream in(bytes);
  try {
    read_raw_video(in);
    FAIL() << "expected a truncation error";
  } catch (const FormatError& e) {
    EXPECT_NE(std::string(e.what()).find("last complete frame: 1"), std::string::npos) << e.what();
  }
}

TEST(VideoIo, MalformedHeaderRejected) {
  std::istringstream in("YUV4MPEG2 W16 Hxx\n");
  EXPECT_THROW(read_raw_video(in), FormatError);
  std::istringstream in2("NOTY4M W16 H16\n");
  EXPECT_THROW(read_raw_video(in2), FormatError);
}

TEST(VideoIo, HarnessWrittenStreamRoundTripsByteExact) {
  // 4:2:0 source bytes -> frames -> 4:2:0 bytes must be identical: chroma is
  // duplicated on ingest, and the 2x2 mean of four equal samples is exact.
  const int w = 320, h = 240, n = 30;
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> d(0, 255);
  std::string src = "YUV4MPEG2 W320 H240 F30:1 Ip A1:1 C420jpeg\n";
  for (int t = 0; t < n; ++t) {
    src += "FRAME\n";
    for (int i = 0; i < w * h * 3 / 2; ++i) src.push_back(static_cast<char>(d(rng)));
  }
  std::istringstream in(src);
  const auto seq = read_raw_video(in);
  ASSERT_EQ(seq.frames.size(), static_cast<std::size_t>(n));
  EXPECT_EQ(seq.width(), w);
  EXPECT_EQ(seq.height(), h);
  std::ostringstream out;
  write_y4m(out, seq);
  EXPECT_EQ(out.str(), src);
}

TEST(VideoIo, RawPlanarNeedsDescriptor) {
  std::vector<char> raw(16 * 16 * 3 / 2 * 2, 50);
  std::istringstream in(std::string(raw.begin(), raw.end()));
  VideoFormat fmt;
  fmt.y4m = false;
  fmt.width = 16;
  fmt.height = 16;
  const auto seq = read_raw_video(in, fmt);
  EXPECT_EQ(seq.frames.size(), 2u);
  std::istringstream in2("abc");
  VideoFormat bad;
  bad.y4m = false;
  EXPECT_THROW(read_raw_video(in2, bad), FormatError);
}

TEST(Frame, MinimumSizeEnforced) {
  EXPECT_THROW(Frame(15, 16), ConfigError);
  EXPECT_NO_THROW(Frame(16, 16));
}

TEST(Frame, ToLumaIsTheYPlane) {
  Frame f(32, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 32; ++x) f.at(0, x, y) = static_cast<std::uint8_t>(x * 8);
  const Plane& p = to_luma(f);
  EXPECT_EQ(p.width(), 32);
  EXPECT_EQ(p.height(), 16);
  for (int x = 0; x < 32; ++x) EXPECT_EQ(p.at(x, 3), x * 8);
  EXPECT_EQ(to_luma(Frame(16, 16, 128)).at(5, 5), 128);
}

TEST(Region, CropFullFrameIsIdentity) {
  const Frame f = fixtures::textured_frame(48, 32, 1);
  const Region full{0, 0, 48, 32};
  EXPECT_EQ(paste(Frame(48, 32), crop(f, full), full), f);
}

TEST(Region, CropPasteOntoZeroKeepsOnlyRegion) {
  const Frame f = fixtures::textured_frame(48, 32, 2);
  const Region r{8, 4, 20, 10};
  const Frame out = paste(Frame(48, 32), crop(f, r), r);
  for (int y = 0; y < 32; ++y)
    for (int x = 0; x < 48; ++x)
      EXPECT_EQ(out.at(0, x, y), r.contains(x, y) ? f.at(0, x, y) : 0);
}

TEST(Region, PasteCropRoundTripProperty) {
  std::mt19937 rng(9);
  for (int iter = 0; iter < 200; ++iter) {
    const int w = 16 + static_cast<int>(rng() % 64), h = 16 + static_cast<int>(rng() % 64);
    const Frame f = fixtures::random_frame(w, h, rng);
    Region r;
    r.x = static_cast<int>(rng() % w);
    r.y = static_cast<int>(rng() % h);
    r.w = 1 + static_cast<int>(rng() % (w - r.x));
    r.h = 1 + static_cast<int>(rng() % (h - r.y));
    EXPECT_EQ(paste(f, crop(f, r), r), f);
  }
}

TEST(Region, OutOfBoundsRejected) {
  const Frame f(32, 32);
  EXPECT_THROW(crop(f, Region{30, 0, 4, 4}), std::out_of_range);
  EXPECT_THROW(crop(f, Region{0, 0, 0, 4}), std::out_of_range);
}

TEST(Region, SnapToGridIsOutwardAndClamped) {
  EXPECT_EQ(snap_to_grid({3, 9, 10, 3}, 64, 64), (Region{0, 8, 16, 8}));
  EXPECT_EQ(snap_to_grid({60, 60, 4, 4}, 62, 62), (Region{56, 56, 6, 6}));
  EXPECT_EQ(snap_to_grid({8, 8, 8, 8}, 64, 64), (Region{8, 8, 8, 8}));
}

TEST(Color, Bt601RoundTripIsClose) {
  for (int r = 0; r < 256; r += 15)
    for (int g = 0; g < 256; g += 15)
      for (int b = 0; b < 256; b += 15) {
        const auto ycc = rgb_to_ycbcr(r, g, b);
        const auto rgb = ycbcr_to_rgb(ycc[0], ycc[1], ycc[2]);
        EXPECT_NEAR(rgb[0], r, 2);
        EXPECT_NEAR(rgb[1], g, 2);
        EXPECT_NEAR(rgb[2], b, 2);
      }
  const auto gray = rgb_to_ycbcr(128, 128, 128);
  EXPECT_EQ(gray[0], 128);
  EXPECT_EQ(gray[1], 128);
  EXPECT_EQ(gray[2], 128);
}
