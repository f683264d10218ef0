#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace fbv;

namespace {

// Exhaustive integer search, written without the matcher.
MotionVector oracle_vector(const Frame& prev, const Frame& cur, int bx, int by, int range) {
  long best = -1;
  MotionVector bv;
  for (int vy = -range; vy <= range; ++vy)
    for (int vx = -range; vx <= range; ++vx) {
      long sad = 0;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x)
          sad += std::abs(cur.at(0, bx + x, by + y) - prev.plane(0).clamped(bx + x - vx, by + y - vy));
      if (best < 0 || sad < best) {
        best = sad;
        bv = {2 * vx, 2 * vy};
      }
    }
  return bv;
}

}  // namespace

TEST(Motion, IdenticalFramesGiveZeroFlow) {
  const Frame f = fixtures::textured_frame(64, 64, 3);
  const auto flow = estimate_flow(f, f, {{0, 0, 64, 64}});
  ASSERT_EQ(flow.vectors.size(), 64u);
  for (auto v : flow.vectors) EXPECT_EQ(v, MotionVector{});
}

TEST(Motion, GlobalTranslationRecoveredInInterior) {
  const Frame prev = fixtures::textured_frame(96, 96, 5);
  const Frame cur = fixtures::translated(prev, 3, -2);
  const Region r{16, 16, 64, 64};
  const auto flow = estimate_flow(prev, cur, {r});
  std::size_t i = 0;
  for (int by = r.y; by < r.bottom(); by += 8)
    for (int bx = r.x; bx < r.right(); bx += 8, ++i) {
      EXPECT_EQ(flow.vectors[i], (MotionVector{6, -4})) << bx << "," << by;
      EXPECT_EQ(oracle_vector(prev, cur, bx, by, 6), (MotionVector{6, -4}));
    }
}

TEST(Motion, FlatBlockPrefersZero) {
  const Frame flat(32, 32, 77);
  const auto flow = estimate_flow(flat, flat, {{8, 8, 8, 8}});
  EXPECT_EQ(flow.vectors[0], MotionVector{});
}

TEST(Motion, SearchNeverWorseThanZero) {
  std::mt19937 rng(13);
  for (int iter = 0; iter < 10; ++iter) {
    const Frame prev = fixtures::textured_frame(64, 64, static_cast<std::uint32_t>(rng()));
    const Frame cur = fixtures::translated(prev, static_cast<int>(rng() % 9) - 4, static_cast<int>(rng() % 9) - 4);
    const auto flow = estimate_flow(prev, cur, {{0, 0, 64, 64}});
    std::size_t i = 0;
    for (int by = 0; by < 64; by += 8)
      for (int bx = 0; bx < 64; bx += 8, ++i)
        EXPECT_LE(block_sad(prev, cur, bx, by, flow.vectors[i]), block_sad(prev, cur, bx, by, {}));
  }
}

TEST(Motion, FlowCodingRoundTrips) {
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> d(-kMaxHalfPel, kMaxHalfPel);
  for (int iter = 0; iter < 50; ++iter) {
    FlowField flow;
    flow.regions = {{0, 0, 8 + 8 * static_cast<int>(rng() % 4), 16}, {40, 8, 16, 8 + 8 * static_cast<int>(rng() % 3)}};
    for (const auto& r : flow.regions)
      for (int k = 0; k < (r.w / 8) * (r.h / 8); ++k) flow.vectors.push_back({d(rng), d(rng)});
    EXPECT_EQ(decode_flow(encode_flow(flow), flow.regions), flow);
  }
}

TEST(Motion, UniformFieldCodesOneNonzeroSymbol) {
  FlowField flow;
  flow.regions = {{0, 0, 32, 24}};
  flow.vectors.assign(12, MotionVector{6, -4});
  const auto res = flow_prediction_residuals(flow);
  EXPECT_EQ(res[0], (MotionVector{6, -4}));
  for (std::size_t i = 1; i < res.size(); ++i) EXPECT_EQ(res[i], MotionVector{});
}

TEST(Motion, OutOfRangeVectorRejected) {
  FlowField flow{{{0, 0, 8, 8}}, {{kMaxHalfPel + 1, 0}}};
  EXPECT_THROW(encode_flow(flow), std::out_of_range);
}

TEST(Motion, WarpZeroFlowCopiesRegions) {
  const Frame prev = fixtures::textured_frame(48, 32, 9);
  const Region r{8, 8, 16, 16};
  const FlowField flow{{r}, std::vector<MotionVector>(4)};
  const Frame w = warp(prev, flow);
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < 32; ++y)
      for (int x = 0; x < 48; ++x) EXPECT_EQ(w.at(c, x, y), r.contains(x, y) ? prev.at(c, x, y) : 0);
}

TEST(Motion, WarpIntegerAndHalfPel) {
  Frame ramp(64, 16);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 64; ++x) ramp.at(0, x, y) = static_cast<std::uint8_t>(2 * x);
  const Region r{16, 0, 16, 16};
  const Frame half = warp(ramp, FlowField{{r}, std::vector<MotionVector>(4, MotionVector{1, 0})});
  const Frame whole = warp(ramp, FlowField{{r}, std::vector<MotionVector>(4, MotionVector{4, 0})});
  for (int y = 0; y < 16; ++y)
    for (int x = r.x; x < r.right(); ++x) {
      EXPECT_EQ(half.at(0, x, y), 2 * x - 1);
      EXPECT_EQ(whole.at(0, x, y), 2 * (x - 2));
    }
}

TEST(Motion, PredictIsTheWarpedFrame) {
  const Frame prev = fixtures::textured_frame(32, 32, 4);
  const FlowField flow{{{0, 0, 16, 16}}, std::vector<MotionVector>(4, MotionVector{2, 2})};
  const Frame w = warp(prev, flow);
  EXPECT_EQ(predict(prev, w, flow), w);
}

TEST(Motion, UnalignedRegionsRejected) {
  const Frame f(32, 32);
  EXPECT_THROW(estimate_flow(f, f, {{4, 0, 8, 8}}), std::invalid_argument);
  EXPECT_THROW(estimate_flow(f, f, {}), std::invalid_argument);
}
