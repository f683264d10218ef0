#include <gtest/gtest.h>

#include <map>
#include <random>

#include "fixtures.hpp"

using namespace fbv;

namespace {

Mask blob(int w, int h, const Region& r) {
  Mask m(w, h);
  m.fill(r);
  return m;
}

void expect_valid(const RegionSet& rs, int w, int h) {
  for (std::size_t i = 0; i < rs.regions.size(); ++i) {
    const auto& r = rs.regions[i];
    EXPECT_TRUE(r.inside(w, h));
    EXPECT_EQ(r.x % 8, 0);
    EXPECT_EQ(r.y % 8, 0);
    EXPECT_TRUE(r.w % 8 == 0 || r.right() == w);
    EXPECT_TRUE(r.h % 8 == 0 || r.bottom() == h);
    EXPECT_GE(r.w, 8);
    EXPECT_GE(r.h, 8);
    for (std::size_t j = 0; j < i; ++j) EXPECT_FALSE(r.overlaps(rs.regions[j]));
  }
  EXPECT_EQ(rs.mask, mask_from_regions(rs.regions, w, h));
}

// Brute-force 8-connected labelling by repeated relaxation.
std::vector<Region> oracle_boxes(const Mask& m) {
  const int w = m.width(), h = m.height();
  std::vector<int> label(static_cast<std::size_t>(w) * h, -1);
  int next = 0;
  for (int i = 0; i < w * h; ++i)
    if (m.at(i % w, i / w)) label[static_cast<std::size_t>(i)] = next++;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        auto& l = label[static_cast<std::size_t>(y * w + x)];
        if (l < 0) continue;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            const int o = label[static_cast<std::size_t>(ny * w + nx)];
            if (o >= 0 && o < l) {
              l = o;
              changed = true;
            }
          }
      }
  }
  std::map<int, Region> boxes;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int l = label[static_cast<std::size_t>(y * w + x)];
      if (l < 0) continue;
      auto it = boxes.find(l);
      if (it == boxes.end()) boxes[l] = {x, y, 1, 1};
      else it->second = it->second.united({x, y, 1, 1});
    }
  std::vector<Region> out;
  for (auto& [l, r] : boxes) out.push_back(r);
  return out;
}

}  // namespace

TEST(RegionProposal, EmptyPointsGiveEmptySet) {
  const Frame f(64, 64);
  EXPECT_TRUE(fp(f, Mask(64, 64)).empty());
}

TEST(RegionProposal, SolidBlobSnapsOutward) {
  const Frame f(96, 96);
  const Region b{40, 40, 20, 20};
  const auto rs = fp(f, blob(96, 96, b));
  ASSERT_EQ(rs.regions.size(), 1u);
  const Region& r = rs.regions[0];
  // 5x5 dilation grows the blob by 2 on each side, then the box snaps to 8s.
  EXPECT_EQ(r, snap_to_grid(Region{38, 38, 24, 24}, 96, 96));
  for (int y = b.y; y < b.bottom(); ++y)
    for (int x = b.x; x < b.right(); ++x) EXPECT_TRUE(rs.mask.at(x, y));
  expect_valid(rs, 96, 96);
}

TEST(RegionProposal, NearbyBlobsMerge) {
  const Frame f(128, 96);
  Mask m = blob(128, 96, {20, 20, 12, 12});
  m.fill({34, 22, 12, 12});  // gap of 2 px closes under dilation
  const auto rs = fp(f, m);
  ASSERT_EQ(rs.regions.size(), 1u);
  EXPECT_TRUE(rs.regions[0].contains(20, 20));
  EXPECT_TRUE(rs.regions[0].contains(45, 33));
  expect_valid(rs, 128, 96);
}

TEST(RegionProposal, IsolatedPointsRemoved) {
  const Frame f(64, 64);
  Mask m(64, 64);
  for (int i = 0; i < 10; ++i) m.set(5 * i + 3, (7 * i) % 60 + 2);
  EXPECT_TRUE(fp(f, m).empty());
}

TEST(RegionProposal, RandomMasksMatchComponentOracle) {
  std::mt19937 rng(41);
  for (int iter = 0; iter < 40; ++iter) {
    const int w = 64 + 8 * static_cast<int>(rng() % 5), h = 48 + 8 * static_cast<int>(rng() % 5);
    Mask pts(w, h);
    const int nblobs = 1 + static_cast<int>(rng() % 4);
    for (int b = 0; b < nblobs; ++b) {
      Region r{static_cast<int>(rng() % (w - 12)), static_cast<int>(rng() % (h - 12)), 4 + static_cast<int>(rng() % 8),
               4 + static_cast<int>(rng() % 8)};
      pts.fill(r);
    }
    const auto rs = fp(Frame(w, h), pts);
    expect_valid(rs, w, h);

    // Oracle: same morphology through the public helpers, independent labelling,
    // then every surviving component box must lie inside the emitted mask.
    Mask m = region_detail::majority(pts, 3);
    m = region_detail::dilate(region_detail::erode(m, 3), 3);
    m = region_detail::dilate(m, 5);
    for (const auto& box : oracle_boxes(m)) {
      long pixels = 0;
      for (int y = box.y; y < box.bottom(); ++y)
        for (int x = box.x; x < box.right(); ++x) pixels += m.at(x, y);
      if (pixels < 16) continue;
      for (int y = box.y; y < box.bottom(); ++y)
        for (int x = box.x; x < box.right(); ++x) ASSERT_TRUE(rs.mask.at(x, y));
    }
  }
}

TEST(CombineMasks, EmptyPreviousIsIdentity) {
  const auto cur = make_region_set({{8, 8, 16, 16}}, 64, 64);
  EXPECT_EQ(combine_masks(empty_region_set(64, 64), cur).mask, cur.mask);
}

TEST(CombineMasks, DisjointRegionsStaySeparate) {
  const auto a = make_region_set({{0, 0, 8, 8}}, 64, 64);
  const auto b = make_region_set({{32, 32, 16, 8}}, 64, 64);
  const auto m = combine_masks(a, b);
  EXPECT_EQ(m.regions.size(), 2u);
  EXPECT_EQ(m.mask.count(), 64 + 128);
}

TEST(CombineMasks, IdempotentAndDominant) {
  std::mt19937 rng(43);
  for (int iter = 0; iter < 50; ++iter) {
    auto random_set = [&] {
      std::vector<Region> rs;
      for (int k = 0; k < 3; ++k)
        rs.push_back({8 * static_cast<int>(rng() % 8), 8 * static_cast<int>(rng() % 6), 8 + 8 * static_cast<int>(rng() % 3),
                      8 + 8 * static_cast<int>(rng() % 3)});
      return make_region_set(rs, 96, 80);
    };
    const auto a = random_set(), b = random_set();
    EXPECT_EQ(combine_masks(a, a).mask, a.mask);
    const auto m = combine_masks(a, b);
    for (int y = 0; y < 80; ++y)
      for (int x = 0; x < 96; ++x)
        if (a.mask.at(x, y) || b.mask.at(x, y)) ASSERT_TRUE(m.mask.at(x, y));
    expect_valid(m, 96, 80);
  }
}

TEST(ExtractForeground, MaskSelectsPixels) {
  std::mt19937 rng(47);
  const Frame f = fixtures::random_frame(48, 40, rng);
  EXPECT_EQ(extract_foreground(f, Mask(48, 40, true)), f);
  EXPECT_EQ(extract_foreground(f, Mask(48, 40)), Frame(48, 40));
  const Region r{5, 7, 20, 13};
  const Mask m = mask_from_regions(std::vector<Region>{r}, 48, 40);
  const Frame e = extract_foreground(f, m);
  for (int c = 0; c < kChannels; ++c)
    for (int y = 0; y < 40; ++y)
      for (int x = 0; x < 48; ++x) EXPECT_EQ(e.at(c, x, y), r.contains(x, y) ? f.at(c, x, y) : 0);
  EXPECT_EQ(extract_foreground(e, m), e);
}
