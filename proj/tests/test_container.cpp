#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"

using namespace fbv;

namespace {

StreamHeader header(std::uint32_t frames, int w = 64, int h = 48) {
  StreamHeader hd;
  hd.width = static_cast<std::uint16_t>(w);
  hd.height = static_cast<std::uint16_t>(h);
  hd.frame_count = frames;
  hd.delta_q = 6 * 256;
  return hd;
}

ForegroundRecord fg(std::uint32_t t, std::vector<Region> regions = {{8, 8, 16, 8}}) {
  return {t, std::move(regions), {1, 2, 3}, {0, 9, 8, 7, 6}};
}

TemplateRecord tpl(std::uint32_t t, bool anchor = false) {
  return {t, {static_cast<std::uint8_t>(anchor ? 1 : 0), 0, 2, 1, 0, 0, 0, 0, 0}};
}

// Every frame in exactly one of: foreground index, segment list.
void expect_partition(const FbvStream& s, const StreamLayout& layout) {
  std::vector<int> hits(s.header.frame_count, 0);
  for (const auto& e : layout.fg_index) hits.at(e.frame_no)++;
  for (const auto& g : layout.segments)
    for (std::uint32_t t = g.start; t <= g.end; ++t) hits.at(t)++;
  for (std::uint32_t t = 0; t < s.header.frame_count; ++t) EXPECT_EQ(hits[t], 1) << t;
}

}  // namespace

TEST(Container, EmptyVideoRejected) {
  FbvStream s;
  s.header = header(0);
  s.templates.push_back(tpl(0, true));
  EXPECT_THROW(write_stream(s), FormatError);
}

TEST(Container, OneTemplateOneForegroundRoundTrips) {
  FbvStream s;
  s.header = header(2);
  s.templates.push_back(tpl(0, true));
  s.foregrounds.push_back(fg(1));
  StreamLayout layout;
  const auto bytes = write_stream(s, &layout);
  EXPECT_EQ(bytes.size(), layout.total_bytes);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "FBVC");
  EXPECT_EQ(std::string(bytes.end() - 4, bytes.end()), "FBIX");
  StreamLayout back;
  EXPECT_EQ(read_stream(bytes, &back), s);
  EXPECT_EQ(back.fg_index, layout.fg_index);
  EXPECT_EQ(back.bg_index, layout.bg_index);
  EXPECT_EQ(layout.bg_index[0].offset, kStreamHeaderBytes);
}

TEST(Container, HeaderLayoutIsLittleEndian) {
  FbvStream s;
  s.header = header(0x01020304, 320, 240);
  s.templates.push_back(tpl(0, true));
  const auto b = write_stream(s);
  EXPECT_EQ(b[4], kStreamVersion);
  EXPECT_EQ(b[5], 0x40);  // 320
  EXPECT_EQ(b[6], 0x01);
  EXPECT_EQ(b[13], 0x04);
  EXPECT_EQ(b[16], 0x01);
}

TEST(Container, GapBecomesOneSegment) {
  FbvStream s;
  s.header = header(12);
  s.templates.push_back(tpl(0, true));
  for (std::uint32_t t = 0; t < 12; ++t)
    if (t < 5 || t > 9) s.foregrounds.push_back(fg(t));
  StreamLayout layout;
  write_stream(s, &layout);
  ASSERT_EQ(layout.segments.size(), 1u);
  EXPECT_EQ(layout.segments[0], (Segment{5, 9}));
  expect_partition(s, layout);
  EXPECT_TRUE(lookup(s, 7).background_only());
  EXPECT_FALSE(lookup(s, 10).background_only());
}

TEST(Container, CorruptFooterReported) {
  FbvStream s;
  s.header = header(3);
  s.templates.push_back(tpl(0, true));
  auto bytes = write_stream(s);
  bytes.back() = 'Y';
  try {
    read_stream(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_STREQ(e.what(), "bad index footer");
  }
}

TEST(Container, BadMagicVersionAndTruncation) {
  FbvStream s;
  s.header = header(3);
  s.templates.push_back(tpl(0, true));
  s.foregrounds.push_back(fg(2));
  const auto good = write_stream(s);
  auto bad = good;
  bad[0] = 'X';
  EXPECT_THROW(read_stream(bad), FormatError);
  bad = good;
  bad[4] = 2;
  EXPECT_THROW(read_stream(bad), FormatError);
  for (std::size_t cut = 1; cut < good.size(); cut += 3) {
    std::vector<std::uint8_t> t(good.begin(), good.end() - static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(read_stream(t), FormatError) << cut;
  }
}

TEST(Container, FrameCountCoverageMismatchRejected) {
  FbvStream s;
  s.header = header(10);
  s.templates.push_back(tpl(0, true));
  s.foregrounds.push_back(fg(3));
  auto bytes = write_stream(s);
  bytes[13] = 12;  // frame_count 10 -> 12; the stored segment list no longer covers it
  EXPECT_THROW(read_stream(bytes), FormatError);
  bytes[13] = 3;  // foreground record now beyond the frame range
  EXPECT_THROW(read_stream(bytes), FormatError);
}

TEST(Container, OffsetOutOfBoundsRejected) {
  FbvStream s;
  s.header = header(3);
  s.templates.push_back(tpl(0, true));
  auto bytes = write_stream(s);
  bytes[bytes.size() - kFooterBytes] = 0xFF;  // bg_index_offset low bytes
  bytes[bytes.size() - kFooterBytes + 1] = 0xFF;
  EXPECT_THROW(read_stream(bytes), FormatError);
}

TEST(Container, InvariantViolationsRejectedOnWrite) {
  FbvStream s;
  s.header = header(5);
  s.templates.push_back(tpl(1, true));
  EXPECT_THROW(write_stream(s), FormatError);  // first template not at 0
  s.templates = {tpl(0, true)};
  s.foregrounds = {fg(1, {})};
  EXPECT_THROW(write_stream(s), FormatError);  // empty region list
  s.foregrounds = {fg(1, {{0, 0, 16, 16}, {8, 8, 16, 16}})};
  EXPECT_THROW(write_stream(s), FormatError);  // overlap
  s.foregrounds = {fg(1, {{4, 0, 8, 8}})};
  EXPECT_THROW(write_stream(s), FormatError);  // unaligned
  s.foregrounds = {fg(2), fg(2)};
  EXPECT_THROW(write_stream(s), FormatError);  // duplicate frame
  s.foregrounds.clear();
  s.header.width = 60;
  EXPECT_THROW(write_stream(s), FormatError);
}

TEST(Container, RandomizedStreamsRoundTrip) {
  std::mt19937 rng(77);
  for (int iter = 0; iter < 300; ++iter) {
    const FbvStream s = fixtures::random_stream(rng);
    StreamLayout layout;
    const auto bytes = write_stream(s, &layout);
    EXPECT_EQ(read_stream(bytes), s);
    expect_partition(s, layout);
    for (std::size_t i = 1; i < layout.bg_index.size(); ++i)
      EXPECT_LT(layout.bg_index[i - 1].frame_no, layout.bg_index[i].frame_no);
    for (const auto& e : layout.fg_index) EXPECT_EQ(bytes.at(e.offset), kTagForeground);
    for (const auto& e : layout.bg_index) EXPECT_EQ(bytes.at(e.offset), kTagTemplate);
  }
}

TEST(Container, RandomByteCorruptionAlwaysDetected) {
  std::mt19937 rng(78);
  for (int iter = 0; iter < 300; ++iter) {
    const FbvStream s = fixtures::random_stream(rng);
    auto bytes = write_stream(s);
    bytes[rng() % bytes.size()] ^= static_cast<std::uint8_t>(1 + rng() % 255);
    EXPECT_THROW(read_stream(bytes), FormatError);
  }
}

TEST(Container, PayloadDamageIsAChecksumMismatch) {
  FbvStream s;
  s.header = header(3);
  s.templates.push_back(tpl(0, true));
  StreamLayout layout;
  auto bytes = write_stream(s, &layout);
  bytes[layout.bg_index[0].offset + 9 + 4] ^= 0x10;  // inside the template payload
  try {
    read_stream(bytes);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_STREQ(e.what(), "checksum mismatch");
  }
}

TEST(Container, BitCostEqualsPayloadBytes) {
  std::mt19937 rng(79);
  for (int iter = 0; iter < 50; ++iter) {
    const FbvStream s = fixtures::random_stream(rng);
    std::uint64_t payload = 0;
    for (const auto& t : s.templates) payload += t.payload.size();
    for (const auto& f : s.foregrounds) payload += f.payload_size();
    if (payload == 0) continue;
    const auto r = stream_bit_cost(s);
    EXPECT_EQ(r.total(), 8 * payload);
    // Payload bytes are the written size minus per-record and fixed framing.
    StreamLayout layout;
    const auto bytes = write_stream(s, &layout);
    const std::uint64_t framing = kStreamHeaderBytes + 9 * (s.templates.size() + s.foregrounds.size()) +
                                  (4 + 12 * layout.bg_index.size()) + (4 + 12 * layout.fg_index.size()) +
                                  (4 + 8 * layout.segments.size()) + kFooterBytes;
    EXPECT_EQ(8 * (bytes.size() - framing), r.total());
  }
}

TEST(Lookup, TemplateFrameBracketsItself) {
  FbvStream s;
  s.header = header(200);
  s.templates = {tpl(0, true), tpl(100), tpl(140)};
  const auto p = lookup(s, 100);
  EXPECT_EQ(p.template_prev, 1u);
  EXPECT_EQ(p.template_next, 1u);
  EXPECT_EQ(p.offset, 0u);
}

TEST(Lookup, BetweenTemplates) {
  FbvStream s;
  s.header = header(200);
  s.templates = {tpl(0, true), tpl(100), tpl(140)};
  for (std::uint32_t t = 101; t < 140; ++t) {
    const auto p = lookup(s, t);
    EXPECT_EQ(p.template_prev, 1u);
    EXPECT_EQ(p.template_next, 2u);
    EXPECT_EQ(p.interval, 40u);
    EXPECT_EQ(p.offset, 140 - t);
    EXPECT_EQ(p.template_chain, (std::vector<std::size_t>{0, 1, 2}));
  }
  EXPECT_EQ(lookup(s, 150).interval, 0u);
  EXPECT_THROW(lookup(s, 200), std::out_of_range);
}

TEST(Lookup, AnchorsBoundTheTemplateChain) {
  FbvStream s;
  s.header = header(100);
  s.templates = {tpl(0, true), tpl(10), tpl(20, true), tpl(30), tpl(40)};
  EXPECT_EQ(lookup(s, 35).template_chain, (std::vector<std::size_t>{2, 3, 4}));
}

TEST(Lookup, ForegroundChainStopsAtRunStartOrRefresh) {
  FbvStream s;
  s.header = header(20);
  s.templates = {tpl(0, true)};
  for (std::uint32_t t = 5; t < 10; ++t) s.foregrounds.push_back(fg(t));
  s.foregrounds.push_back(fg(12));
  auto p = lookup(s, 7);
  ASSERT_TRUE(p.foreground);
  EXPECT_EQ(*p.foreground, 2u);
  EXPECT_EQ(p.fg_chain, (std::vector<std::size_t>{0, 1, 2}));
  EXPECT_EQ(lookup(s, 12).fg_chain, (std::vector<std::size_t>{5}));
  s.header.flags = make_header_flags(false, 1);  // refresh every 2 frames
  EXPECT_EQ(lookup(s, 7).fg_chain, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(lookup(s, 6).fg_chain, (std::vector<std::size_t>{1}));
}
