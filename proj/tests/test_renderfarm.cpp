#include <gtest/gtest.h>

#include <set>
#include <thread>

#include "epicsim/renderfarm.hpp"
#include "oracles.hpp"

using namespace epicsim;

namespace {

NodeSpec edge_node() { return NodeSpec{1, 5'000'000'000, 4'000'000'000, 16}; }

RenderRequest l0_request(std::uint32_t frame_id, std::uint32_t session = 1) {
  return RenderRequest{frame_id, default_ladder()[0], 1.0, session};
}

}  // namespace

TEST(Render, EdgeNodeTimes) {
  const RenderedFrame f = render(l0_request(1), edge_node(), 42);
  EXPECT_EQ(f.meta.render_time, 415);
  EXPECT_EQ(f.meta.encode_time, 519);  // ceil(2,073,600 / 4e9 * 1e6)
  EXPECT_EQ(f.meta.payload_size, 207'360u);
  EXPECT_EQ(f.payload->size(), 207'360u);
  EXPECT_EQ(f.meta.checksum, oracle::crc32_bitwise(f.payload->data(), f.payload->size()));
}

TEST(Render, DeviceClassThroughputMissesFrameBudget) {
  EXPECT_EQ(render_time(2'073'600, 1.0, 200'000'000), 10'368);
}

TEST(Render, TimeFormulaIsExact) {
  std::mt19937_64 gen(3);
  for (int i = 0; i < 1000; ++i) {
    const std::uint64_t pixels = 1 + gen() % 10'000'000;
    const std::uint64_t tp = 1 + gen() % 10'000'000'000ull;
    const std::uint64_t c_milli = 100 + gen() % 5000;  // complexity in thousandths
    const double complexity = static_cast<double>(c_milli) / 1000.0;
    const unsigned __int128 num = static_cast<unsigned __int128>(pixels) * c_milli * 1000;
    EXPECT_EQ(render_time(pixels, complexity, tp), static_cast<Micros>((num + tp - 1) / tp));
  }
  EXPECT_THROW(render_time(100, 0.05, 1), ValidationError);
  EXPECT_THROW(codec_time(100, 0), ValidationError);
}

TEST(Render, DeterministicAndDistinct) {
  const NodeSpec node = edge_node();
  const auto a = render(l0_request(7), node, 99);
  const auto b = render(l0_request(7), node, 99);
  EXPECT_EQ(a.meta, b.meta);
  EXPECT_EQ(*a.payload, *b.payload);
  std::set<std::uint32_t> checksums;
  for (std::uint32_t id = 1; id <= 1000; ++id) {
    checksums.insert(render(RenderRequest{id, default_ladder()[4], 1.0, 1}, node, 99).meta.checksum);
  }
  EXPECT_EQ(checksums.size(), 1000u);
  EXPECT_NE(render(l0_request(7, 2), node, 99).meta.checksum, a.meta.checksum);
  EXPECT_NE(render(l0_request(7), node, 100).meta.checksum, a.meta.checksum);
}

TEST(Render, OverCapacityThrows) {
  NodeSpec node = edge_node();
  node.max_sessions = 2;
  node.active_sessions = 2;
  EXPECT_NO_THROW(render(l0_request(1), node, 1));
  node.active_sessions = 3;
  EXPECT_THROW(render(l0_request(1), node, 1), CapacityError);
}

TEST(DecodeCheck, IntactAndCorrupted) {
  const Ladder ladder = default_ladder();
  const auto f = render(l0_request(3), edge_node(), 5);
  EXPECT_EQ(decode_check(f.meta, *f.payload, ladder[0], 7'000'000'000), 297);
  auto flipped = *f.payload;
  flipped[1000] ^= 0x01;
  EXPECT_THROW(decode_check(f.meta, flipped, ladder[0], 7'000'000'000), IntegrityError);
  auto truncated = *f.payload;
  truncated.pop_back();
  EXPECT_THROW(decode_check(f.meta, truncated, ladder[0], 7'000'000'000), IntegrityError);
  EXPECT_THROW(decode_check(f.meta, *f.payload, ladder[1], 7'000'000'000), IntegrityError);
}

TEST(DecodeCheck, EveryLevelRoundTrips) {
  const Ladder ladder = default_ladder();
  for (const auto& level : ladder) {
    const auto f = render(RenderRequest{1, level, 1.3, 4}, edge_node(), 11);
    EXPECT_EQ(decode_check(f.meta, *f.payload, level, 7'000'000'000),
              static_cast<Micros>((level.pixels() * 1'000'000 + 7'000'000'000 - 1) / 7'000'000'000));
  }
}

TEST(FrameCache, LookupInsertEvict) {
  FrameCache cache;
  const auto f = render(l0_request(5), edge_node(), 1);
  EXPECT_FALSE(cache.lookup(1, 5, 0));
  cache.insert(1, f);
  ASSERT_TRUE(cache.lookup(1, 5, 0));
  EXPECT_EQ(cache.lookup(1, 5, 0)->meta, f.meta);
  EXPECT_FALSE(cache.lookup(1, 5, 1));
  EXPECT_FALSE(cache.lookup(2, 5, 0));
  EXPECT_EQ(cache.hits(), 2u);
  cache.insert(2, render(l0_request(5, 2), edge_node(), 1));
  cache.evict_before(1, 6);
  EXPECT_FALSE(cache.lookup(1, 5, 0));
  EXPECT_TRUE(cache.lookup(2, 5, 0));
  EXPECT_EQ(cache.size(), 1u);
}

TEST(FrameCache, ConcurrentInsertAndLookup) {
  FrameCache cache;
  const NodeSpec node = edge_node();
  const Ladder ladder = default_ladder();
  std::vector<std::thread> workers;
  for (std::uint32_t s = 1; s <= 4; ++s) {
    workers.emplace_back([&, s] {
      for (std::uint32_t id = 1; id <= 200; ++id) {
        cache.insert(s, render(RenderRequest{id, ladder[4], 1.0, s}, node, 9));
        ASSERT_TRUE(cache.lookup(s, id, 4));
        cache.insert(s, render(RenderRequest{id, ladder[4], 1.0, s}, node, 9));
      }
    });
  }
  for (auto& w : workers) w.join();
  EXPECT_EQ(cache.size(), 800u);
  EXPECT_EQ(cache.lookup(3, 17, 4)->meta, render(RenderRequest{17, ladder[4], 1.0, 3}, node, 9).meta);
}
