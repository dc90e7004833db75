#include "uma/intervals.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

using namespace uma;

namespace {

bool is_gc(Round s, Round e) {
  const Round len = e - s + 1;
  return len > 0 && (len & (len - 1)) == 0 && s % len == 0 && s >= len;
}

// minimum number of GC intervals tiling [p, q], by dynamic programming
std::vector<int> min_cover_from(Round p, Round q) {
  std::vector<int> best(static_cast<std::size_t>(q - p + 2), 1 << 20);
  best[0] = 0;
  for (Round x = p; x <= q; ++x) {
    const int here = best[static_cast<std::size_t>(x - p)];
    for (Round len = 1; x + len - 1 <= q; len <<= 1)
      if (is_gc(x, x + len - 1)) {
        auto& slot = best[static_cast<std::size_t>(x + len - p)];
        slot = std::min(slot, here + 1);
      }
  }
  return best;
}

}  // namespace

TEST(Log2, Basics) {
  EXPECT_EQ(ceil_log2(1), 0);
  EXPECT_EQ(ceil_log2(2), 1);
  EXPECT_EQ(ceil_log2(3), 2);
  EXPECT_EQ(ceil_log2(1024), 10);
  EXPECT_EQ(ceil_log2(1025), 11);
  EXPECT_EQ(floor_log2(1), 0);
  EXPECT_EQ(floor_log2(1023), 9);
  EXPECT_EQ(floor_log2(1024), 10);
}

TEST(GCIntervals, UniqueMembershipPerLevel) {
  for (Round t = 1; t <= 1024; ++t) {
    const auto live = intervals_containing(t);
    ASSERT_EQ(static_cast<int>(live.size()), floor_log2(t) + 1);
    std::set<int> levels;
    for (const auto& I : live) {
      ASSERT_TRUE(I.contains(t));
      ASSERT_TRUE(is_gc(I.start, I.end));
      ASSERT_TRUE(levels.insert(I.level).second);
    }
    // brute force over all level-k intervals
    for (int k = 0; (Round{1} << k) <= t; ++k) {
      int hits = 0;
      for (Round i = 1; i * (Round{1} << k) <= t; ++i)
        if (gc_interval(i << k, k).contains(t)) ++hits;
      ASSERT_EQ(hits, 1) << "t=" << t << " k=" << k;
    }
  }
}

TEST(GCIntervals, StartingAtMatchesDivisibility) {
  for (Round t = 1; t <= 1024; ++t) {
    const auto born = intervals_starting_at(t);
    std::size_t expected = 0;
    for (int k = 0; (Round{1} << k) <= t; ++k) expected += t % (Round{1} << k) == 0;
    ASSERT_EQ(born.size(), expected);
    for (const auto& I : born) ASSERT_EQ(I.start, t);
  }
  EXPECT_THROW(intervals_starting_at(0), InputError);
}

TEST(Partition, ExhaustiveAgainstCoverOracle) {
  for (Round p = 1; p <= 256; ++p) {
    const auto best = min_cover_from(p, 256);
    for (Round q = p; q <= 256; ++q) {
      const auto part = partition(p, q);
      std::string why;
      ASSERT_TRUE(is_valid_partition(part, p, q, &why)) << p << "," << q << ": " << why;
      ASSERT_EQ(static_cast<int>(part.pieces.size()), best[static_cast<std::size_t>(q - p + 1)]);
      ASSERT_LE(static_cast<int>(part.pieces.size()), partition_piece_bound(p, q));
      double root_sum = 0.0;
      for (const auto& I : part.pieces) root_sum += std::sqrt(static_cast<double>(I.length()));
      ASSERT_LE(root_sum, 7.0 * std::sqrt(static_cast<double>(q - p + 1)));
      ASSERT_EQ(part.pieces[part.pivot].length(), std::max_element(part.pieces.begin(), part.pieces.end(),
                                                                   [](const auto& a, const auto& b) {
                                                                     return a.length() < b.length();
                                                                   })->length());
    }
  }
}

TEST(Partition, Examples) {
  const auto part = partition(3, 12);
  // [3,3] [4,7] [8,11] [12,12]
  ASSERT_EQ(part.pieces.size(), 4u);
  EXPECT_EQ(part.pieces[1], gc_interval(4, 2));
  EXPECT_EQ(part.pieces[2], gc_interval(8, 2));
  EXPECT_EQ(part.pivot, 1u);
  EXPECT_THROW(partition(5, 4), InputError);
  EXPECT_THROW(partition(0, 4), InputError);
}

TEST(Partition, ValidatorRejectsBadTilings) {
  IntervalPartition bad;
  bad.pieces = {gc_interval(2, 0), gc_interval(4, 1)};
  EXPECT_FALSE(is_valid_partition(bad, 2, 5));
  // a tiling by singletons is not the doubling-then-halving shape
  bad.pieces = {gc_interval(2, 0), gc_interval(3, 0), gc_interval(4, 0)};
  EXPECT_FALSE(is_valid_partition(bad, 2, 4));
  bad.pieces = {gc_interval(3, 0), gc_interval(4, 2), gc_interval(8, 0)};
  EXPECT_TRUE(is_valid_partition(bad, 3, 8));
  bad.pieces = {{3, 4, 1}};
  EXPECT_FALSE(is_valid_partition(bad, 3, 4));
}

TEST(Scheduler, BirthsAndDeathsTrackTheLiveSet) {
  LifetimeScheduler sched(1024);
  std::size_t born = 0, died = 0;
  for (Round t = 1; t <= 1024; ++t) {
    const auto life = active_lifetimes(sched, t);
    born += life.born.size();
    died += life.dying.size();
    for (const auto& I : life.dying) ASSERT_EQ(I.end, t);
    // after removing the dying, every live interval continues past t
    for (const auto& I : sched.live()) ASSERT_GT(I.end, t);
    ASSERT_EQ(sched.live().size() + life.dying.size(), intervals_containing(t).size());
  }
  EXPECT_EQ(born - died, sched.live().size());
}

TEST(Scheduler, OutOfOrderIsAUsageError) {
  LifetimeScheduler sched;
  sched.advance(1);
  EXPECT_THROW(sched.advance(3), UsageError);
  EXPECT_THROW(sched.advance(1), UsageError);
}
