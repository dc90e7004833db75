#pragma once

#include "uma/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace uma {

// smallest k with 2^k >= n (n >= 1)
inline int ceil_log2(Round n) {
  if (n < 1) throw InputError("ceil_log2 needs n >= 1");
  int k = 0;
  while ((Round{1} << k) < n) ++k;
  return k;
}

// largest k with 2^k <= n (n >= 1)
inline int floor_log2(Round n) {
  if (n < 1) throw InputError("floor_log2 needs n >= 1");
  int k = 0;
  while ((Round{1} << (k + 1)) <= n) ++k;
  return k;
}

// Level-k intervals are [i·2^k, (i+1)·2^k − 1] for i ≥ 1.
struct GCInterval {
  Round start = 1;
  Round end = 1;
  int level = 0;

  Round length() const { return end - start + 1; }
  bool contains(Round t) const { return start <= t && t <= end; }
  bool operator==(const GCInterval&) const = default;

  std::string str() const { return "[" + std::to_string(start) + "," + std::to_string(end) + "]"; }
};

inline GCInterval gc_interval(Round start, int level) { return {start, start + (Round{1} << level) - 1, level}; }

// Intervals whose start is t, ordered by level.
inline std::vector<GCInterval> intervals_starting_at(Round t) {
  if (t < 1) throw InputError("round index must be >= 1");
  std::vector<GCInterval> out;
  for (int k = 0; (Round{1} << k) <= t; ++k) {
    if (t % (Round{1} << k) == 0) out.push_back(gc_interval(t, k));
  }
  return out;
}

// The level-k interval containing t (requires t >= 2^k).
inline GCInterval interval_containing(Round t, int level) {
  const Round len = Round{1} << level;
  if (t < len) throw InputError("round precedes the first level-" + std::to_string(level) + " interval");
  return gc_interval((t / len) * len, level);
}

inline std::vector<GCInterval> intervals_containing(Round t) {
  std::vector<GCInterval> out;
  for (int k = 0; (Round{1} << k) <= t; ++k) out.push_back(interval_containing(t, k));
  return out;
}

// All GC intervals fully inside [1, horizon].
inline std::vector<GCInterval> intervals_within(Round horizon) {
  std::vector<GCInterval> out;
  for (Round t = 1; t <= horizon; ++t)
    for (const auto& I : intervals_starting_at(t))
      if (I.end <= horizon) out.push_back(I);
  return out;
}

// ---------------------------------------------------------------------------
// Partition of [p,q] into GC intervals: lengths strictly double up to the
// pivot, then (after the piece following the pivot) strictly halve.

struct IntervalPartition {
  std::vector<GCInterval> pieces;
  std::size_t pivot = 0;
};

inline int partition_piece_bound(Round p, Round q) { return 2 * ceil_log2(q - p + 2); }

inline IntervalPartition partition(Round p, Round q) {
  if (p < 1) throw InputError("partition needs p >= 1");
  if (p > q) throw InputError("partition needs p <= q");
  IntervalPartition part;
  Round x = p;
  while (x <= q) {
    int k = 0;
    // longest aligned block at x that fits in [x, q]
    while (x % (Round{1} << (k + 1)) == 0 && x + (Round{1} << (k + 1)) - 1 <= q) ++k;
    part.pieces.push_back(gc_interval(x, k));
    x += Round{1} << k;
  }
  std::size_t pivot = 0;
  for (std::size_t i = 1; i < part.pieces.size(); ++i)
    if (part.pieces[i].length() > part.pieces[pivot].length()) pivot = i;
  part.pivot = pivot;
  return part;
}

inline bool is_valid_partition(const IntervalPartition& part, Round p, Round q, std::string* why = nullptr) {
  auto fail = [&](const std::string& msg) {
    if (why) *why = msg;
    return false;
  };
  if (part.pieces.empty()) return fail("no pieces");
  if (part.pivot >= part.pieces.size()) return fail("pivot out of range");
  Round next = p;
  for (const auto& I : part.pieces) {
    if (I.start != next) return fail("gap or overlap at " + I.str());
    if (I.length() != (Round{1} << I.level) || I.start % I.length() != 0 || I.start < I.length())
      return fail("not a GC interval: " + I.str());
    next = I.end + 1;
  }
  if (next != q + 1) return fail("pieces do not end at q");
  for (std::size_t i = 0; i < part.pivot; ++i)
    if (2 * part.pieces[i].length() > part.pieces[i + 1].length()) return fail("left sequence does not double");
  for (std::size_t j = part.pivot + 2; j < part.pieces.size(); ++j)
    if (2 * part.pieces[j].length() > part.pieces[j - 1].length()) return fail("right sequence does not halve");
  if (static_cast<int>(part.pieces.size()) > partition_piece_bound(p, q)) return fail("too many pieces");
  return true;
}

// ---------------------------------------------------------------------------
// Lifetime scheduling

struct Lifetimes {
  std::vector<GCInterval> born;
  std::vector<GCInterval> dying;
};

class LifetimeScheduler {
 public:
  explicit LifetimeScheduler(Round horizon_hint = 0) {
    if (horizon_hint > 0) live_.reserve(static_cast<std::size_t>(floor_log2(horizon_hint) + 2));
  }

  Round round() const { return t_; }
  const std::vector<GCInterval>& live() const { return live_; }

  // born = intervals starting at t; dying = live intervals ending at t,
  // which are dropped from the live set.
  Lifetimes advance(Round t) {
    if (t != t_ + 1)
      throw UsageError("scheduler advanced out of order: expected round " + std::to_string(t_ + 1) + ", got " +
                       std::to_string(t));
    t_ = t;
    Lifetimes out;
    out.born = intervals_starting_at(t);
    live_.insert(live_.end(), out.born.begin(), out.born.end());
    auto dead = std::stable_partition(live_.begin(), live_.end(), [t](const GCInterval& I) { return I.end != t; });
    out.dying.assign(dead, live_.end());
    live_.erase(dead, live_.end());
    return out;
  }

 private:
  Round t_ = 0;
  std::vector<GCInterval> live_;
};

inline Lifetimes active_lifetimes(LifetimeScheduler& scheduler, Round t) { return scheduler.advance(t); }

}  // namespace uma
