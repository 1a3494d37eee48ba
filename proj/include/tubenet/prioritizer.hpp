#ifndef TUBENET_PRIORITIZER_HPP
#define TUBENET_PRIORITIZER_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "tubenet/scenario.hpp"

namespace tubenet {

struct PrioritySpec {
  double epsilon_v = 1000.0;
  int K = 1;
  std::uint64_t rng_seed = 0;
};

/// One ordered planning sequence. `segment_bounds` lists the start offset of
/// every profit segment plus a final end offset.
struct ODSequence {
  std::vector<std::string> order;
  std::vector<std::size_t> segment_bounds;

  friend bool operator==(const ODSequence&, const ODSequence&) = default;
};

struct ArrangementCount {
  std::uint64_t value = 1;
  bool exact = true;
};

struct SequenceBatch {
  std::vector<ODSequence> sequences;
  ArrangementCount arrangements;
  int requested_k = 1;
  /// Set when distinct sequences could not be drawn within the sampling cap.
  bool contains_duplicates = false;
};

inline std::array<std::vector<ODRequest>, 4> group_by_urgency(const std::vector<ODRequest>& requests) {
  std::array<std::vector<ODRequest>, 4> out;
  for (const ODRequest& r : requests) out[static_cast<std::size_t>(r.urgency)].push_back(r);
  return out;
}

/// Sorts by descending profit (ties by id) and cuts a new segment whenever the
/// next profit falls more than epsilon_v below the current segment's maximum.
inline std::vector<std::vector<ODRequest>> segment_by_profit(std::vector<ODRequest> items, double epsilon_v) {
  std::stable_sort(items.begin(), items.end(), [](const ODRequest& a, const ODRequest& b) {
    if (a.profit != b.profit) return a.profit > b.profit;
    return a.id < b.id;
  });
  std::vector<std::vector<ODRequest>> segments;
  for (ODRequest& r : items) {
    if (segments.empty() || segments.back().front().profit - r.profit > epsilon_v) segments.emplace_back();
    segments.back().push_back(std::move(r));
  }
  return segments;
}

/// Product of segment-size factorials, saturating at uint64 max.
inline ArrangementCount count_arrangements(const std::vector<std::vector<ODRequest>>& segments) {
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint64_t>::max();
  ArrangementCount c;
  for (const auto& seg : segments) {
    for (std::uint64_t k = 2; k <= seg.size(); ++k) {
      if (c.value > kMax / k) {
        c.value = kMax;
        c.exact = false;
        return c;
      }
      c.value *= k;
    }
  }
  return c;
}

/// Full priority structure: urgency classes in order, each split into profit
/// segments.
inline std::vector<std::vector<ODRequest>> priority_segments(const std::vector<ODRequest>& requests,
                                                             double epsilon_v) {
  std::vector<std::vector<ODRequest>> all;
  for (auto& cls : group_by_urgency(requests)) {
    for (auto& seg : segment_by_profit(std::move(cls), epsilon_v)) all.push_back(std::move(seg));
  }
  return all;
}

namespace detail {

/// Uniform integer in [0, n) by rejection; stable across standard libraries.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

inline void shuffle(std::vector<std::string>& v, std::size_t begin, std::size_t end, std::mt19937_64& rng) {
  for (std::size_t i = end; i > begin + 1; --i) {
    const std::size_t j = begin + uniform_below(rng, i - begin);
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace detail

/// K sequences honoring urgency order and profit segments, each segment
/// shuffled independently. K is clamped to the number of arrangements; when
/// K reaches that number every arrangement is emitted exactly once.
inline SequenceBatch generate_sequences(const std::vector<ODRequest>& requests, const PrioritySpec& spec) {
  if (spec.K < 1) throw std::invalid_argument("K must be >= 1");
  if (!(spec.epsilon_v > 0.0)) throw std::invalid_argument("epsilon_v must be > 0");
  const auto segments = priority_segments(requests, spec.epsilon_v);
  SequenceBatch batch;
  batch.requested_k = spec.K;
  batch.arrangements = count_arrangements(segments);

  ODSequence base;
  base.segment_bounds.push_back(0);
  for (const auto& seg : segments) {
    for (const ODRequest& r : seg) base.order.push_back(r.id);
    base.segment_bounds.push_back(base.order.size());
  }

  std::uint64_t k = static_cast<std::uint64_t>(spec.K);
  if (batch.arrangements.exact) k = std::min(k, batch.arrangements.value);

  std::mt19937_64 rng(spec.rng_seed);
  if (k == 1) {
    batch.sequences.push_back(base);
    return batch;
  }

  if (batch.arrangements.exact && k == batch.arrangements.value) {
    // Enumerate every arrangement: odometer over per-segment permutations,
    // first segment varying slowest.
    ODSequence cur = base;
    for (std::size_t s = 0; s + 1 < cur.segment_bounds.size(); ++s) {
      std::sort(cur.order.begin() + cur.segment_bounds[s], cur.order.begin() + cur.segment_bounds[s + 1]);
    }
    for (std::uint64_t n = 0; n < k; ++n) {
      batch.sequences.push_back(cur);
      for (std::size_t s = cur.segment_bounds.size() - 1; s-- > 0;) {
        auto b = cur.order.begin() + cur.segment_bounds[s];
        auto e = cur.order.begin() + cur.segment_bounds[s + 1];
        if (std::next_permutation(b, e)) break;
      }
    }
    return batch;
  }

  std::set<std::vector<std::string>> seen;
  const std::uint64_t cap = 10 * k;
  std::uint64_t draws = 0;
  while (batch.sequences.size() < k) {
    ODSequence seq = base;
    for (std::size_t s = 0; s + 1 < seq.segment_bounds.size(); ++s) {
      detail::shuffle(seq.order, seq.segment_bounds[s], seq.segment_bounds[s + 1], rng);
    }
    ++draws;
    const bool fresh = seen.insert(seq.order).second;
    if (!fresh && draws < cap) continue;
    if (!fresh) batch.contains_duplicates = true;
    batch.sequences.push_back(std::move(seq));
  }
  return batch;
}

}  // namespace tubenet

#endif  // TUBENET_PRIORITIZER_HPP
