#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "support/synthetic.hpp"
#include "tubenet/prioritizer.hpp"

using namespace tubenet;

namespace {

const std::vector<double> kTableProfits = {9481, 8735, 7988, 7908, 6957, 6900, 6522, 5821,
                                           5800, 5667, 5626, 5423, 4793, 4697, 3045, -105};

std::vector<ODRequest> table_requests() {
  std::vector<ODRequest> out;
  for (std::size_t i = 0; i < kTableProfits.size(); ++i) {
    // ids sort in table order (r01..r16)
    char id[8];
    std::snprintf(id, sizeof(id), "r%02zu", i + 1);
    out.push_back({id, "a", "b", Urgency::Urgent, kTableProfits[i]});
  }
  return out;
}

std::vector<std::vector<int>> sizes_of(const std::vector<std::vector<ODRequest>>& segs) {
  std::vector<std::vector<int>> out;
  for (const auto& s : segs) {
    std::vector<int> ids;
    for (const auto& r : s) ids.push_back(std::stoi(r.id.substr(1)));
    out.push_back(ids);
  }
  return out;
}

// Brute force: all permutations of the requests that respect urgency order and
// the profit-segment blocks.
std::set<std::vector<std::string>> admissible_orders(const std::vector<ODRequest>& reqs, double eps) {
  const auto segs = priority_segments(reqs, eps);
  std::map<std::string, std::size_t> block;
  for (std::size_t s = 0; s < segs.size(); ++s)
    for (const auto& r : segs[s]) block[r.id] = s;
  std::vector<std::string> ids;
  for (const auto& r : reqs) ids.push_back(r.id);
  std::sort(ids.begin(), ids.end());
  std::set<std::vector<std::string>> out;
  do {
    bool ok = true;
    for (std::size_t i = 1; i < ids.size() && ok; ++i) ok = block[ids[i - 1]] <= block[ids[i]];
    if (ok) out.insert(ids);
  } while (std::next_permutation(ids.begin(), ids.end()));
  return out;
}

}  // namespace

TEST(GroupByUrgency, StablePartition) {
  std::vector<ODRequest> reqs;
  for (int i = 0; i < 12; ++i) reqs.push_back({std::to_string(i), "a", "b", static_cast<Urgency>(i % 4), 0.0});
  const auto groups = group_by_urgency(reqs);
  for (int u = 0; u < 4; ++u) {
    ASSERT_EQ(groups[u].size(), 3u);
    EXPECT_EQ(groups[u][0].id, std::to_string(u));
    EXPECT_EQ(groups[u][2].id, std::to_string(u + 8));
  }
  for (auto& r : reqs) r.urgency = Urgency::Normal;
  const auto normal = group_by_urgency(reqs);
  EXPECT_TRUE(normal[0].empty() && normal[1].empty() && normal[3].empty());
  EXPECT_EQ(normal[2].size(), 12u);
  for (const auto& g : group_by_urgency({})) EXPECT_TRUE(g.empty());
}

TEST(SegmentByProfit, TableSegmentations) {
  const auto reqs = table_requests();
  using V = std::vector<std::vector<int>>;
  EXPECT_EQ(sizes_of(segment_by_profit(reqs, 100)),
            (V{{1}, {2}, {3, 4}, {5, 6}, {7}, {8, 9}, {10, 11}, {12}, {13, 14}, {15}, {16}}));
  EXPECT_EQ(sizes_of(segment_by_profit(reqs, 400)),
            (V{{1}, {2}, {3, 4}, {5, 6}, {7}, {8, 9, 10, 11, 12}, {13, 14}, {15}, {16}}));
  EXPECT_EQ(sizes_of(segment_by_profit(reqs, 800)),
            (V{{1, 2}, {3, 4}, {5, 6, 7}, {8, 9, 10, 11, 12}, {13, 14}, {15}, {16}}));
}

TEST(SegmentByProfit, DiameterBoundAndOrder) {
  testkit::Rng rng(8);
  for (int k = 0; k < 200; ++k) {
    std::vector<ODRequest> reqs;
    const int n = rng.integer(0, 30);
    for (int i = 0; i < n; ++i) reqs.push_back({"q" + std::to_string(i), "a", "b", Urgency::Low, std::round(rng.uniform(-500, 5000))});
    const double eps = rng.uniform(1, 1500);
    const auto segs = segment_by_profit(reqs, eps);
    std::vector<double> flat;
    for (const auto& s : segs) {
      ASSERT_FALSE(s.empty());
      double hi = -1e300, lo = 1e300;
      for (const auto& r : s) {
        hi = std::max(hi, r.profit);
        lo = std::min(lo, r.profit);
        flat.push_back(r.profit);
      }
      EXPECT_LE(hi - lo, eps);
    }
    EXPECT_EQ(flat.size(), reqs.size());
    EXPECT_TRUE(std::is_sorted(flat.rbegin(), flat.rend()));
  }
}

TEST(CountArrangements, TableValues) {
  const auto reqs = table_requests();
  EXPECT_EQ(count_arrangements(segment_by_profit(reqs, 100)).value, 32u);
  EXPECT_EQ(count_arrangements(segment_by_profit(reqs, 400)).value, 960u);
  // 2!*2!*3!*5!*2!; the printed table value for this threshold is 1440.
  EXPECT_EQ(count_arrangements(segment_by_profit(reqs, 800)).value, 5760u);
  EXPECT_EQ(count_arrangements(segment_by_profit(reqs, 1)).value, 1u);
}

TEST(CountArrangements, SaturatesWithFlag) {
  std::vector<ODRequest> many;
  for (int i = 0; i < 25; ++i) many.push_back({"m" + std::to_string(i), "a", "b", Urgency::Low, 0.0});
  const auto c = count_arrangements(segment_by_profit(many, 10));
  EXPECT_FALSE(c.exact);
  EXPECT_EQ(c.value, std::numeric_limits<std::uint64_t>::max());
  many.resize(20);
  const auto exact = count_arrangements(segment_by_profit(many, 10));
  EXPECT_TRUE(exact.exact);
  EXPECT_EQ(exact.value, 2432902008176640000ull);
}

TEST(CountArrangements, EqualsBruteForceOnSmallInputs) {
  testkit::Rng rng(13);
  for (int k = 0; k < 40; ++k) {
    std::vector<ODRequest> reqs;
    const int n = rng.integer(1, 8);
    for (int i = 0; i < n; ++i) {
      reqs.push_back({"s" + std::to_string(i), "a", "b", static_cast<Urgency>(rng.integer(0, 3)),
                      std::round(rng.uniform(0, 1000))});
    }
    const double eps = rng.uniform(10, 600);
    const auto brute = admissible_orders(reqs, eps);
    EXPECT_EQ(count_arrangements(priority_segments(reqs, eps)).value, brute.size());
    const auto batch = generate_sequences(reqs, {eps, 1 << 20, 5});
    std::set<std::vector<std::string>> got;
    for (const auto& s : batch.sequences) got.insert(s.order);
    EXPECT_EQ(got, brute);
    EXPECT_EQ(batch.sequences.size(), brute.size());
  }
}

TEST(GenerateSequences, SortedOrderForSingleSequence) {
  const auto reqs = table_requests();
  const auto batch = generate_sequences(reqs, {1.0, 1, 0});
  ASSERT_EQ(batch.sequences.size(), 1u);
  std::vector<std::string> expect;
  for (const auto& r : reqs) expect.push_back(r.id);
  EXPECT_EQ(batch.sequences[0].order, expect);
}

TEST(GenerateSequences, ExhaustsArrangements) {
  const auto batch = generate_sequences(table_requests(), {100, 32, 1});
  EXPECT_EQ(batch.sequences.size(), 32u);
  std::set<std::vector<std::string>> distinct;
  for (const auto& s : batch.sequences) distinct.insert(s.order);
  EXPECT_EQ(distinct.size(), 32u);
  EXPECT_FALSE(batch.contains_duplicates);
  // K above the arrangement count is clamped.
  EXPECT_EQ(generate_sequences(table_requests(), {100, 500, 1}).sequences.size(), 32u);
}

TEST(GenerateSequences, RespectsPriorityStructure) {
  const testkit::CityParams p;
  const Scenario s = testkit::synthetic_city(p);
  const auto batch = generate_sequences(s.od_requests, {1000, 50, 42});
  ASSERT_EQ(batch.sequences.size(), 50u);
  std::set<std::vector<std::string>> distinct;
  std::map<std::string, ODRequest> by_id;
  for (const auto& r : s.od_requests) by_id[r.id] = r;
  for (const auto& seq : batch.sequences) {
    distinct.insert(seq.order);
    std::vector<std::string> sorted = seq.order;
    std::sort(sorted.begin(), sorted.end());
    std::vector<std::string> ids;
    for (const auto& r : s.od_requests) ids.push_back(r.id);
    std::sort(ids.begin(), ids.end());
    EXPECT_EQ(sorted, ids);
    for (std::size_t i = 1; i < seq.order.size(); ++i) {
      EXPECT_LE(by_id[seq.order[i - 1]].urgency, by_id[seq.order[i]].urgency);
    }
    EXPECT_EQ(seq.segment_bounds, batch.sequences[0].segment_bounds);
    for (std::size_t b = 0; b + 1 < seq.segment_bounds.size(); ++b) {
      std::set<std::string> mine(seq.order.begin() + seq.segment_bounds[b], seq.order.begin() + seq.segment_bounds[b + 1]);
      const auto& first = batch.sequences[0].order;
      std::set<std::string> base(first.begin() + seq.segment_bounds[b], first.begin() + seq.segment_bounds[b + 1]);
      EXPECT_EQ(mine, base);
    }
  }
  EXPECT_EQ(distinct.size(), 50u);
}

TEST(GenerateSequences, DeterministicPerSeed) {
  const auto reqs = table_requests();
  const auto a = generate_sequences(reqs, {400, 20, 99});
  const auto b = generate_sequences(reqs, {400, 20, 99});
  const auto c = generate_sequences(reqs, {400, 20, 100});
  ASSERT_EQ(a.sequences.size(), 20u);
  EXPECT_EQ(a.sequences, b.sequences);
  EXPECT_NE(a.sequences, c.sequences);
}

TEST(GenerateSequences, RejectsBadSpec) {
  EXPECT_THROW(generate_sequences(table_requests(), {100, 0, 0}), std::invalid_argument);
  EXPECT_THROW(generate_sequences(table_requests(), {0, 1, 0}), std::invalid_argument);
}
