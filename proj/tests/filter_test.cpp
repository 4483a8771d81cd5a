/*
 * Copyright 2026 The capalign Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "error.hpp"
#include "filter.hpp"
#include "support.hpp"

namespace capalign {
namespace {

std::vector<RankedEntry> sort_oracle(std::vector<RankedEntry> v, std::size_t k) {
  std::sort(v.begin(), v.end(), [](const RankedEntry& a, const RankedEntry& b) {
    return a.score != b.score ? a.score > b.score : a.id < b.id;
  });
  if (v.size() > k) v.resize(k);
  return v;
}

std::vector<std::string> ids(const std::vector<RankedEntry>& v) {
  std::vector<std::string> out;
  for (const auto& e : v) out.push_back(e.id);
  return out;
}

std::vector<RankedEntry> random_entries(testing::Gen& g, std::size_t n, int levels) {
  std::vector<RankedEntry> v;
  v.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    RankedEntry e;
    e.id = "id" + std::to_string(g.bits() % (n * 4));
    // Quantized scores force many ties.
    e.score = static_cast<double>(g.between(0, levels)) / levels;
    v.push_back(std::move(e));
  }
  return v;
}

TEST(FilterStrategyTest, NamedWeights) {
  const std::map<std::string, ComponentWeights> want = {
      {"ours", {1, 1, 1}},
      {"text-only", {1, 0, 0}},
      {"image-only", {0, 1, 0}},
      {"object-ablated", {1, 1, 0}}};
  for (const auto& [name, w] : want) {
    const auto s = FilterStrategy::from_name(name);
    EXPECT_EQ(s.weights, w) << name;
    EXPECT_EQ(s.name(), name);
  }
  const auto r = FilterStrategy::from_name("random", 77);
  EXPECT_EQ(r.kind, StrategyKind::kRandom);
  EXPECT_EQ(r.seed, 77u);
  try {
    FilterStrategy::from_name("labse");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kUnknownStrategy);
  }
}

TEST(RankTopKTest, HandCases) {
  std::vector<RankedEntry> v = {{"a", 0.9, {}}, {"b", 0.5, {}}, {"c", 0.7, {}}};
  EXPECT_EQ(ids(rank_topk(v, 2)), (std::vector<std::string>{"a", "c"}));
  EXPECT_TRUE(rank_topk(v, 0).empty());
  EXPECT_EQ(rank_topk(v, 10).size(), 3u);
  std::vector<RankedEntry> tie = {{"b", 0.5, {}}, {"a", 0.5, {}}, {"c", 0.5, {}}};
  EXPECT_EQ(ids(rank_topk(tie, 2)), (std::vector<std::string>{"a", "b"}));
}

TEST(RankTopKTest, EqualsSortOracle) {
  testing::Gen g(8);
  for (int trial = 0; trial < 200; ++trial) {
    const auto v = random_entries(g, g.between(0, 400), static_cast<int>(g.between(1, 20)));
    const std::size_t k = g.between(0, 450);
    EXPECT_EQ(ids(rank_topk(v, k)), ids(sort_oracle(v, k)));
  }
}

TEST(RankTopKTest, Idempotent) {
  testing::Gen g(81);
  for (int trial = 0; trial < 100; ++trial) {
    const auto v = random_entries(g, 300, 10);
    const std::size_t k = g.between(0, 300);
    const auto once = rank_topk(v, k);
    EXPECT_EQ(ids(rank_topk(once, k)), ids(once));
  }
}

TEST(TopKTest, MergeEqualsSingleHeap) {
  testing::Gen g(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto v = random_entries(g, 500, 7);
    const std::size_t k = g.between(0, 60);
    std::vector<TopK> parts;
    for (int p = 0; p < 4; ++p) parts.emplace_back(k);
    for (std::size_t i = 0; i < v.size(); ++i) parts[i % 4].push(v[i]);
    TopK all(k);
    for (auto& p : parts) all.merge(std::move(p));
    EXPECT_EQ(ids(std::move(all).take()), ids(sort_oracle(v, k)));
  }
}

TEST(ApplyStrategyTest, WeightMasksAndLinearity) {
  testing::Gen g(5);
  std::vector<ScoringUnit> units;
  for (int i = 0; i < 50; ++i) {
    units.push_back(testing::random_unit(g, "u" + std::to_string(i), 8, 6, 3));
  }
  StrategyOptions opt;
  const auto ours = apply_strategy(units, FilterStrategy::from_name("ours"), opt);
  const auto text = apply_strategy(units, FilterStrategy::from_name("text-only"), opt);
  const auto image = apply_strategy(units, FilterStrategy::from_name("image-only"), opt);
  const auto ablated = apply_strategy(units, FilterStrategy::from_name("object-ablated"), opt);
  ASSERT_EQ(ours.size(), units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    const auto& b = ours[i].breakdown;
    EXPECT_EQ(text[i].score, b.a_st);
    EXPECT_EQ(image[i].score, b.a_it);
    EXPECT_NEAR(ablated[i].score, b.a_st + b.a_it, 1e-15);
    EXPECT_NEAR(ours[i].score, ablated[i].score + b.a_ot, 1e-12);
  }
}

TEST(ApplyStrategyTest, DropUndefinedObjects) {
  testing::Gen g(6);
  std::vector<ScoringUnit> units;
  std::size_t with_objects = 0;
  for (int i = 0; i < 40; ++i) {
    auto u = testing::random_unit(g, "u" + std::to_string(i), 4, 4, 2);
    if (i % 3 == 0) u.obj_emb = TokenEmbeddings{};
    if (!u.obj_emb.empty()) ++with_objects;
    units.push_back(std::move(u));
  }
  ASSERT_GT(with_objects, 0u);
  ASSERT_LT(with_objects, 40u);
  StrategyOptions opt;
  EXPECT_EQ(apply_strategy(units, FilterStrategy::from_name("ours"), opt).size(), 40u);
  opt.drop_undefined_objects = true;
  const auto kept = apply_strategy(units, FilterStrategy::from_name("ours"), opt);
  EXPECT_EQ(kept.size(), with_objects);
  for (const auto& e : kept) EXPECT_TRUE(e.breakdown.a_ot_defined);
}

TEST(ApplyStrategyTest, RandomDependsOnlyOnSeedAndId) {
  testing::Gen g(7);
  std::vector<ScoringUnit> units;
  for (int i = 0; i < 100; ++i) {
    units.push_back(testing::random_unit(g, "u" + std::to_string(i), 4, 4, 2));
  }
  const auto strat = FilterStrategy::from_name("random", 1234);
  const auto a = rank_topk(apply_strategy(units, strat, {}), 30);
  // Replace every embedding: the random ranking must not move.
  std::vector<ScoringUnit> shuffled_scores;
  for (const auto& u : units) {
    auto v = testing::random_unit(g, u.record.id, 4, 4, 2);
    shuffled_scores.push_back(std::move(v));
  }
  const auto b = rank_topk(apply_strategy(shuffled_scores, strat, {}), 30);
  EXPECT_EQ(ids(a), ids(b));
  const auto c =
      rank_topk(apply_strategy(units, FilterStrategy::from_name("random", 1235), {}), 30);
  EXPECT_NE(ids(a), ids(c));
  for (const auto& e : a) {
    EXPECT_EQ(e.score, random_key(1234, e.id));
    EXPECT_GE(e.score, 0.0);
    EXPECT_LT(e.score, 1.0);
  }
}

TEST(ApplyStrategyTest, RandomKeysAreRoughlyUniform) {
  // Selection share of ids with even index should be near one half.
  std::size_t even = 0;
  const std::size_t n = 20000, k = 5000;
  std::vector<RankedEntry> v;
  for (std::size_t i = 0; i < n; ++i) {
    v.push_back({"id" + std::to_string(i), random_key(99, "id" + std::to_string(i)), {}});
  }
  for (const auto& e : rank_topk(v, k)) {
    if (std::stoul(e.id.substr(2)) % 2 == 0) ++even;
  }
  EXPECT_NEAR(static_cast<double>(even) / k, 0.5, 0.03);
}

TEST(ApplyStrategyTest, PrecomputedBreakdownsMatchUnits) {
  testing::Gen g(10);
  std::vector<ScoringUnit> units;
  for (int i = 0; i < 30; ++i) {
    auto u = testing::random_unit(g, "u" + std::to_string(i), 6, 5, 3);
    units.push_back(std::move(u));
  }
  const auto base = score_all(units, ImageTextMode::kPooled, {}, 2);
  std::vector<std::pair<std::string, AlignmentBreakdown>> scored;
  for (std::size_t i = 0; i < units.size(); ++i) scored.emplace_back(units[i].record.id, base[i]);
  for (auto name : {"ours", "text-only", "image-only", "object-ablated", "random"}) {
    const auto s = FilterStrategy::from_name(name, 5);
    const auto direct = apply_strategy(units, s, {});
    const auto re = apply_strategy(scored, s, false);
    ASSERT_EQ(direct.size(), re.size());
    for (std::size_t i = 0; i < direct.size(); ++i) {
      EXPECT_EQ(direct[i].id, re[i].id);
      EXPECT_NEAR(direct[i].score, re[i].score, 1e-15) << name;
    }
  }
}

TEST(ScoreAndRankTest, WorkerCountDoesNotChangeResult) {
  testing::Gen g(11);
  std::vector<ScoringUnit> units;
  for (int i = 0; i < 500; ++i) {
    units.push_back(testing::random_unit(g, "u" + std::to_string(i), 8, 4, 3));
  }
  UnitAccessor at = [&](std::size_t i, ScoringUnit&) -> const ScoringUnit& { return units[i]; };
  for (auto name : {"ours", "random"}) {
    const auto s = FilterStrategy::from_name(name, 3);
    const auto oracle = rank_topk(apply_strategy(units, s, {}), 37);
    for (std::size_t w : {1, 2, 3, 4, 7}) {
      const auto got = score_and_rank(units.size(), at, s, {}, 37, w);
      EXPECT_EQ(ids(got), ids(oracle)) << name << " workers=" << w;
    }
  }
}

TEST(ScoreAndRankTest, PropagatesUnitErrors) {
  testing::Gen g(12);
  std::vector<ScoringUnit> units;
  for (int i = 0; i < 20; ++i) {
    units.push_back(testing::random_unit(g, "u" + std::to_string(i), 4, 4, 2));
  }
  units[13].pooled_tgt.reset();
  UnitAccessor at = [&](std::size_t i, ScoringUnit&) -> const ScoringUnit& { return units[i]; };
  try {
    score_and_rank(units.size(), at, FilterStrategy::from_name("ours"), {}, 5, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kMissingPooledText);
    EXPECT_NE(std::string(e.what()).find("u13"), std::string::npos);
  }
}

TEST(EmitManifestTest, PreservesBytesInRankOrder) {
  const std::string a = R"({"id":"a","x":1})", b = R"({"id":"b", "x" : 2 })",
                    c = R"({"id":"c","x":3})";
  std::istringstream in(a + "\n" + b + "\n" + c + "\n");
  std::ostringstream out;
  std::vector<RankedEntry> top = {{"c", 0.9, {}}, {"a", 0.4, {}}};
  const auto s = emit_manifest(top, in, out, "ours", 2);
  EXPECT_EQ(out.str(), c + "\n" + a + "\n");
  EXPECT_EQ(s.selected, 2u);
  EXPECT_EQ(s.dropped, 0u);
  EXPECT_DOUBLE_EQ(*s.min_score, 0.4);
  EXPECT_DOUBLE_EQ(*s.max_score, 0.9);
  EXPECT_DOUBLE_EQ(*s.median_score, 0.65);
}

TEST(EmitManifestTest, SingleAndMissingIds) {
  const std::string b = R"({"id":"b"})";
  {
    std::istringstream in(b + "\n");
    std::ostringstream out;
    const auto s = emit_manifest({{"b", 1.0, {}}}, in, out, "ours", 1);
    EXPECT_EQ(out.str(), b + "\n");
  }
  {
    std::istringstream in(b + "\n");
    std::ostringstream out;
    const auto s = emit_manifest({{"zz", 1.0, {}}}, in, out, "ours", 1);
    EXPECT_EQ(out.str(), "");
    EXPECT_EQ(s.selected, 0u);
    EXPECT_EQ(s.dropped, 1u);
    EXPECT_EQ(s.dropped_ids, std::vector<std::string>{"zz"});
    EXPECT_FALSE(s.median_score);
  }
}

TEST(EmitManifestTest, TenUnitCorpusSummary) {
  std::string manifest;
  std::vector<RankedEntry> all;
  for (int i = 0; i < 10; ++i) {
    manifest += R"({"id":"r)" + std::to_string(i) + R"("})" + "\n";
    all.push_back({"r" + std::to_string(i), i / 10.0, {}});
  }
  std::istringstream in(manifest);
  std::ostringstream out;
  const auto s = emit_manifest(rank_topk(all, 3), in, out, "text-only", 3);
  EXPECT_EQ(s.selected, 3u);
  EXPECT_EQ(s.dropped, 0u);
  EXPECT_EQ(summary_json_line(s),
            R"({"strategy":"text-only","k":3,"selected":3,"dropped":0,"min":0.7,"median":0.8,"max":0.9})");
}

TEST(BreakdownFileTest, RoundTrip) {
  testing::Gen g(13);
  std::ostringstream out;
  std::vector<std::pair<std::string, AlignmentBreakdown>> want;
  for (int i = 0; i < 50; ++i) {
    AlignmentBreakdown b{g.uniform(-1, 1), g.uniform(-1, 1), g.uniform(-1, 1), i % 4 != 0, 0};
    b = combine(b, {});
    want.emplace_back("id\"" + std::to_string(i), b);
    out << breakdown_json_line(want.back().first, b) << "\n";
  }
  std::istringstream in(out.str());
  const auto got = read_breakdowns(in);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    EXPECT_EQ(got[i].first, want[i].first);
    EXPECT_EQ(got[i].second.a_st, want[i].second.a_st);
    EXPECT_EQ(got[i].second.a_it, want[i].second.a_it);
    EXPECT_EQ(got[i].second.a_ot, want[i].second.a_ot);
    EXPECT_EQ(got[i].second.a_ot_defined, want[i].second.a_ot_defined);
    EXPECT_EQ(got[i].second.combined, want[i].second.combined);
  }
  std::istringstream bad(R"({"id":"x","a_st":0.1})");
  EXPECT_THROW(read_breakdowns(bad), IndexedError);
}

}  // namespace
}  // namespace capalign
