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

#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gtest/gtest.h"
#include "benchgen.hpp"
#include "data_model.hpp"
#include "error.hpp"
#include "parser_fixtures.hpp"
#include "support.hpp"

namespace capalign {
namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return ErrorCode::kInvalidArgument;
}

// Answers every prompt with five captions derived from the prompt text. One
// caption in each response repeats a fixed phrase to exercise dedup.
class SyntheticProvider : public TextProvider {
 public:
  std::string generate(const std::string& prompt) override {
    ++calls;
    const std::string h = request_hash(prompt);
    std::string out = "Here are five more.\n";
    for (int k = 1; k <= 4; ++k) {
      out += "Example " + std::to_string(k) + ": A scene number " + h + "-" +
             std::to_string(k) + " with a paper lantern\n";
    }
    out += "Example 5: A Red Lantern hangs over the door.\n";
    return out;
  }
  int calls = 0;
};

class FlakyProvider : public TextProvider {
 public:
  explicit FlakyProvider(int failures) : failures_(failures) {}
  std::string generate(const std::string& prompt) override {
    if (failures_-- > 0) throw std::runtime_error("connection reset");
    return inner_.generate(prompt);
  }

 private:
  int failures_;
  SyntheticProvider inner_;
};

GenerationConfig quick_config(std::size_t target, std::uint64_t seed = 7) {
  auto c = GenerationConfig::defaults();
  c.target_count = target;
  c.rng_seed = seed;
  c.backoff = std::chrono::milliseconds(0);
  return c;
}

std::string pool_bytes(const std::vector<BenchmarkPrompt>& pool) {
  std::ostringstream out;
  write_prompts(out, pool);
  return out.str();
}

TEST(BuildPromptTest, ContainsSeedsAndFooter) {
  const auto c = GenerationConfig::defaults();
  const auto& seeds = default_seed_captions();
  ASSERT_EQ(seeds.size(), 5u);
  const auto p = build_prompt(c, seeds);
  for (const auto& s : seeds) EXPECT_NE(p.find(s), std::string::npos) << s;
  for (int k = 1; k <= 5; ++k) {
    const std::string footer = "Example " + std::to_string(k) + ": Caption" + std::to_string(k);
    EXPECT_NE(p.find(footer), std::string::npos) << footer;
  }
  for (const auto& m : c.taxonomy) EXPECT_NE(p.find(m.description), std::string::npos);
  EXPECT_EQ(build_prompt(c, seeds), p);
  EXPECT_NE(p.find(c.culture), std::string::npos);
  auto other = c;
  other.culture = "Japanese";
  EXPECT_NE(build_prompt(other, seeds), p);
}

TEST(BuildPromptTest, SeedArity) {
  const auto c = GenerationConfig::defaults();
  std::vector<std::string> four(default_seed_captions().begin(),
                                default_seed_captions().begin() + 4);
  EXPECT_EQ(code_of([&] { build_prompt(c, four); }), ErrorCode::kSeedArity);
  auto six = default_seed_captions();
  six.push_back("extra");
  EXPECT_EQ(code_of([&] { build_prompt(c, six); }), ErrorCode::kSeedArity);
}

TEST(ParseGenerationsTest, Basic) {
  EXPECT_EQ(parse_generations("Example 1: A\nExample 2: B"),
            (std::vector<std::string>{"A", "B"}));
  EXPECT_EQ(code_of([] { parse_generations("no examples here"); }),
            ErrorCode::kNoCaptionsParsed);
  EXPECT_EQ(code_of([] { parse_generations(""); }), ErrorCode::kNoCaptionsParsed);
  EXPECT_EQ(parse_generations("Example 2: second\nExample 1: first"),
            (std::vector<std::string>{"second", "first"}));
  EXPECT_EQ(parse_generations("Example 1:\nExample 3: kept"),
            (std::vector<std::string>{"kept"}));
}

TEST(ParseGenerationsTest, FiftyDecoratedFixtures) {
  const auto fixtures = testing::parser_fixtures();
  ASSERT_EQ(fixtures.size(), 50u);
  std::set<std::string> names;
  for (const auto& f : fixtures) {
    names.insert(f.name);
    EXPECT_EQ(parse_generations(f.response), f.expected) << f.name;
  }
  EXPECT_EQ(names.size(), 50u);
}

TEST(ParseGenerationsTest, RoundTripsRandomCaptions) {
  testing::Gen g(41);
  const std::string alphabet = "abcdefghij KLMNOP,;'-";
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<std::string> caps;
    std::string response;
    const std::size_t n = g.between(1, 5);
    for (std::size_t k = 1; k <= n; ++k) {
      std::string c = "w";
      const std::size_t len = g.between(1, 30);
      for (std::size_t i = 0; i < len; ++i) c += alphabet[g.between(0, alphabet.size() - 1)];
      c += "z";
      caps.push_back(c);
      response += "Example " + std::to_string(k) + ": " + c + "\n";
    }
    EXPECT_EQ(parse_generations(response), caps);
  }
}

TEST(ReplayProviderTest, ConsumesInOrderThenRepeatsLast) {
  std::istringstream t(transcript_line("p", "one") + "\n" + transcript_line("p", "two") +
                       "\n\n" + transcript_line("q", "x") + "\n");
  ReplayProvider r(t);
  EXPECT_EQ(r.size(), 3u);
  EXPECT_EQ(r.generate("p"), "one");
  EXPECT_EQ(r.generate("p"), "two");
  EXPECT_EQ(r.generate("p"), "two");
  EXPECT_EQ(r.generate("q"), "x");
  EXPECT_EQ(code_of([&] { r.generate("unknown"); }), ErrorCode::kProviderFailure);
  std::istringstream bad("{\"request_hash\":1}\n");
  EXPECT_EQ(code_of([&] { ReplayProvider bad_r(bad); }), ErrorCode::kRecordParse);
}

TEST(IterateGenerationTest, ZeroRoundsWhenSeedsMeetTarget) {
  SyntheticProvider p;
  const auto r = iterate_generation(p, quick_config(5));
  EXPECT_EQ(r.rounds_executed, 0u);
  EXPECT_EQ(p.calls, 0);
  EXPECT_EQ(r.pool.size(), 5u);
  EXPECT_FALSE(r.partial);
  for (const auto& s : r.pool) EXPECT_EQ(s.round, 0u);
}

TEST(IterateGenerationTest, GrowsByUniqueCaptionsOnly) {
  SyntheticProvider p;
  const auto r = iterate_generation(p, quick_config(40));
  EXPECT_EQ(r.pool.size(), 40u);
  EXPECT_FALSE(r.partial);
  std::set<std::string> norms;
  std::size_t lanterns = 0;
  std::vector<std::size_t> per_round(r.rounds_executed + 1, 0);
  for (const auto& s : r.pool) {
    EXPECT_TRUE(norms.insert(normalize_caption(s.text)).second) << s.text;
    EXPECT_EQ(s.normalized, normalize_caption(s.text));
    if (s.normalized == "a red lantern hangs over the door") ++lanterns;
    ++per_round[s.round];
    if (s.round > 0) {
      EXPECT_EQ(s.seed_ids.size(), 5u);
      EXPECT_EQ(std::set<std::string>(s.seed_ids.begin(), s.seed_ids.end()).size(), 5u);
      for (const auto& id : s.seed_ids) EXPECT_LT(std::stoul(id), std::stoul(s.id));
    }
  }
  // The repeated caption enters once; later rounds add four new ones.
  EXPECT_EQ(lanterns, 1u);
  for (std::size_t i = 1; i < per_round.size(); ++i) EXPECT_LE(per_round[i], 5u);
}

TEST(IterateGenerationTest, RecordThenReplayIsByteIdentical) {
  std::ostringstream transcript;
  SyntheticProvider live;
  RecordingProvider rec(live, transcript);
  const auto a = iterate_generation(rec, quick_config(60, 99));
  std::istringstream in(transcript.str());
  ReplayProvider replay(in);
  EXPECT_EQ(replay.size(), a.rounds_executed);
  const auto b = iterate_generation(replay, quick_config(60, 99));
  EXPECT_EQ(pool_bytes(a.pool), pool_bytes(b.pool));
  EXPECT_EQ(a.rounds_executed, b.rounds_executed);
  SyntheticProvider other;
  const auto c = iterate_generation(other, quick_config(60, 100));
  EXPECT_NE(pool_bytes(a.pool), pool_bytes(c.pool));
}

TEST(IterateGenerationTest, RetriesThenRecordsRoundFailure) {
  FlakyProvider recovers(2);
  auto cfg = quick_config(10);
  cfg.max_attempts = 3;
  const auto ok = iterate_generation(recovers, cfg);
  EXPECT_TRUE(ok.failures.empty());
  EXPECT_EQ(ok.pool.size(), 10u);

  FlakyProvider fails_first_round(3);
  const auto r = iterate_generation(fails_first_round, cfg);
  ASSERT_EQ(r.failures.size(), 1u);
  EXPECT_EQ(r.failures[0].round, 1u);
  EXPECT_NE(r.failures[0].reason.find("connection reset"), std::string::npos);
  EXPECT_EQ(r.pool.size(), 10u);
}

TEST(IterateGenerationTest, RoundLimitGivesPartialPool) {
  std::istringstream empty("");
  ReplayProvider nothing(empty);
  auto cfg = quick_config(50);
  cfg.round_limit = 4;
  cfg.max_attempts = 1;
  const auto r = iterate_generation(nothing, cfg);
  EXPECT_TRUE(r.partial);
  EXPECT_EQ(r.rounds_executed, 4u);
  EXPECT_EQ(r.failures.size(), 4u);
  EXPECT_EQ(r.pool.size(), 5u);
}

TEST(IterateGenerationTest, NeedsFiveDistinctSeeds) {
  SyntheticProvider p;
  auto cfg = quick_config(10);
  cfg.seeds = {"a", "b", "c", "d", "D."};
  EXPECT_EQ(code_of([&] { iterate_generation(p, cfg); }), ErrorCode::kSeedArity);
}

TEST(DedupTest, NormalizationEqualityAndIdempotence) {
  std::vector<BenchmarkPrompt> pool(2);
  pool[0].id = "0";
  pool[0].text = "A tea set";
  pool[1].id = "1";
  pool[1].text = "a tea  set.";
  const auto d = dedup(pool);
  ASSERT_EQ(d.size(), 1u);
  EXPECT_EQ(d[0].id, "0");
  testing::Gen g(42);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<BenchmarkPrompt> p;
    const std::size_t n = g.between(0, 30);
    for (std::size_t i = 0; i < n; ++i) {
      BenchmarkPrompt b;
      b.id = std::to_string(i);
      b.text = (g.between(0, 1) ? "Cap " : "cap  ") + std::to_string(g.between(0, 9)) +
               (g.between(0, 1) ? "." : "");
      p.push_back(b);
    }
    const auto once = dedup(p);
    EXPECT_EQ(dedup(once), once);
    std::set<std::string> seen;
    for (const auto& x : once) EXPECT_TRUE(seen.insert(x.normalized).second);
  }
}

TEST(SubsampleTest, SizesOrderAndDeterminism) {
  std::vector<BenchmarkPrompt> pool(9889);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    pool[i].id = std::to_string(i);
    pool[i].text = "prompt " + std::to_string(i);
  }
  const auto a = subsample(pool, 500, 3);
  EXPECT_EQ(a.size(), 500u);
  for (std::size_t i = 1; i < a.size(); ++i) {
    EXPECT_LT(std::stoul(a[i - 1].id), std::stoul(a[i].id));
  }
  EXPECT_EQ(subsample(pool, 500, 3), a);
  EXPECT_NE(subsample(pool, 500, 4), a);
  EXPECT_EQ(subsample(pool, pool.size(), 3).size(), pool.size());
  EXPECT_TRUE(subsample(pool, 0, 3).empty());
  EXPECT_EQ(code_of([&] { subsample(pool, pool.size() + 1, 3); }),
            ErrorCode::kSampleTooLarge);
}

TEST(SubsampleTest, RoughlyUniform) {
  std::vector<BenchmarkPrompt> pool(100);
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i].id = std::to_string(i);
  std::vector<int> hits(100, 0);
  const int trials = 4000;
  for (int t = 0; t < trials; ++t) {
    for (const auto& p : subsample(pool, 10, static_cast<std::uint64_t>(t))) {
      ++hits[std::stoul(p.id)];
    }
  }
  // Each id is picked with probability 0.1; expected 400, sd about 19.
  for (int h : hits) {
    EXPECT_GT(h, 300);
    EXPECT_LT(h, 500);
  }
}

TEST(CorpusStatsTest, SeedCaptionsHandCount) {
  std::vector<BenchmarkPrompt> seeds;
  for (const auto& s : default_seed_captions()) {
    BenchmarkPrompt p;
    p.id = std::to_string(seeds.size());
    p.text = s;
    seeds.push_back(p);
  }
  const auto st = corpus_stats(seeds);
  EXPECT_EQ(st.count, 5u);
  // Word counts by hand: 17, 16, 17, 15, 13.
  EXPECT_DOUBLE_EQ(st.mean_words, (17 + 16 + 17 + 15 + 13) / 5.0);
  EXPECT_TRUE(st.objects_heuristic);
  const auto shipped = read_prompts_file(std::string(CAPALIGN_DATA_DIR) + "/seed_captions.txt");
  ASSERT_EQ(shipped.size(), 5u);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_EQ(shipped[i].text, seeds[i].text);
}

TEST(CorpusStatsTest, SingleAndSuppliedCounts) {
  BenchmarkPrompt p;
  p.id = "x";
  p.text = "a b c";
  const auto st = corpus_stats(std::vector<BenchmarkPrompt>{p});
  EXPECT_EQ(st.count, 1u);
  EXPECT_DOUBLE_EQ(st.mean_words, 3.0);
  EXPECT_TRUE(st.objects_heuristic);
  ObjectCounts counts = {{"x", 4}};
  const auto st2 = corpus_stats(std::vector<BenchmarkPrompt>{p}, &counts);
  EXPECT_FALSE(st2.objects_heuristic);
  EXPECT_DOUBLE_EQ(st2.mean_objects, 4.0);
  ObjectCounts none;
  EXPECT_EQ(code_of([&] { corpus_stats(std::vector<BenchmarkPrompt>{p}, &none); }),
            ErrorCode::kInvalidArgument);
  EXPECT_EQ(code_of([] { corpus_stats({}); }), ErrorCode::kEmptyGroup);
}

TEST(CorpusStatsTest, CountHelpers) {
  EXPECT_EQ(count_words(""), 0u);
  EXPECT_EQ(count_words("  one\ttwo\nthree  "), 3u);
  EXPECT_EQ(count_noun_chunks(""), 0u);
  EXPECT_EQ(count_noun_chunks("a red lantern hanging over the old door"), 2u);
  EXPECT_EQ(count_noun_chunks("a lantern. a door"), 2u);
  EXPECT_EQ(count_noun_chunks("tea, cups and a tray"), 3u);
  EXPECT_EQ(count_noun_chunks("the of and"), 0u);
}

TEST(PromptFileTest, RoundTripAndPlainText) {
  std::vector<BenchmarkPrompt> pool(2);
  pool[0] = {"0", "first \"quoted\"", 0, {}, ""};
  pool[1] = {"1", "second", 3, {"0", "4", "2", "9", "8"}, ""};
  for (auto& p : pool) p.normalized = normalize_caption(p.text);
  std::istringstream in(pool_bytes(pool));
  EXPECT_EQ(read_prompts(in), pool);
  std::istringstream plain("alpha\n\n  beta  \n");
  const auto got = read_prompts(plain);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].id, "0");
  EXPECT_EQ(got[1].text, "beta");
  EXPECT_EQ(got[1].id, "1");
  std::istringstream bad("{\"id\":\"1\"}\n");
  EXPECT_EQ(code_of([&] { read_prompts(bad); }), ErrorCode::kRecordParse);
}

}  // namespace
}  // namespace capalign
