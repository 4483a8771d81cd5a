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

// Challenge-prompt construction: a text-generation provider is repeatedly
// shown five prompts sampled from the growing pool and asked for five more.

#ifndef CAPALIGN_BENCHGEN_HPP_
#define CAPALIGN_BENCHGEN_HPP_

#include <chrono>
#include <cstdint>
#include <deque>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace capalign {

inline constexpr std::size_t kSeedsPerPrompt = 5;

struct BenchmarkPrompt {
  std::string id;
  std::string text;
  std::uint64_t round = 0;             // 0 for initial seeds
  std::vector<std::string> seed_ids;   // prompts shown when this was generated
  std::string normalized;

  bool operator==(const BenchmarkPrompt&) const = default;
};

struct MistakeType {
  std::string name;
  std::string description;
};

struct GenerationConfig {
  std::string culture = "Chinese";
  std::vector<MistakeType> taxonomy;
  std::vector<std::string> seeds;
  std::size_t per_round = kSeedsPerPrompt;
  std::size_t target_count = 0;
  std::uint64_t rng_seed = 0;
  std::size_t round_limit = 10000;
  std::size_t max_attempts = 3;
  std::chrono::milliseconds backoff{250};

  // Default taxonomy and seed captions.
  static GenerationConfig defaults();
};

const std::vector<MistakeType>& default_taxonomy();
const std::vector<std::string>& default_seed_captions();

// Throws kSeedArity unless exactly five seeds are given.
std::string build_prompt(const GenerationConfig& config,
                         std::span<const std::string> seeds);

// Extracts "Example <k>: <caption>" lines (k = 1..5, first occurrence of each
// k, in order of appearance). Tolerates list markers, markdown emphasis and
// quotes around the line. Throws kNoCaptionsParsed.
std::vector<std::string> parse_generations(std::string_view response);

class TextProvider {
 public:
  virtual ~TextProvider() = default;
  // Throws on failure; the generation loop retries.
  virtual std::string generate(const std::string& prompt) = 0;
};

// Stable key for a prompt in a transcript.
std::string request_hash(std::string_view prompt);

// Serves responses from a transcript of {request_hash, response_text} lines.
// Repeated requests consume entries in order; the last entry for a hash is
// reused once the queue is drained.
class ReplayProvider : public TextProvider {
 public:
  explicit ReplayProvider(std::istream& transcript);
  static ReplayProvider from_file(const std::string& path);

  std::string generate(const std::string& prompt) override;
  std::size_t size() const { return entries_; }

 private:
  std::unordered_map<std::string, std::deque<std::string>> responses_;
  std::size_t entries_ = 0;
};

// Forwards to `inner` and appends each successful exchange to `out`.
class RecordingProvider : public TextProvider {
 public:
  RecordingProvider(TextProvider& inner, std::ostream& out)
      : inner_(inner), out_(out) {}
  std::string generate(const std::string& prompt) override;

 private:
  TextProvider& inner_;
  std::ostream& out_;
};

// POST {"prompt": ...} to `url`, expecting {"text": ...}. Plain http only.
class HttpProvider : public TextProvider {
 public:
  explicit HttpProvider(std::string url,
                        std::chrono::seconds timeout = std::chrono::seconds(120));
  std::string generate(const std::string& prompt) override;

 private:
  std::string base_;
  std::string path_;
  std::chrono::seconds timeout_;
};

std::string transcript_line(std::string_view prompt, std::string_view response);

struct RoundFailure {
  std::uint64_t round = 0;
  std::string reason;
};

struct GenerationResult {
  std::vector<BenchmarkPrompt> pool;
  std::size_t rounds_executed = 0;
  std::vector<RoundFailure> failures;
  bool partial = false;  // round limit hit before target_count
};

// Throws kSeedArity when fewer than five distinct seeds are configured.
GenerationResult iterate_generation(TextProvider& provider,
                                    const GenerationConfig& config);

// Keeps the first occurrence under normalize_caption equality.
std::vector<BenchmarkPrompt> dedup(std::span<const BenchmarkPrompt> pool);

// Uniform sample without replacement, kept in pool order. Throws
// kSampleTooLarge.
std::vector<BenchmarkPrompt> subsample(std::span<const BenchmarkPrompt> pool,
                                       std::size_t n, std::uint64_t seed);

struct CorpusStats {
  std::size_t count = 0;
  double mean_words = 0.0;
  double mean_objects = 0.0;
  bool objects_heuristic = false;
};

using ObjectCounts = std::unordered_map<std::string, double>;

// Word length is the whitespace-token count. Object counts come from
// `object_counts` keyed by prompt id when supplied (every prompt must be
// present), otherwise from count_noun_chunks and flagged heuristic.
// Throws kEmptyGroup on an empty prompt set.
CorpusStats corpus_stats(std::span<const BenchmarkPrompt> prompts,
                         const ObjectCounts* object_counts = nullptr);

std::size_t count_words(std::string_view text);

// Counts maximal runs of content words, splitting at function words,
// punctuation and -ing/-ed verb forms.
std::size_t count_noun_chunks(std::string_view text);

// Pool file I/O. Lines are {"id","text","round","seed_ids"}; plain text lines
// are accepted on read and become round-0 prompts with their 0-based line
// index as id.
std::vector<BenchmarkPrompt> read_prompts(std::istream& in);
std::vector<BenchmarkPrompt> read_prompts_file(const std::string& path);
void write_prompts(std::ostream& out, std::span<const BenchmarkPrompt> pool);

ObjectCounts read_object_counts_file(const std::string& path);

}  // namespace capalign

#endif  // CAPALIGN_BENCHGEN_HPP_
