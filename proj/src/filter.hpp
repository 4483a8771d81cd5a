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

// Strategy-driven ranking of scored units and top-K manifest emission.

#ifndef CAPALIGN_FILTER_HPP_
#define CAPALIGN_FILTER_HPP_

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "alignment.hpp"

namespace capalign {

enum class StrategyKind { kOurs, kTextOnly, kImageOnly, kObjectAblated, kRandom };

struct FilterStrategy {
  StrategyKind kind = StrategyKind::kOurs;
  ComponentWeights weights;
  std::uint64_t seed = 0;

  // Throws kUnknownStrategy.
  static FilterStrategy from_name(std::string_view name, std::uint64_t seed = 0);
  std::string_view name() const;
};

struct RankedEntry {
  std::string id;
  double score = 0.0;
  AlignmentBreakdown breakdown;
};

// Ordering key: score descending, then id ascending.
inline bool ranks_before(const RankedEntry& a, const RankedEntry& b) {
  if (a.score != b.score) return a.score > b.score;
  return a.id < b.id;
}

// Seeded per-id key in [0, 1) used by the random strategy. Depends only on
// (seed, id).
double random_key(std::uint64_t seed, std::string_view id);

// Bounded selection: keeps the k best entries seen so far in a heap whose
// root is the current worst kept entry.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}

  void push(RankedEntry entry);
  void merge(TopK&& other);
  std::size_t size() const { return heap_.size(); }
  // Sorted best-first.
  std::vector<RankedEntry> take() &&;

 private:
  std::size_t k_;
  std::vector<RankedEntry> heap_;
};

struct StrategyOptions {
  ImageTextMode mode = ImageTextMode::kPooled;
  bool drop_undefined_objects = false;
};

// Scores every unit under the strategy. Units with undefined object-text
// alignment are skipped when drop_undefined_objects is set.
std::vector<RankedEntry> apply_strategy(std::span<const ScoringUnit> units,
                                        const FilterStrategy& strategy,
                                        const StrategyOptions& options);

// Re-weights precomputed breakdowns (or assigns random keys) without touching
// embeddings.
std::vector<RankedEntry> apply_strategy(
    std::span<const std::pair<std::string, AlignmentBreakdown>> scored,
    const FilterStrategy& strategy, bool drop_undefined_objects);

std::vector<RankedEntry> rank_topk(std::vector<RankedEntry> entries,
                                   std::size_t k);

// Resolves unit `i`. Implementations may fill and return `scratch` (for
// generated corpora) or return a reference into their own storage.
using UnitAccessor =
    std::function<const ScoringUnit&(std::size_t i, ScoringUnit& scratch)>;

// Scores units [0, n) across `workers` threads, each keeping a local top-K,
// and merges the partial results. Output equals apply_strategy followed by
// rank_topk regardless of worker count.
std::vector<RankedEntry> score_and_rank(std::size_t n, const UnitAccessor& unit_at,
                                        const FilterStrategy& strategy,
                                        const StrategyOptions& options,
                                        std::size_t k, std::size_t workers);

// Breakdown per unit, in input order, computed on `workers` threads.
std::vector<AlignmentBreakdown> score_all(std::span<const ScoringUnit> units,
                                          ImageTextMode mode,
                                          const ComponentWeights& weights,
                                          std::size_t workers);

struct EmitSummary {
  std::string strategy;
  std::size_t k = 0;
  std::size_t selected = 0;
  std::size_t dropped = 0;
  std::optional<double> min_score;
  std::optional<double> median_score;
  std::optional<double> max_score;
  std::vector<std::string> dropped_ids;
};

// Streams the original manifest and writes the raw lines of the selected ids
// in rank order. Ids absent from the manifest are counted as dropped.
EmitSummary emit_manifest(const std::vector<RankedEntry>& topk,
                          std::istream& manifest, std::ostream& out,
                          std::string_view strategy, std::size_t k);

// One line-delimited summary record.
std::string summary_json_line(const EmitSummary& summary);

// Breakdown files: one {"id","a_st","a_it","a_ot","a_ot_defined","combined"}
// object per line.
std::string breakdown_json_line(std::string_view id, const AlignmentBreakdown& b);
// Throws IndexedError(kRecordParse, line).
std::vector<std::pair<std::string, AlignmentBreakdown>> read_breakdowns(
    std::istream& in);

}  // namespace capalign

#endif  // CAPALIGN_FILTER_HPP_
