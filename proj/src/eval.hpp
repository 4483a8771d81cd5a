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

// Meta-evaluation of automatic metrics against human judgments.

#ifndef CAPALIGN_EVAL_HPP_
#define CAPALIGN_EVAL_HPP_

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "rubric.hpp"

namespace capalign {

// Product-moment correlation. Throws kInsufficientSamples (n < 3),
// kDegenerateVariance, or kDimMismatch on unequal lengths.
double pearson(std::span<const double> xs, std::span<const double> ys);

// Two-sided p-value of r under H0: rho = 0 via the t statistic with n-2
// degrees of freedom. Reported, never used to gate anything.
double pearson_p_value(double r, std::size_t n);

enum class CellStatus { kOk, kInsufficientSamples, kDegenerateVariance };

std::string_view cell_status_name(CellStatus status);

struct CorrelationCell {
  std::string column;
  std::size_t n = 0;
  CellStatus status = CellStatus::kInsufficientSamples;
  double r = 0.0;  // meaningful only when status == kOk
  std::optional<double> p_value;
};

enum class AllMode {
  kPooled,    // one correlation over every (item, criterion) pair
  kMeanOfR,   // mean of the per-criterion coefficients
};

std::string_view all_mode_name(AllMode mode);
AllMode parse_all_mode(std::string_view name);

struct CorrelationTable {
  Rubric rubric = Rubric::kCaption;
  std::string metric;
  AllMode all_mode = AllMode::kPooled;
  std::size_t joined_items = 0;
  std::vector<CorrelationCell> criteria;  // rubric column order
  CorrelationCell overall;                // column "All"
};

using MetricScores = std::unordered_map<std::string, double>;

// Judgments of other rubrics are ignored. Multiple annotators are averaged
// per (item, criterion) before correlating. Throws kEmptyJoin when no judged
// item has a metric score.
CorrelationTable correlate_by_criterion(std::span<const HumanJudgment> judgments,
                                        const MetricScores& metric_scores,
                                        Rubric rubric, std::string metric_name,
                                        AllMode all_mode = AllMode::kPooled);

struct AggregateRow {
  std::string system;
  Rubric rubric = Rubric::kImage;
  std::array<std::optional<double>, kCriteriaPerRubric> means;
  std::array<std::size_t, kCriteriaPerRubric> counts{};
};

// Arithmetic mean per criterion over the judgments tagged `system_tag`.
// Throws kEmptyGroup when no judgment carries that tag.
AggregateRow aggregate_scores(std::span<const HumanJudgment> judgments,
                              Rubric rubric, std::string_view system_tag);
AggregateRow aggregate_image_scores(std::span<const HumanJudgment> judgments,
                                    std::string_view system_tag);

// One row per distinct system tag, sorted by tag.
std::vector<AggregateRow> aggregate_all_systems(
    std::span<const HumanJudgment> judgments, Rubric rubric);

struct ScoreHistogram {
  std::array<std::size_t, kMaxScore> counts{};  // index 0 holds score 1
  std::size_t total = 0;
  std::optional<double> above_average_ratio;    // share scoring >= 3
};

ScoreHistogram score_histogram(std::span<const HumanJudgment> judgments);

// Aligned text tables. Empty input renders a "no data" sentinel.
std::string render_correlation_report(std::span<const CorrelationTable> tables);
std::string render_aggregate_report(std::span<const AggregateRow> rows);
std::string render_histogram(const ScoreHistogram& h);

std::string correlation_json_line(const CorrelationTable& table);
std::string aggregate_json_line(const AggregateRow& row);

// Rounds half away from zero to two decimals for reporting.
std::string format_two_decimals(double v);

}  // namespace capalign

#endif  // CAPALIGN_EVAL_HPP_
