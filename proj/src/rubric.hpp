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

#ifndef CAPALIGN_RUBRIC_HPP_
#define CAPALIGN_RUBRIC_HPP_

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace capalign {

// caption: translated-caption quality. image: generated-image quality.
enum class Rubric { kCaption, kImage };

inline constexpr std::size_t kCriteriaPerRubric = 6;
inline constexpr int kMinScore = 1;
inline constexpr int kMaxScore = 5;

struct Criterion {
  std::string_view key;     // wire name
  std::string_view column;  // report header
};

std::string_view rubric_name(Rubric rubric);
// Throws kUnknownRubric.
Rubric parse_rubric(std::string_view name);

// Six criteria in report column order.
std::span<const Criterion> rubric_criteria(Rubric rubric);
std::optional<std::size_t> criterion_index(Rubric rubric, std::string_view key);

struct HumanJudgment {
  std::string item_id;
  std::string annotator_id;
  Rubric rubric = Rubric::kCaption;
  std::string criterion;
  int score = 0;
  std::int64_t timestamp = 0;  // epoch milliseconds
  std::string system_tag;      // image rubric only

  bool operator==(const HumanJudgment&) const = default;
};

// Line-delimited JSON:
// {"item_id","annotator_id","rubric","criterion","score","ts","system_tag"}
std::string judgment_to_json(const HumanJudgment& j);
// Throws kRecordParse, kUnknownRubric, kInvalidScore.
HumanJudgment judgment_from_json(std::string_view line);

}  // namespace capalign

#endif  // CAPALIGN_RUBRIC_HPP_
