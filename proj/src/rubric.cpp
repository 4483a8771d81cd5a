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

#include "rubric.hpp"

#include <json.hpp>

#include "error.hpp"

namespace capalign {

namespace {

constexpr std::array<Criterion, kCriteriaPerRubric> kCaptionCriteria = {{
    {"adequacy", "Adequacy"},
    {"fluency", "Fluency"},
    {"consistency", "Consistency"},
    {"relevance", "Relevance"},
    {"context", "Context"},
    {"appropriateness", "Appropriateness"},
}};

constexpr std::array<Criterion, kCriteriaPerRubric> kImageCriteria = {{
    {"presence", "Presence"},
    {"localization", "Localization"},
    {"appropriateness", "Appropriateness"},
    {"aesthetics", "Aesthetics"},
    {"consistency", "Consistency"},
    {"cohesion", "Cohesion"},
}};

}  // namespace

std::string_view rubric_name(Rubric rubric) {
  return rubric == Rubric::kCaption ? "caption" : "image";
}

Rubric parse_rubric(std::string_view name) {
  if (name == "caption") return Rubric::kCaption;
  if (name == "image") return Rubric::kImage;
  throw Error(ErrorCode::kUnknownRubric,
              "unknown rubric '" + std::string(name) + "' (expected caption|image)");
}

std::span<const Criterion> rubric_criteria(Rubric rubric) {
  return rubric == Rubric::kCaption ? std::span<const Criterion>(kCaptionCriteria)
                                    : std::span<const Criterion>(kImageCriteria);
}

std::optional<std::size_t> criterion_index(Rubric rubric, std::string_view key) {
  const auto crit = rubric_criteria(rubric);
  for (std::size_t i = 0; i < crit.size(); ++i) {
    if (crit[i].key == key) return i;
  }
  return std::nullopt;
}

std::string judgment_to_json(const HumanJudgment& j) {
  nlohmann::ordered_json o;
  o["item_id"] = j.item_id;
  o["annotator_id"] = j.annotator_id;
  o["rubric"] = rubric_name(j.rubric);
  o["criterion"] = j.criterion;
  o["score"] = j.score;
  o["ts"] = j.timestamp;
  if (!j.system_tag.empty()) o["system_tag"] = j.system_tag;
  return o.dump();
}

HumanJudgment judgment_from_json(std::string_view line) {
  auto o = nlohmann::json::parse(line, nullptr, false);
  if (o.is_discarded() || !o.is_object()) {
    throw Error(ErrorCode::kRecordParse, "judgment is not a JSON object");
  }
  auto str = [&](const char* key, bool required) -> std::string {
    auto it = o.find(key);
    if (it == o.end() || it->is_null()) {
      if (required) {
        throw Error(ErrorCode::kRecordParse,
                    std::string("judgment missing '") + key + "'");
      }
      return {};
    }
    if (!it->is_string()) {
      throw Error(ErrorCode::kRecordParse,
                  std::string("judgment field '") + key + "' must be a string");
    }
    return it->get<std::string>();
  };
  HumanJudgment j;
  j.item_id = str("item_id", true);
  j.annotator_id = str("annotator_id", true);
  j.rubric = parse_rubric(str("rubric", true));
  j.criterion = str("criterion", true);
  j.system_tag = str("system_tag", false);
  if (!criterion_index(j.rubric, j.criterion)) {
    throw Error(ErrorCode::kRecordParse,
                "criterion '" + j.criterion + "' is not in the " +
                    std::string(rubric_name(j.rubric)) + " rubric");
  }
  auto score = o.find("score");
  if (score == o.end() || !score->is_number_integer()) {
    throw Error(ErrorCode::kInvalidScore, "judgment score must be an integer");
  }
  j.score = score->get<int>();
  if (j.score < kMinScore || j.score > kMaxScore) {
    throw Error(ErrorCode::kInvalidScore,
                "judgment score " + std::to_string(j.score) + " outside 1..5");
  }
  auto ts = o.find("ts");
  if (ts != o.end() && ts->is_number_integer()) j.timestamp = ts->get<std::int64_t>();
  return j;
}

}  // namespace capalign
