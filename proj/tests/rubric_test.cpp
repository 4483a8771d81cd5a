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
#include <string>

#include <json.hpp>

#include "gtest/gtest.h"
#include "error.hpp"
#include "rubric.hpp"
#include "support.hpp"

namespace capalign {
namespace {

TEST(RubricTest, SixDistinctCriteriaEach) {
  for (auto r : {Rubric::kCaption, Rubric::kImage}) {
    const auto crit = rubric_criteria(r);
    ASSERT_EQ(crit.size(), kCriteriaPerRubric);
    std::set<std::string_view> keys;
    for (std::size_t i = 0; i < crit.size(); ++i) {
      keys.insert(crit[i].key);
      EXPECT_EQ(criterion_index(r, crit[i].key), i);
    }
    EXPECT_EQ(keys.size(), kCriteriaPerRubric);
    EXPECT_EQ(parse_rubric(rubric_name(r)), r);
  }
  EXPECT_FALSE(criterion_index(Rubric::kCaption, "presence"));
  EXPECT_FALSE(criterion_index(Rubric::kImage, "fluency"));
  EXPECT_THROW(parse_rubric("video"), Error);
}

TEST(RubricTest, ShippedGuidelinesMatchCriteria) {
  const auto text = testing::read_file(std::string(CAPALIGN_DATA_DIR) + "/rubrics.json");
  const auto doc = nlohmann::json::parse(text);
  for (auto r : {Rubric::kCaption, Rubric::kImage}) {
    const auto& arr = doc.at(std::string(rubric_name(r)));
    const auto crit = rubric_criteria(r);
    ASSERT_EQ(arr.size(), crit.size());
    for (std::size_t i = 0; i < crit.size(); ++i) {
      EXPECT_EQ(arr[i].at("key").get<std::string>(), crit[i].key);
      EXPECT_EQ(arr[i].at("column").get<std::string>(), crit[i].column);
      for (int s = kMinScore; s <= kMaxScore; ++s) {
        const auto& anchor = arr[i].at("anchors").at(std::to_string(s));
        EXPECT_FALSE(anchor.get<std::string>().empty());
      }
    }
  }
}

TEST(JudgmentJsonTest, RoundTrip) {
  testing::Gen g(31);
  for (int i = 0; i < 500; ++i) {
    HumanJudgment j;
    j.item_id = "item\"" + std::to_string(g.bits() % 1000);
    j.annotator_id = "ann" + std::to_string(i % 7);
    j.rubric = i % 2 ? Rubric::kImage : Rubric::kCaption;
    j.criterion = std::string(rubric_criteria(j.rubric)[g.between(0, 5)].key);
    j.score = static_cast<int>(g.between(1, 5));
    j.timestamp = static_cast<std::int64_t>(g.bits() >> 20);
    if (j.rubric == Rubric::kImage) j.system_tag = "sys" + std::to_string(i % 3);
    EXPECT_EQ(judgment_from_json(judgment_to_json(j)), j);
  }
}

TEST(JudgmentJsonTest, Rejections) {
  auto code = [](std::string_view line) {
    try {
      judgment_from_json(line);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kInvalidArgument;
  };
  EXPECT_EQ(code("nope"), ErrorCode::kRecordParse);
  EXPECT_EQ(code(R"({"annotator_id":"a","rubric":"image","criterion":"presence","score":3})"),
            ErrorCode::kRecordParse);
  EXPECT_EQ(code(R"({"item_id":"i","annotator_id":"a","rubric":"audio","criterion":"presence","score":3})"),
            ErrorCode::kUnknownRubric);
  EXPECT_EQ(code(R"({"item_id":"i","annotator_id":"a","rubric":"image","criterion":"fluency","score":3})"),
            ErrorCode::kRecordParse);
  EXPECT_EQ(code(R"({"item_id":"i","annotator_id":"a","rubric":"image","criterion":"presence","score":6})"),
            ErrorCode::kInvalidScore);
  EXPECT_EQ(code(R"({"item_id":"i","annotator_id":"a","rubric":"image","criterion":"presence","score":2.5})"),
            ErrorCode::kInvalidScore);
}

}  // namespace
}  // namespace capalign
