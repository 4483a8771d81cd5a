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

#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtest/gtest.h"
#include "annotation.hpp"
#include "http_harness.hpp"
#include "rubric.hpp"
#include "support.hpp"

namespace capalign {
namespace {

using nlohmann::json;

std::string image_rows(int n) {
  std::string s;
  for (int i = 0; i < n; ++i) {
    s += json{{"id", "t" + std::to_string(i)},
              {"prompt", "prompt " + std::to_string(i)},
              {"image_ref", "gen/" + std::to_string(i) + ".png"},
              {"system_tag", i % 2 ? "tuned" : "vanilla"}}
             .dump() +
         "\n";
  }
  return s;
}

json full_scores(Rubric r, int v) {
  json s = json::object();
  for (const auto& c : rubric_criteria(r)) s[std::string(c.key)] = v;
  return s;
}

class HttpTest : public ::testing::Test {
 protected:
  void SetUp() override {
    store_ = AnnotationStore::open(dir_.path());
    ServiceOptions o;
    o.rubrics_file = std::string(CAPALIGN_DATA_DIR) + "/rubrics.json";
    o.static_dir = dir_.path().string();
    testing::write_file(dir_.file("pic.png"), "PNGDATA");
    harness_ = std::make_unique<testing::ServerHarness>(*store_, o);
  }
  void TearDown() override { harness_.reset(); }

  httplib::Result post_json(const std::string& path, const json& body) {
    auto c = harness_->client();
    return c.Post(path, body.dump(), "application/json");
  }
  httplib::Result submit(const std::string& task, const std::string& who, const json& scores) {
    return post_json("/judgments", {{"task_id", task}, {"annotator_id", who}, {"scores", scores}});
  }

  testing::TempDir dir_;
  std::unique_ptr<AnnotationStore> store_;
  std::unique_ptr<testing::ServerHarness> harness_;
};

TEST_F(HttpTest, ImportNextSubmitExport) {
  auto c = harness_->client();
  auto imp = c.Post("/tasks/import?rubric=image", image_rows(3), "application/x-ndjson");
  ASSERT_TRUE(imp);
  EXPECT_EQ(imp->status, 200);
  EXPECT_EQ(json::parse(imp->body)["tasks"], 3);

  auto next = c.Get("/tasks/next?annotator=ann&rubric=image");
  ASSERT_TRUE(next);
  ASSERT_EQ(next->status, 200);
  const auto task = json::parse(next->body);
  EXPECT_EQ(task["task_id"], "t0");
  EXPECT_EQ(task["criteria"].size(), 6u);
  EXPECT_EQ(task["criteria"][0]["column"], "Presence");
  EXPECT_EQ(next->get_header_value("Access-Control-Allow-Origin"), "*");

  auto ok = submit("t0", "ann", {{"presence", 3}, {"localization", 3}, {"appropriateness", 2},
                                 {"aesthetics", 2}, {"consistency", 1}, {"cohesion", 2}});
  ASSERT_TRUE(ok);
  EXPECT_EQ(ok->status, 200);
  EXPECT_EQ(json::parse(ok->body)["accepted"], true);

  auto exp = c.Get("/export?rubric=image");
  ASSERT_TRUE(exp);
  EXPECT_EQ(exp->status, 200);
  std::istringstream lines(exp->body);
  std::vector<HumanJudgment> rows;
  for (std::string l; std::getline(lines, l);) rows.push_back(judgment_from_json(l));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[0].criterion, "presence");
  EXPECT_EQ(rows[0].score, 3);
  EXPECT_EQ(rows[0].system_tag, "vanilla");
  auto later = c.Get("/export?rubric=image&since=" + std::to_string(rows[0].timestamp + 1));
  EXPECT_EQ(later->body, "");

  auto prog = c.Get("/progress");
  const auto p = json::parse(prog->body);
  EXPECT_EQ(p["image"]["tasks"], 3);
  EXPECT_EQ(p["image"]["judgments"], 6);
  EXPECT_EQ(p["image"]["per_annotator"]["ann"], 1);
  EXPECT_EQ(p["caption"]["tasks"], 0);
}

TEST_F(HttpTest, StatusCodes) {
  auto c = harness_->client();
  c.Post("/tasks/import?rubric=image", image_rows(1), "application/x-ndjson");
  EXPECT_EQ(c.Get("/tasks/next?annotator=a")->status, 400);
  EXPECT_EQ(c.Get("/tasks/next?annotator=a&rubric=audio")->status, 400);
  EXPECT_EQ(c.Get("/tasks/next?rubric=image")->status, 400);
  EXPECT_EQ(c.Get("/tasks/next?annotator=a&rubric=caption")->status, 204);

  auto incomplete = full_scores(Rubric::kImage, 3);
  incomplete.erase("cohesion");
  auto r = submit("t0", "a", incomplete);
  EXPECT_EQ(r->status, 400);
  EXPECT_EQ(json::parse(r->body)["error"], "IncompleteRubric");
  auto out_of_range = full_scores(Rubric::kImage, 3);
  out_of_range["presence"] = 6;
  EXPECT_EQ(json::parse(submit("t0", "a", out_of_range)->body)["error"], "InvalidScore");
  out_of_range["presence"] = 99999999999LL;
  EXPECT_EQ(submit("t0", "a", out_of_range)->status, 400);
  out_of_range["presence"] = "five";
  EXPECT_EQ(submit("t0", "a", out_of_range)->status, 400);
  EXPECT_EQ(submit("missing", "a", full_scores(Rubric::kImage, 3))->status, 404);
  EXPECT_EQ(c.Post("/judgments", "{", "application/json")->status, 400);
  EXPECT_EQ(post_json("/judgments", {{"task_id", "t0"}, {"annotator_id", "a"},
                                     {"rubric", "caption"},
                                     {"scores", full_scores(Rubric::kImage, 3)}})
                ->status,
            400);

  EXPECT_EQ(submit("t0", "a", full_scores(Rubric::kImage, 4))->status, 200);
  EXPECT_EQ(c.Get("/tasks/next?annotator=a&rubric=image")->status, 204);
  auto dup = submit("t0", "a", full_scores(Rubric::kImage, 4));
  EXPECT_EQ(dup->status, 409);
  EXPECT_EQ(json::parse(dup->body)["error"], "DuplicateJudgment");

  EXPECT_EQ(c.Post("/tasks/import?rubric=image", "{\"id\":\"x\"}\n", "text/plain")->status, 400);
  EXPECT_EQ(c.Get("/export?rubric=image&since=abc")->status, 400);
  EXPECT_EQ(c.Options("/judgments")->status, 204);
}

TEST_F(HttpTest, RubricsAndStatic) {
  auto c = harness_->client();
  auto r = c.Get("/rubrics");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  const auto doc = json::parse(r->body);
  EXPECT_EQ(doc["caption"].size(), 6u);
  EXPECT_EQ(doc["image"][0]["key"], "presence");
  auto s = c.Get("/static/pic.png");
  ASSERT_TRUE(s);
  EXPECT_EQ(s->status, 200);
  EXPECT_EQ(s->body, "PNGDATA");
  EXPECT_EQ(c.Get("/static/none.png")->status, 404);
}

TEST_F(HttpTest, CompleteSubmissionVisibleInNextExport) {
  auto c = harness_->client();
  c.Post("/tasks/import?rubric=image", image_rows(2), "application/x-ndjson");
  for (int i = 0; i < 2; ++i) {
    auto t = json::parse(c.Get("/tasks/next?annotator=z&rubric=image")->body);
    ASSERT_EQ(submit(t["task_id"], "z", full_scores(Rubric::kImage, i + 1))->status, 200);
    std::istringstream lines(c.Get("/export?rubric=image")->body);
    std::size_t n = 0;
    for (std::string l; std::getline(lines, l);) ++n;
    EXPECT_EQ(n, 6u * (i + 1));
  }
}

}  // namespace
}  // namespace capalign
