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

// Annotation task store backed by two append-only line logs in a data
// directory:
//
//   tasks.jsonl      one imported task per line
//   judgments.jsonl  {task_id, annotator_id, rubric, scores:{criterion:score}, ts}
//
// Both are replayed on open. A trailing line without a newline is the remnant
// of an interrupted append; it is dropped, the file is truncated back to the
// last complete line, and a warning is recorded.

#ifndef CAPALIGN_ANNOTATION_HPP_
#define CAPALIGN_ANNOTATION_HPP_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <istream>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "error.hpp"
#include "rubric.hpp"

namespace capalign {

struct AnnotationTask {
  std::string task_id;
  Rubric rubric = Rubric::kCaption;
  // caption rubric
  std::string caption_src;
  std::string caption_tgt;
  // both rubrics
  std::string image_ref;
  // image rubric
  std::string prompt;
  std::string system_tag;

  bool operator==(const AnnotationTask&) const = default;
};

std::string task_to_json(const AnnotationTask& task);

struct JudgmentEvent {
  std::string task_id;
  std::string annotator_id;
  std::vector<std::pair<std::string, int>> scores;
  std::int64_t timestamp = 0;  // assigned by the store on acceptance
};

struct SubmitResult {
  bool accepted = false;
  std::optional<ErrorCode> reason;
  std::string message;
};

struct RubricProgress {
  std::size_t tasks = 0;
  std::size_t events = 0;
  std::size_t tasks_with_judgments = 0;
  std::map<std::string, std::size_t> per_annotator;
};

class AnnotationStore {
 public:
  using Clock = std::function<std::int64_t()>;

  // Creates the directory if needed and replays both logs.
  static std::unique_ptr<AnnotationStore> open(const std::filesystem::path& dir,
                                               Clock clock = {});

  // Registers every row of a line-delimited task file. Rows are validated
  // before anything is persisted; a malformed row throws kRecordParse and
  // registers nothing. Rows whose id already exists with an identical payload
  // are skipped. Returns the number of tasks of this rubric afterwards.
  std::size_t import_tasks(std::istream& in, Rubric rubric);

  // Least-judged open task this annotator has not judged yet, ties broken by
  // task id. Throws kInvalidArgument for an empty annotator id.
  std::optional<AnnotationTask> next_task(std::string_view annotator_id,
                                          Rubric rubric) const;

  SubmitResult submit_judgment(JudgmentEvent event);

  // One row per (accepted event, criterion) with ts >= since, ordered by
  // timestamp, task id, annotator id, then rubric column order.
  std::vector<HumanJudgment> export_judgments(
      Rubric rubric, std::optional<std::int64_t> since = std::nullopt) const;

  RubricProgress progress(Rubric rubric) const;
  std::optional<AnnotationTask> find_task(std::string_view task_id) const;
  std::vector<std::string> recovery_warnings() const;

 private:
  struct StoredEvent {
    std::string task_id;
    std::string annotator_id;
    Rubric rubric;
    std::vector<std::pair<std::string, int>> scores;  // rubric column order
    std::int64_t timestamp;
  };

  AnnotationStore(std::filesystem::path dir, Clock clock);
  void replay();
  void append_line(const std::filesystem::path& file, const std::string& line);
  void apply_task(AnnotationTask task);
  void apply_event(StoredEvent event);

  std::filesystem::path dir_;
  Clock clock_;
  mutable std::shared_mutex mu_;
  std::vector<std::string> warnings_;
  std::vector<AnnotationTask> tasks_;  // import order
  std::unordered_map<std::string, std::size_t> task_index_;
  std::vector<StoredEvent> events_;
  std::unordered_map<std::string, std::unordered_set<std::string>> judged_by_;
};

// Parses one task row of the import format. Throws kRecordParse.
AnnotationTask parse_task_row(std::string_view line, Rubric rubric,
                              std::uint64_t line_no);

}  // namespace capalign

#endif  // CAPALIGN_ANNOTATION_HPP_
