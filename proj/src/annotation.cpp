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

#include "annotation.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <cerrno>
#include <chrono>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <tuple>

#include "hashing.hpp"
#include <json.hpp>

namespace capalign {
namespace {

using nlohmann::json;

constexpr const char* kTasksFile = "tasks.jsonl";
constexpr const char* kJudgmentsFile = "judgments.jsonl";

std::int64_t system_clock_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string required_string(const json& row, const char* key,
                            std::uint64_t line_no) {
  auto it = row.find(key);
  if (it == row.end() || !it->is_string() ||
      it->get_ref<const std::string&>().empty()) {
    throw IndexedError(ErrorCode::kRecordParse, line_no,
                       "line " + std::to_string(line_no) + ": missing or empty '" +
                           key + "'");
  }
  return it->get<std::string>();
}

// Reads complete lines; a trailing fragment without '\n' is reported through
// `partial_at` (byte offset where it starts).
std::vector<std::string> read_complete_lines(const std::filesystem::path& p,
                                             std::optional<std::uintmax_t>& partial_at) {
  std::vector<std::string> lines;
  std::ifstream in(p, std::ios::binary);
  if (!in) return lines;
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::size_t start = 0;
  while (start < content.size()) {
    const auto nl = content.find('\n', start);
    if (nl == std::string::npos) {
      partial_at = start;
      break;
    }
    std::string line = content.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = nl + 1;
  }
  return lines;
}

}  // namespace

std::string task_to_json(const AnnotationTask& task) {
  json j = json::object();
  j["task_id"] = task.task_id;
  j["rubric"] = std::string(rubric_name(task.rubric));
  if (task.rubric == Rubric::kCaption) {
    j["caption_src"] = task.caption_src;
    j["caption_tgt"] = task.caption_tgt;
    j["image_ref"] = task.image_ref;
  } else {
    j["prompt"] = task.prompt;
    j["image_ref"] = task.image_ref;
    j["system_tag"] = task.system_tag;
  }
  return j.dump();
}

AnnotationTask parse_task_row(std::string_view line, Rubric rubric,
                              std::uint64_t line_no) {
  json row;
  try {
    row = json::parse(line);
  } catch (const json::parse_error& e) {
    throw IndexedError(ErrorCode::kRecordParse, line_no,
                       "line " + std::to_string(line_no) + ": " + e.what());
  }
  if (!row.is_object()) {
    throw IndexedError(ErrorCode::kRecordParse, line_no,
                       "line " + std::to_string(line_no) + ": not an object");
  }
  AnnotationTask t;
  t.rubric = rubric;
  if (rubric == Rubric::kCaption) {
    t.caption_src = required_string(row, "caption_src", line_no);
    t.caption_tgt = required_string(row, "caption_tgt", line_no);
    t.image_ref = required_string(row, "image_ref", line_no);
  } else {
    t.prompt = required_string(row, "prompt", line_no);
    t.image_ref = required_string(row, "image_ref", line_no);
    t.system_tag = required_string(row, "system_tag", line_no);
  }
  auto id = row.find("id");
  if (id == row.end()) id = row.find("task_id");
  if (id != row.end() && id->is_string() &&
      !id->get_ref<const std::string&>().empty()) {
    t.task_id = id->get<std::string>();
  } else if (id != row.end() && id->is_number_integer()) {
    t.task_id = std::to_string(id->get<std::int64_t>());
  } else if (id != row.end()) {
    throw IndexedError(ErrorCode::kRecordParse, line_no,
                       "line " + std::to_string(line_no) + ": bad 'id'");
  } else {
    std::string key(rubric_name(rubric));
    for (const auto* f : {&t.caption_src, &t.caption_tgt, &t.image_ref,
                          &t.prompt, &t.system_tag}) {
      key += '\x1f';
      key += *f;
    }
    t.task_id = hex64(fnv1a64(key));
  }
  return t;
}

AnnotationStore::AnnotationStore(std::filesystem::path dir, Clock clock)
    : dir_(std::move(dir)), clock_(std::move(clock)) {
  if (!clock_) clock_ = system_clock_ms;
}

std::unique_ptr<AnnotationStore> AnnotationStore::open(
    const std::filesystem::path& dir, Clock clock) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIoFailure,
                "cannot create data directory " + dir.string());
  }
  std::unique_ptr<AnnotationStore> store(
      new AnnotationStore(dir, std::move(clock)));
  store->replay();
  return store;
}

void AnnotationStore::replay() {
  auto load = [&](const char* name, auto&& apply) {
    const auto path = dir_ / name;
    std::optional<std::uintmax_t> partial_at;
    auto lines = read_complete_lines(path, partial_at);
    if (partial_at) {
      std::filesystem::resize_file(path, *partial_at);
      warnings_.push_back(std::string(name) +
                          ": discarded partial final line at byte " +
                          std::to_string(*partial_at));
    }
    std::uint64_t n = 0;
    for (const auto& line : lines) {
      ++n;
      if (line.empty()) continue;
      try {
        apply(json::parse(line), n);
      } catch (const json::exception& e) {
        throw IndexedError(ErrorCode::kRecordParse, n,
                           std::string(name) + " line " + std::to_string(n) +
                               ": " + e.what());
      }
    }
  };

  load(kTasksFile, [&](const json& j, std::uint64_t n) {
    const Rubric rubric = parse_rubric(j.at("rubric").get<std::string>());
    AnnotationTask t = parse_task_row(j.dump(), rubric, n);
    t.task_id = j.at("task_id").get<std::string>();
    apply_task(std::move(t));
  });
  load(kJudgmentsFile, [&](const json& j, std::uint64_t n) {
    StoredEvent e;
    e.task_id = j.at("task_id").get<std::string>();
    e.annotator_id = j.at("annotator_id").get<std::string>();
    e.rubric = parse_rubric(j.at("rubric").get<std::string>());
    e.timestamp = j.at("ts").get<std::int64_t>();
    const auto& scores = j.at("scores");
    for (const auto& c : rubric_criteria(e.rubric)) {
      e.scores.emplace_back(std::string(c.key),
                            scores.at(std::string(c.key)).get<int>());
    }
    if (!task_index_.contains(e.task_id)) {
      throw IndexedError(ErrorCode::kUnknownTask, n,
                         std::string(kJudgmentsFile) + " line " +
                             std::to_string(n) + ": unknown task '" +
                             e.task_id + "'");
    }
    apply_event(std::move(e));
  });
}

void AnnotationStore::append_line(const std::filesystem::path& file,
                                  const std::string& line) {
  const std::string buf = line + "\n";
  const int fd = ::open(file.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC,
                        0644);
  if (fd < 0) {
    throw Error(ErrorCode::kIoFailure,
                "open " + file.string() + ": " + std::strerror(errno));
  }
  // One write() per line so concurrent appenders never interleave bytes.
  const ssize_t w = ::write(fd, buf.data(), buf.size());
  const int err = errno;
  const bool synced = ::fsync(fd) == 0;
  ::close(fd);
  if (w != static_cast<ssize_t>(buf.size()) || !synced) {
    throw Error(ErrorCode::kIoFailure,
                "append " + file.string() + ": " + std::strerror(err));
  }
}

void AnnotationStore::apply_task(AnnotationTask task) {
  auto [it, inserted] = task_index_.emplace(task.task_id, tasks_.size());
  if (inserted) tasks_.push_back(std::move(task));
}

void AnnotationStore::apply_event(StoredEvent event) {
  judged_by_[event.task_id].insert(event.annotator_id);
  events_.push_back(std::move(event));
}

std::size_t AnnotationStore::import_tasks(std::istream& in, Rubric rubric) {
  std::vector<AnnotationTask> rows;
  std::string line;
  std::uint64_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    rows.push_back(parse_task_row(line, rubric, n));
  }
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "task file read failed");

  std::unique_lock lock(mu_);
  std::unordered_map<std::string, const AnnotationTask*> batch;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& t = rows[i];
    const AnnotationTask* prior = nullptr;
    if (auto it = task_index_.find(t.task_id); it != task_index_.end()) {
      prior = &tasks_[it->second];
    } else if (auto b = batch.find(t.task_id); b != batch.end()) {
      prior = b->second;
    }
    if (prior != nullptr && !(*prior == t)) {
      throw IndexedError(ErrorCode::kRecordParse, i + 1,
                         "task id '" + t.task_id +
                             "' already registered with a different payload");
    }
    if (prior == nullptr) batch.emplace(t.task_id, &t);
  }
  std::string block;
  std::vector<AnnotationTask> fresh;
  for (auto& t : rows) {
    if (task_index_.contains(t.task_id)) continue;
    if (std::any_of(fresh.begin(), fresh.end(),
                    [&](const AnnotationTask& f) { return f.task_id == t.task_id; })) {
      continue;
    }
    fresh.push_back(t);
  }
  for (const auto& t : fresh) block += task_to_json(t) + "\n";
  if (!block.empty()) {
    block.pop_back();
    append_line(dir_ / kTasksFile, block);
  }
  for (auto& t : fresh) apply_task(std::move(t));
  return std::count_if(tasks_.begin(), tasks_.end(),
                       [&](const AnnotationTask& t) { return t.rubric == rubric; });
}

std::optional<AnnotationTask> AnnotationStore::next_task(
    std::string_view annotator_id, Rubric rubric) const {
  if (annotator_id.empty()) {
    throw Error(ErrorCode::kInvalidArgument, "annotator id must be non-empty");
  }
  std::shared_lock lock(mu_);
  const AnnotationTask* best = nullptr;
  std::size_t best_count = 0;
  const std::string annotator(annotator_id);
  for (const auto& t : tasks_) {
    if (t.rubric != rubric) continue;
    std::size_t count = 0;
    if (auto it = judged_by_.find(t.task_id); it != judged_by_.end()) {
      if (it->second.contains(annotator)) continue;
      count = it->second.size();
    }
    if (best == nullptr ||
        std::tie(count, t.task_id) < std::tie(best_count, best->task_id)) {
      best = &t;
      best_count = count;
    }
  }
  if (best == nullptr) return std::nullopt;
  return *best;
}

SubmitResult AnnotationStore::submit_judgment(JudgmentEvent event) {
  auto reject = [](ErrorCode code, std::string msg) {
    return SubmitResult{false, code, std::move(msg)};
  };
  if (event.annotator_id.empty()) {
    return reject(ErrorCode::kInvalidArgument, "annotator id must be non-empty");
  }

  std::unique_lock lock(mu_);
  auto ti = task_index_.find(event.task_id);
  if (ti == task_index_.end()) {
    return reject(ErrorCode::kUnknownTask, "unknown task '" + event.task_id + "'");
  }
  const Rubric rubric = tasks_[ti->second].rubric;
  const auto criteria = rubric_criteria(rubric);

  std::array<std::optional<int>, kCriteriaPerRubric> slots{};
  for (const auto& [key, score] : event.scores) {
    const auto idx = criterion_index(rubric, key);
    if (!idx) {
      return reject(ErrorCode::kIncompleteRubric,
                    "criterion '" + key + "' is not part of the " +
                        std::string(rubric_name(rubric)) + " rubric");
    }
    if (slots[*idx]) {
      return reject(ErrorCode::kIncompleteRubric,
                    "criterion '" + key + "' given twice");
    }
    if (score < kMinScore || score > kMaxScore) {
      return reject(ErrorCode::kInvalidScore,
                    "score " + std::to_string(score) + " for '" + key +
                        "' is outside 1-5");
    }
    slots[*idx] = score;
  }
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!slots[i]) {
      return reject(ErrorCode::kIncompleteRubric,
                    "criterion '" + std::string(criteria[i].key) + "' missing");
    }
  }
  if (auto it = judged_by_.find(event.task_id);
      it != judged_by_.end() && it->second.contains(event.annotator_id)) {
    return reject(ErrorCode::kDuplicateJudgment,
                  "annotator '" + event.annotator_id + "' already judged '" +
                      event.task_id + "'");
  }

  StoredEvent stored;
  stored.task_id = event.task_id;
  stored.annotator_id = event.annotator_id;
  stored.rubric = rubric;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    stored.scores.emplace_back(std::string(criteria[i].key), *slots[i]);
  }
  stored.timestamp = clock_();

  json line = json::object();
  line["task_id"] = stored.task_id;
  line["annotator_id"] = stored.annotator_id;
  line["rubric"] = std::string(rubric_name(rubric));
  json scores = json::object();
  for (const auto& [k, v] : stored.scores) scores[k] = v;
  line["scores"] = std::move(scores);
  line["ts"] = stored.timestamp;
  append_line(dir_ / kJudgmentsFile, line.dump());
  apply_event(std::move(stored));
  return SubmitResult{true, std::nullopt, {}};
}

std::vector<HumanJudgment> AnnotationStore::export_judgments(
    Rubric rubric, std::optional<std::int64_t> since) const {
  std::shared_lock lock(mu_);
  std::vector<const StoredEvent*> picked;
  for (const auto& e : events_) {
    if (e.rubric != rubric) continue;
    if (since && e.timestamp < *since) continue;
    picked.push_back(&e);
  }
  std::stable_sort(picked.begin(), picked.end(),
                   [](const StoredEvent* a, const StoredEvent* b) {
                     return std::tie(a->timestamp, a->task_id, a->annotator_id) <
                            std::tie(b->timestamp, b->task_id, b->annotator_id);
                   });
  std::vector<HumanJudgment> out;
  out.reserve(picked.size() * kCriteriaPerRubric);
  for (const auto* e : picked) {
    const auto& task = tasks_[task_index_.at(e->task_id)];
    for (const auto& [k, v] : e->scores) {
      HumanJudgment j;
      j.item_id = e->task_id;
      j.annotator_id = e->annotator_id;
      j.rubric = rubric;
      j.criterion = k;
      j.score = v;
      j.timestamp = e->timestamp;
      j.system_tag = task.system_tag;
      out.push_back(std::move(j));
    }
  }
  return out;
}

RubricProgress AnnotationStore::progress(Rubric rubric) const {
  std::shared_lock lock(mu_);
  RubricProgress p;
  for (const auto& t : tasks_) {
    if (t.rubric != rubric) continue;
    ++p.tasks;
    if (auto it = judged_by_.find(t.task_id);
        it != judged_by_.end() && !it->second.empty()) {
      ++p.tasks_with_judgments;
    }
  }
  for (const auto& e : events_) {
    if (e.rubric != rubric) continue;
    ++p.events;
    ++p.per_annotator[e.annotator_id];
  }
  return p;
}

std::optional<AnnotationTask> AnnotationStore::find_task(
    std::string_view task_id) const {
  std::shared_lock lock(mu_);
  auto it = task_index_.find(std::string(task_id));
  if (it == task_index_.end()) return std::nullopt;
  return tasks_[it->second];
}

std::vector<std::string> AnnotationStore::recovery_warnings() const {
  std::shared_lock lock(mu_);
  return warnings_;
}

}  // namespace capalign
