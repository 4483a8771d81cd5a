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

#include "http_service.hpp"

#include <httplib.h>
#include <json.hpp>

#include <charconv>
#include <fstream>
#include <sstream>

namespace capalign {
namespace {

using nlohmann::json;

constexpr const char* kJson = "application/json";
constexpr const char* kLines = "application/x-ndjson";

void send_error(httplib::Response& res, int status, ErrorCode code,
                const std::string& message) {
  json body = {{"error", std::string(error_code_name(code))},
               {"message", message}};
  res.status = status;
  res.set_content(body.dump(), kJson);
}

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDuplicateJudgment: return 409;
    case ErrorCode::kUnknownTask: return 404;
    case ErrorCode::kIoFailure: return 500;
    default: return 400;
  }
}

std::optional<Rubric> rubric_param(const httplib::Request& req,
                                   httplib::Response& res) {
  if (!req.has_param("rubric")) {
    send_error(res, 400, ErrorCode::kUnknownRubric, "missing 'rubric' parameter");
    return std::nullopt;
  }
  try {
    return parse_rubric(req.get_param_value("rubric"));
  } catch (const Error& e) {
    send_error(res, 400, e.code(), e.what());
    return std::nullopt;
  }
}

json task_json(const AnnotationTask& t) { return json::parse(task_to_json(t)); }

}  // namespace

struct AnnotationServer::Impl {
  AnnotationStore& store;
  ServiceOptions options;
  httplib::Server server;
  int bound_port = -1;

  Impl(AnnotationStore& s, ServiceOptions o) : store(s), options(std::move(o)) {}

  void routes();
};

void AnnotationServer::Impl::routes() {
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });

  server.Get("/tasks/next", [this](const httplib::Request& req,
                                   httplib::Response& res) {
    const auto rubric = rubric_param(req, res);
    if (!rubric) return;
    const std::string annotator =
        req.has_param("annotator") ? req.get_param_value("annotator") : "";
    if (annotator.empty()) {
      send_error(res, 400, ErrorCode::kInvalidArgument,
                 "annotator id must be non-empty");
      return;
    }
    auto task = store.next_task(annotator, *rubric);
    if (!task) {
      res.status = 204;
      return;
    }
    json body = task_json(*task);
    json criteria = json::array();
    for (const auto& c : rubric_criteria(*rubric)) {
      criteria.push_back({{"key", c.key}, {"column", c.column}});
    }
    body["criteria"] = std::move(criteria);
    res.set_content(body.dump(), kJson);
  });

  server.Post("/tasks/import", [this](const httplib::Request& req,
                                      httplib::Response& res) {
    const auto rubric = rubric_param(req, res);
    if (!rubric) return;
    std::istringstream in(req.body);
    try {
      const auto total = store.import_tasks(in, *rubric);
      res.set_content(json{{"tasks", total}}.dump(), kJson);
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), e.code(), e.what());
    }
  });

  server.Post("/judgments", [this](const httplib::Request& req,
                                   httplib::Response& res) {
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      send_error(res, 400, ErrorCode::kRecordParse, "body is not a JSON object");
      return;
    }
    JudgmentEvent ev;
    auto str = [&](const char* key) -> std::optional<std::string> {
      auto it = body.find(key);
      if (it == body.end() || !it->is_string()) return std::nullopt;
      return it->get<std::string>();
    };
    auto task_id = str("task_id");
    auto annotator = str("annotator_id");
    if (!task_id || !annotator) {
      send_error(res, 400, ErrorCode::kRecordParse,
                 "task_id and annotator_id must be strings");
      return;
    }
    ev.task_id = *task_id;
    ev.annotator_id = *annotator;
    auto scores = body.find("scores");
    if (scores == body.end() || !scores->is_object()) {
      send_error(res, 400, ErrorCode::kIncompleteRubric, "scores object missing");
      return;
    }
    for (const auto& [k, v] : scores->items()) {
      if (!v.is_number_integer()) {
        send_error(res, 400, ErrorCode::kInvalidScore,
                   "score for '" + k + "' is not an integer");
        return;
      }
      const auto s = v.get<std::int64_t>();
      const int clamped = s < kMinScore - 1 ? kMinScore - 1
                          : s > kMaxScore + 1 ? kMaxScore + 1
                                              : static_cast<int>(s);
      ev.scores.emplace_back(k, clamped);
    }
    if (auto r = str("rubric")) {
      auto task = store.find_task(ev.task_id);
      if (task && std::string(rubric_name(task->rubric)) != *r) {
        send_error(res, 400, ErrorCode::kUnknownRubric,
                   "task '" + ev.task_id + "' belongs to the " +
                       std::string(rubric_name(task->rubric)) + " rubric");
        return;
      }
    }
    try {
      const auto result = store.submit_judgment(std::move(ev));
      if (!result.accepted) {
        send_error(res, status_for(*result.reason), *result.reason, result.message);
        return;
      }
      res.set_content(R"({"accepted":true})", kJson);
    } catch (const Error& e) {
      send_error(res, status_for(e.code()), e.code(), e.what());
    }
  });

  server.Get("/export", [this](const httplib::Request& req,
                               httplib::Response& res) {
    const auto rubric = rubric_param(req, res);
    if (!rubric) return;
    std::optional<std::int64_t> since;
    if (req.has_param("since")) {
      const auto s = req.get_param_value("since");
      std::int64_t v = 0;
      auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || p != s.data() + s.size()) {
        send_error(res, 400, ErrorCode::kInvalidArgument,
                   "'since' must be an integer millisecond timestamp");
        return;
      }
      since = v;
    }
    std::string out;
    for (const auto& j : store.export_judgments(*rubric, since)) {
      out += judgment_to_json(j);
      out += '\n';
    }
    res.set_content(out, kLines);
  });

  server.Get("/progress", [this](const httplib::Request&, httplib::Response& res) {
    json body = json::object();
    for (Rubric r : {Rubric::kCaption, Rubric::kImage}) {
      const auto p = store.progress(r);
      body[std::string(rubric_name(r))] = {
          {"tasks", p.tasks},
          {"events", p.events},
          {"judgments", p.events * kCriteriaPerRubric},
          {"tasks_with_judgments", p.tasks_with_judgments},
          {"per_annotator", p.per_annotator}};
    }
    res.set_content(body.dump(), kJson);
  });

  if (!options.rubrics_file.empty()) {
    server.Get("/rubrics", [this](const httplib::Request&, httplib::Response& res) {
      std::ifstream in(options.rubrics_file, std::ios::binary);
      if (!in) {
        send_error(res, 500, ErrorCode::kIoFailure,
                   "cannot read " + options.rubrics_file);
        return;
      }
      std::ostringstream ss;
      ss << in.rdbuf();
      res.set_content(ss.str(), kJson);
    });
  }

  if (!options.static_dir.empty()) {
    server.set_mount_point("/static", options.static_dir);
  }
}

AnnotationServer::AnnotationServer(AnnotationStore& store, ServiceOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {
  impl_->routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind() {
  auto& s = impl_->server;
  if (impl_->options.port == 0) {
    impl_->bound_port = s.bind_to_any_port(impl_->options.host);
  } else if (s.bind_to_port(impl_->options.host, impl_->options.port)) {
    impl_->bound_port = impl_->options.port;
  }
  if (impl_->bound_port < 0) {
    throw Error(ErrorCode::kIoFailure,
                "cannot bind " + impl_->options.host + ":" +
                    std::to_string(impl_->options.port));
  }
  return impl_->bound_port;
}

void AnnotationServer::listen() {
  if (impl_->bound_port < 0) {
    throw Error(ErrorCode::kInvalidArgument, "listen() before bind()");
  }
  impl_->server.listen_after_bind();
}

void AnnotationServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

int AnnotationServer::port() const { return impl_->bound_port; }

}  // namespace capalign
