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

// JSON-over-HTTP front end for AnnotationStore.
//
//   GET  /tasks/next?annotator=&rubric=   200 task | 204 exhausted | 400
//   POST /tasks/import?rubric=            body: task rows, one per line
//   POST /judgments                       200 | 400 | 404 unknown task | 409 duplicate
//   GET  /export?rubric=&since=           judgment lines
//   GET  /progress
//   GET  /rubrics                         criteria and anchor text
//   GET  /static/<file>                   images, when a static dir is set

#ifndef CAPALIGN_HTTP_SERVICE_HPP_
#define CAPALIGN_HTTP_SERVICE_HPP_

#include <memory>
#include <string>

#include "annotation.hpp"

namespace capalign {

struct ServiceOptions {
  std::string host = "127.0.0.1";
  int port = 8080;          // 0 picks an ephemeral port
  std::string static_dir;   // empty disables /static
  std::string rubrics_file; // served verbatim at /rubrics; empty disables it
};

class AnnotationServer {
 public:
  AnnotationServer(AnnotationStore& store, ServiceOptions options);
  ~AnnotationServer();
  AnnotationServer(const AnnotationServer&) = delete;
  AnnotationServer& operator=(const AnnotationServer&) = delete;

  // Binds the socket and returns the bound port. Throws kIoFailure.
  int bind();
  // Blocks serving requests until stop(). bind() must have succeeded.
  void listen();
  void stop();
  int port() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace capalign

#endif  // CAPALIGN_HTTP_SERVICE_HPP_
