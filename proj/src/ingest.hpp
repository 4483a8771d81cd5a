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

#ifndef CAPALIGN_INGEST_HPP_
#define CAPALIGN_INGEST_HPP_

#include <cstdint>
#include <istream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "alignment.hpp"
#include "data_model.hpp"
#include "embedding_file.hpp"

namespace capalign {

inline constexpr double kDefaultDetectionThreshold = 0.5;

struct ManifestEntry {
  DatasetRecord record;
  std::string raw_line;  // exact bytes, without the trailing newline
  std::uint64_t line_number = 0;
};

// Streaming reader over a line-delimited JSON manifest. Blank lines are
// skipped. next() throws IndexedError(kRecordParse, line) on a malformed line
// and can be called again afterwards to continue with the following line.
class ManifestReader {
 public:
  explicit ManifestReader(std::istream& in) : in_(in) {}

  std::optional<ManifestEntry> next();

 private:
  std::istream& in_;
  std::uint64_t line_ = 0;
};

DatasetRecord parse_manifest_line(const std::string& line, std::uint64_t line_no);

struct LineError {
  std::uint64_t line = 0;
  std::string message;
};

struct ManifestParse {
  std::vector<ManifestEntry> entries;
  std::vector<LineError> errors;
};

ManifestParse parse_manifest(std::istream& in);
ManifestParse parse_manifest_file(const std::string& path);

using ObjectIndex = std::unordered_map<std::string, ObjectAnnotationSet>;

// Keeps only objects scoring strictly above `threshold`. A record listed
// twice has its object lists concatenated.
ObjectIndex load_objects(std::istream& in,
                         double threshold = kDefaultDetectionThreshold);
ObjectIndex load_objects_file(const std::string& path,
                              double threshold = kDefaultDetectionThreshold);

struct JoinPolicy {
  // Build a unit with K=0 when detections or label embeddings are missing,
  // instead of reporting the record as an orphan.
  bool allow_missing_objects = false;
  // Orphan records that have no pooled caption vector.
  bool require_pooled_text = false;
};

struct JoinSources {
  const EmbeddingSource* src = nullptr;
  const EmbeddingSource* tgt = nullptr;
  // Keyed by object label text, not by record id.
  const EmbeddingSource* obj = nullptr;
  const EmbeddingSource* img = nullptr;
  const EmbeddingSource* pooled = nullptr;
  const ObjectIndex* objects = nullptr;
};

struct Orphan {
  std::string id;
  std::vector<std::string> missing;
};

struct JoinResult {
  std::vector<ScoringUnit> units;
  std::vector<Orphan> orphans;
};

// Ids in `records` are partitioned into units and orphans, in input order.
JoinResult join_units(const std::vector<DatasetRecord>& records,
                      const JoinSources& sources, const JoinPolicy& policy);

}  // namespace capalign

#endif  // CAPALIGN_INGEST_HPP_
