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

#include "ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "error.hpp"

namespace capalign {

using nlohmann::json;

namespace {

[[noreturn]] void parse_error(std::uint64_t line_no, const std::string& what) {
  throw IndexedError(ErrorCode::kRecordParse, line_no,
                     "line " + std::to_string(line_no) + ": " + what);
}

bool is_blank(const std::string& line) {
  return line.find_first_not_of(" \t\r") == std::string::npos;
}

std::string string_field(const json& obj, const char* key, bool required,
                         std::uint64_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) {
    if (required) parse_error(line_no, std::string("missing field '") + key + "'");
    return {};
  }
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return it->dump();
  parse_error(line_no, std::string("field '") + key + "' must be a string");
}

json parse_json_line(const std::string& line, std::uint64_t line_no) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) parse_error(line_no, "invalid JSON");
  if (!j.is_object()) parse_error(line_no, "expected a JSON object");
  return j;
}

}  // namespace

DatasetRecord parse_manifest_line(const std::string& line,
                                  std::uint64_t line_no) {
  const json j = parse_json_line(line, line_no);
  DatasetRecord r;
  r.id = string_field(j, "id", true, line_no);
  r.image_ref = string_field(j, "image_ref", true, line_no);
  r.caption_src = string_field(j, "caption_src", true, line_no);
  r.caption_tgt = string_field(j, "caption_tgt", true, line_no);
  r.source_tag = string_field(j, "source_tag", false, line_no);
  return r;
}

std::optional<ManifestEntry> ManifestReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (is_blank(line)) continue;
    ManifestEntry e;
    e.record = parse_manifest_line(line, line_);
    e.raw_line = std::move(line);
    e.line_number = line_;
    return e;
  }
  if (in_.bad()) throw Error(ErrorCode::kIoFailure, "manifest read failed");
  return std::nullopt;
}

ManifestParse parse_manifest(std::istream& in) {
  ManifestParse out;
  ManifestReader reader(in);
  for (;;) {
    try {
      auto e = reader.next();
      if (!e) break;
      out.entries.push_back(std::move(*e));
    } catch (const IndexedError& err) {
      if (err.code() != ErrorCode::kRecordParse) throw;
      out.errors.push_back({err.index(), err.what()});
    }
  }
  return out;
}

ManifestParse parse_manifest_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open manifest " + path);
  return parse_manifest(in);
}

ObjectIndex load_objects(std::istream& in, double threshold) {
  ObjectIndex index;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const json j = parse_json_line(line, line_no);
    const std::string id = string_field(j, "id", true, line_no);
    auto objs = j.find("objects");
    if (objs == j.end() || !objs->is_array()) {
      parse_error(line_no, "missing 'objects' array");
    }
    ObjectAnnotationSet& set = index[id];
    set.id = id;
    for (const auto& o : *objs) {
      if (!o.is_object()) parse_error(line_no, "object entry must be an object");
      auto label = o.find("label");
      auto score = o.find("score");
      if (label == o.end() || !label->is_string() ||
          label->get<std::string>().empty()) {
        parse_error(line_no, "object label must be a non-empty string");
      }
      if (score == o.end() || !score->is_number()) {
        parse_error(line_no, "object score must be a number");
      }
      const double s = score->get<double>();
      if (!(s >= 0.0 && s <= 1.0)) {
        parse_error(line_no, "object score outside [0,1]");
      }
      if (s > threshold) set.objects.push_back({label->get<std::string>(), s});
    }
  }
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "detections read failed");
  return index;
}

ObjectIndex load_objects_file(const std::string& path, double threshold) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open detections " + path);
  return load_objects(in, threshold);
}

namespace {

bool has_zero_row(const TokenEmbeddings& m) {
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double sq = 0.0;
    for (float v : m.row(i)) sq += static_cast<double>(v) * v;
    if (!(sq > 0.0)) return true;
  }
  return false;
}

std::optional<ImageEmbedding> single_vector(const std::optional<TokenEmbeddings>& m) {
  if (!m || m->rows() != 1) return std::nullopt;
  return ImageEmbedding{m->data()};
}

}  // namespace

JoinResult join_units(const std::vector<DatasetRecord>& records,
                      const JoinSources& sources, const JoinPolicy& policy) {
  JoinResult result;
  std::unordered_set<std::string> seen;
  seen.reserve(records.size());

  for (const auto& record : records) {
    std::vector<std::string> missing;
    if (!seen.insert(record.id).second) {
      result.orphans.push_back({record.id, {"duplicate_id"}});
      continue;
    }
    for (auto issue : validate_record(record)) {
      missing.emplace_back(record_issue_name(issue));
    }
    if (!missing.empty()) {
      result.orphans.push_back({record.id, std::move(missing)});
      continue;
    }

    ScoringUnit unit;
    unit.record = record;
    unit.obj_labels.id = record.id;

    auto src = sources.src ? sources.src->find(record.id) : std::nullopt;
    auto tgt = sources.tgt ? sources.tgt->find(record.id) : std::nullopt;
    auto img_raw = sources.img ? sources.img->find(record.id) : std::nullopt;
    if (!src || src->empty()) missing.emplace_back("src_embedding");
    if (!tgt || tgt->empty()) missing.emplace_back("tgt_embedding");
    auto img = single_vector(img_raw);
    if (!img) missing.emplace_back("image_embedding");
    if (sources.pooled) {
      unit.pooled_tgt = single_vector(sources.pooled->find(record.id));
    }
    if (policy.require_pooled_text && !unit.pooled_tgt) {
      missing.emplace_back("pooled_text");
    }

    const ObjectAnnotationSet* detected = nullptr;
    if (sources.objects) {
      auto it = sources.objects->find(record.id);
      if (it != sources.objects->end()) detected = &it->second;
    }
    if (!detected) {
      if (!policy.allow_missing_objects) missing.emplace_back("objects");
    } else {
      bool label_missing = false;
      for (const auto& obj : detected->objects) {
        auto block = sources.obj ? sources.obj->find(obj.label) : std::nullopt;
        if (!block || block->empty()) {
          label_missing = true;
          continue;
        }
        if (!unit.obj_emb.empty() && block->dim() != unit.obj_emb.dim()) {
          label_missing = true;
          continue;
        }
        unit.obj_emb.append(*block);
        unit.obj_labels.objects.push_back(obj);
      }
      if (label_missing && !policy.allow_missing_objects) {
        missing.emplace_back("object_embedding");
      }
    }

    if (missing.empty()) {
      const std::size_t dim = tgt->dim();
      bool dims_ok = src->dim() == dim &&
                     (unit.obj_emb.empty() || unit.obj_emb.dim() == dim);
      if (unit.pooled_tgt) dims_ok = dims_ok && unit.pooled_tgt->dim() == img->dim();
      if (!policy.require_pooled_text) dims_ok = dims_ok && img->dim() == dim;
      if (!dims_ok) missing.emplace_back("dim_mismatch");

      const bool finite =
          src->all_finite() && tgt->all_finite() && unit.obj_emb.all_finite() &&
          std::all_of(img->data.begin(), img->data.end(),
                      [](float v) { return std::isfinite(v); }) &&
          (!unit.pooled_tgt ||
           std::all_of(unit.pooled_tgt->data.begin(), unit.pooled_tgt->data.end(),
                       [](float v) { return std::isfinite(v); }));
      if (!finite) {
        missing.emplace_back("non_finite");
      } else if (has_zero_row(*src) || has_zero_row(*tgt) ||
                 has_zero_row(unit.obj_emb) ||
                 has_zero_row(TokenEmbeddings(1, img->dim(), img->data)) ||
                 (unit.pooled_tgt &&
                  has_zero_row(TokenEmbeddings(1, unit.pooled_tgt->dim(),
                                               unit.pooled_tgt->data)))) {
        missing.emplace_back("zero_norm_row");
      }
    }

    if (!missing.empty()) {
      result.orphans.push_back({record.id, std::move(missing)});
      continue;
    }
    unit.src_emb = std::move(*src);
    unit.tgt_emb = std::move(*tgt);
    unit.img_emb = std::move(*img);
    result.units.push_back(std::move(unit));
  }
  return result;
}

}  // namespace capalign
