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

#ifndef CAPALIGN_DATA_MODEL_HPP_
#define CAPALIGN_DATA_MODEL_HPP_

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace capalign {

// One manifest row: an image reference with its source-language caption and
// the English translation under evaluation.
struct DatasetRecord {
  std::string id;
  std::string image_ref;
  std::string caption_src;
  std::string caption_tgt;
  std::string source_tag;

  bool operator==(const DatasetRecord&) const = default;
};

// Row-major float matrix of per-token embeddings. A zero-row matrix is valid
// (an image with no retained objects).
class TokenEmbeddings {
 public:
  TokenEmbeddings() = default;
  TokenEmbeddings(std::size_t rows, std::size_t dim, std::vector<float> data);
  TokenEmbeddings(std::initializer_list<std::initializer_list<float>> rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  bool empty() const noexcept { return rows_ == 0; }

  std::span<const float> row(std::size_t i) const {
    return {data_.data() + i * dim_, dim_};
  }
  std::span<float> mutable_row(std::size_t i) {
    return {data_.data() + i * dim_, dim_};
  }
  const std::vector<float>& data() const noexcept { return data_; }

  // Appends the rows of `other`, which must share this matrix's dim unless
  // this matrix is empty.
  void append(const TokenEmbeddings& other);

  bool all_finite() const;

  bool operator==(const TokenEmbeddings&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> data_;
};

struct ImageEmbedding {
  std::vector<float> data;

  std::size_t dim() const noexcept { return data.size(); }
  std::span<const float> view() const noexcept { return data; }

  bool operator==(const ImageEmbedding&) const = default;
};

struct DetectedObject {
  std::string label;
  double score = 0.0;

  bool operator==(const DetectedObject&) const = default;
};

struct ObjectAnnotationSet {
  std::string id;
  std::vector<DetectedObject> objects;

  bool operator==(const ObjectAnnotationSet&) const = default;
};

// Trim, collapse whitespace runs to one space, ASCII case-fold, and strip
// trailing punctuation (ASCII and the common CJK full-width marks).
// Idempotent.
std::string normalize_caption(std::string_view text);

// Scales every row to unit L2 norm. Throws IndexedError(kZeroNormRow) naming
// the first all-zero row.
TokenEmbeddings unit_normalize(const TokenEmbeddings& m);

enum class RecordIssue { kMissingId, kMissingTranslation };

std::string_view record_issue_name(RecordIssue issue);

std::vector<RecordIssue> validate_record(const DatasetRecord& r);

}  // namespace capalign

#endif  // CAPALIGN_DATA_MODEL_HPP_
