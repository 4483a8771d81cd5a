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

#include "data_model.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "error.hpp"

namespace capalign {

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIoFailure: return "IoFailure";
    case ErrorCode::kRecordParse: return "RecordParse";
    case ErrorCode::kFormatMismatch: return "FormatMismatch";
    case ErrorCode::kTruncated: return "Truncated";
    case ErrorCode::kZeroNormRow: return "ZeroNormRow";
    case ErrorCode::kDimMismatch: return "DimMismatch";
    case ErrorCode::kEmptyTokenSet: return "EmptyTokenSet";
    case ErrorCode::kMissingPooledText: return "MissingPooledText";
    case ErrorCode::kNonFiniteScore: return "NonFiniteScore";
    case ErrorCode::kUnknownStrategy: return "UnknownStrategy";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kDegenerateVariance: return "DegenerateVariance";
    case ErrorCode::kEmptyJoin: return "EmptyJoin";
    case ErrorCode::kEmptyGroup: return "EmptyGroup";
    case ErrorCode::kSeedArity: return "SeedArity";
    case ErrorCode::kNoCaptionsParsed: return "NoCaptionsParsed";
    case ErrorCode::kRoundFailed: return "RoundFailed";
    case ErrorCode::kSampleTooLarge: return "SampleTooLarge";
    case ErrorCode::kUnknownRubric: return "UnknownRubric";
    case ErrorCode::kInvalidScore: return "InvalidScore";
    case ErrorCode::kIncompleteRubric: return "IncompleteRubric";
    case ErrorCode::kDuplicateJudgment: return "DuplicateJudgment";
    case ErrorCode::kUnknownTask: return "UnknownTask";
    case ErrorCode::kProviderFailure: return "ProviderFailure";
  }
  return "Unknown";
}

TokenEmbeddings::TokenEmbeddings(std::size_t rows, std::size_t dim,
                                 std::vector<float> data)
    : rows_(rows), dim_(dim), data_(std::move(data)) {
  if (dim_ == 0) {
    throw Error(ErrorCode::kInvalidArgument, "embedding dim must be >= 1");
  }
  if (data_.size() != rows_ * dim_) {
    throw Error(ErrorCode::kDimMismatch,
                "embedding payload size " + std::to_string(data_.size()) +
                    " != rows*dim " + std::to_string(rows_ * dim_));
  }
}

TokenEmbeddings::TokenEmbeddings(
    std::initializer_list<std::initializer_list<float>> rows) {
  rows_ = rows.size();
  dim_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * dim_);
  for (const auto& r : rows) {
    if (r.size() != dim_) {
      throw Error(ErrorCode::kDimMismatch, "ragged embedding rows");
    }
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

void TokenEmbeddings::append(const TokenEmbeddings& other) {
  if (other.rows_ == 0) return;
  if (rows_ == 0 && data_.empty()) {
    dim_ = other.dim_;
  } else if (dim_ != other.dim_) {
    throw Error(ErrorCode::kDimMismatch,
                "cannot append dim " + std::to_string(other.dim_) +
                    " rows to dim " + std::to_string(dim_));
  }
  data_.insert(data_.end(), other.data_.begin(), other.data_.end());
  rows_ += other.rows_;
}

bool TokenEmbeddings::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](float v) { return std::isfinite(v); });
}

namespace {

bool is_space(unsigned char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' ||
         c == '\v';
}

bool is_terminal_ascii_punct(unsigned char c) {
  switch (c) {
    case '.': case ',': case '!': case '?': case ';': case ':':
      return true;
    default:
      return false;
  }
}

// UTF-8 encodings of 。！？，；：and the ellipsis.
constexpr std::array<std::string_view, 7> kWideTerminalPunct = {
    "\xE3\x80\x82", "\xEF\xBC\x81", "\xEF\xBC\x9F", "\xEF\xBC\x8C",
    "\xEF\xBC\x9B", "\xEF\xBC\x9A", "\xE2\x80\xA6"};

}  // namespace

std::string normalize_caption(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (unsigned char c : text) {
    if (is_space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(c < 0x80 ? static_cast<char>(std::tolower(c))
                           : static_cast<char>(c));
  }

  bool changed = true;
  while (changed && !out.empty()) {
    changed = false;
    auto last = static_cast<unsigned char>(out.back());
    if (is_space(last) || is_terminal_ascii_punct(last)) {
      out.pop_back();
      changed = true;
      continue;
    }
    for (auto wide : kWideTerminalPunct) {
      if (out.size() >= wide.size() &&
          std::string_view(out).substr(out.size() - wide.size()) == wide) {
        out.resize(out.size() - wide.size());
        changed = true;
        break;
      }
    }
  }
  return out;
}

TokenEmbeddings unit_normalize(const TokenEmbeddings& m) {
  if (m.rows() == 0) return m;
  std::vector<float> data(m.data());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    double sq = 0.0;
    for (float v : m.row(i)) sq += static_cast<double>(v) * v;
    if (!(sq > 0.0)) {
      throw IndexedError(ErrorCode::kZeroNormRow, i,
                         "zero-norm embedding row " + std::to_string(i));
    }
    const double inv = 1.0 / std::sqrt(sq);
    for (std::size_t j = 0; j < m.dim(); ++j) {
      auto& v = data[i * m.dim() + j];
      v = static_cast<float>(v * inv);
    }
  }
  return TokenEmbeddings(m.rows(), m.dim(), std::move(data));
}

std::string_view record_issue_name(RecordIssue issue) {
  switch (issue) {
    case RecordIssue::kMissingId: return "MissingId";
    case RecordIssue::kMissingTranslation: return "MissingTranslation";
  }
  return "Unknown";
}

std::vector<RecordIssue> validate_record(const DatasetRecord& r) {
  std::vector<RecordIssue> issues;
  if (r.id.empty()) issues.push_back(RecordIssue::kMissingId);
  if (r.caption_tgt.empty()) issues.push_back(RecordIssue::kMissingTranslation);
  return issues;
}

}  // namespace capalign
