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

#ifndef CAPALIGN_ERROR_HPP_
#define CAPALIGN_ERROR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace capalign {

// Values are mirrored one-to-one by capalign_status in the C header.
enum class ErrorCode : int {
  kInvalidArgument = 1,
  kIoFailure,
  kRecordParse,
  kFormatMismatch,
  kTruncated,
  kZeroNormRow,
  kDimMismatch,
  kEmptyTokenSet,
  kMissingPooledText,
  kNonFiniteScore,
  kUnknownStrategy,
  kInsufficientSamples,
  kDegenerateVariance,
  kEmptyJoin,
  kEmptyGroup,
  kSeedArity,
  kNoCaptionsParsed,
  kRoundFailed,
  kSampleTooLarge,
  kUnknownRubric,
  kInvalidScore,
  kIncompleteRubric,
  kDuplicateJudgment,
  kUnknownTask,
  kProviderFailure,
};

std::string_view error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Row-indexed and line-indexed failures keep the index for callers that
// need to report it.
class IndexedError : public Error {
 public:
  IndexedError(ErrorCode code, std::uint64_t index, const std::string& message)
      : Error(code, message), index_(index) {}

  std::uint64_t index() const noexcept { return index_; }

 private:
  std::uint64_t index_;
};

}  // namespace capalign

#endif  // CAPALIGN_ERROR_HPP_
