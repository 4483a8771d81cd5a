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

#include "alignment.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "error.hpp"

namespace capalign {

std::string_view image_text_mode_name(ImageTextMode mode) {
  return mode == ImageTextMode::kPooled ? "pooled" : "token-max";
}

ImageTextMode parse_image_text_mode(std::string_view name) {
  if (name == "pooled") return ImageTextMode::kPooled;
  if (name == "token-max") return ImageTextMode::kTokenMax;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown image-text mode '" + std::string(name) + "'");
}

namespace {

double dot(std::span<const float> u, std::span<const float> v) {
  double acc = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    acc += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  }
  return acc;
}

double checked_norm(std::span<const float> u, std::size_t row) {
  const double n = std::sqrt(dot(u, u));
  if (!(n > 0.0)) {
    throw IndexedError(ErrorCode::kZeroNormRow, row,
                       "zero-norm embedding row " + std::to_string(row));
  }
  return n;
}

double clamp_unit(double c) { return std::clamp(c, -1.0, 1.0); }

void require_dims(std::size_t a, std::size_t b, const char* what) {
  if (a != b) {
    throw Error(ErrorCode::kDimMismatch, std::string(what) + ": dim " +
                                             std::to_string(a) + " vs " +
                                             std::to_string(b));
  }
}

std::vector<double> row_norms(const TokenEmbeddings& m) {
  std::vector<double> norms(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    norms[i] = checked_norm(m.row(i), i);
  }
  return norms;
}

// Mean over query rows of the best cosine against any key row.
double mean_of_max(const TokenEmbeddings& queries, const TokenEmbeddings& keys) {
  const std::vector<double> key_norms = row_norms(keys);
  double total = 0.0;
  for (std::size_t q = 0; q < queries.rows(); ++q) {
    const auto qrow = queries.row(q);
    const double qnorm = checked_norm(qrow, q);
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < keys.rows(); ++k) {
      best = std::max(best,
                      clamp_unit(dot(qrow, keys.row(k)) / (qnorm * key_norms[k])));
    }
    total += best;
  }
  return total / static_cast<double>(queries.rows());
}

}  // namespace

double cosine(std::span<const float> u, std::span<const float> v) {
  require_dims(u.size(), v.size(), "cosine");
  const double nu = checked_norm(u, 0);
  const double nv = checked_norm(v, 1);
  return clamp_unit(dot(u, v) / (nu * nv));
}

double text_text_align(const TokenEmbeddings& src, const TokenEmbeddings& tgt) {
  if (src.empty() || tgt.empty()) {
    throw Error(ErrorCode::kEmptyTokenSet,
                "text-text alignment needs at least one source and one target "
                "token");
  }
  require_dims(src.dim(), tgt.dim(), "text-text alignment");
  return mean_of_max(src, tgt);
}

ObjectTextScore object_text_align(const TokenEmbeddings& obj,
                                  const TokenEmbeddings& tgt) {
  if (tgt.empty()) {
    throw Error(ErrorCode::kEmptyTokenSet,
                "object-text alignment needs at least one target token");
  }
  if (obj.empty()) return {0.0, false};
  require_dims(obj.dim(), tgt.dim(), "object-text alignment");
  return {mean_of_max(obj, tgt), true};
}

double image_text_align(const ImageEmbedding& img, const TokenEmbeddings& tgt,
                        ImageTextMode mode,
                        const std::optional<ImageEmbedding>& pooled_text) {
  if (mode == ImageTextMode::kPooled) {
    if (!pooled_text) {
      throw Error(ErrorCode::kMissingPooledText,
                  "pooled image-text mode needs a pooled caption vector");
    }
    return cosine(img.view(), pooled_text->view());
  }
  if (tgt.empty()) {
    throw Error(ErrorCode::kEmptyTokenSet,
                "token-max image-text alignment needs target tokens");
  }
  require_dims(img.dim(), tgt.dim(), "image-text alignment");
  const double inorm = checked_norm(img.view(), 0);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < tgt.rows(); ++k) {
    const auto row = tgt.row(k);
    best = std::max(best,
                    clamp_unit(dot(img.view(), row) / (inorm * checked_norm(row, k))));
  }
  return best;
}

AlignmentBreakdown combine(const AlignmentBreakdown& partial,
                           const ComponentWeights& weights) {
  if (!std::isfinite(partial.a_st) || !std::isfinite(partial.a_it) ||
      (partial.a_ot_defined && !std::isfinite(partial.a_ot))) {
    throw Error(ErrorCode::kNonFiniteScore, "non-finite alignment component");
  }
  if (!std::isfinite(weights.text_text) || !std::isfinite(weights.image_text) ||
      !std::isfinite(weights.object_text)) {
    throw Error(ErrorCode::kNonFiniteScore, "non-finite component weight");
  }
  AlignmentBreakdown out = partial;
  if (!out.a_ot_defined) out.a_ot = 0.0;
  out.combined = weights.text_text * out.a_st + weights.image_text * out.a_it;
  if (out.a_ot_defined) out.combined += weights.object_text * out.a_ot;
  return out;
}

AlignmentBreakdown score_unit(const ScoringUnit& unit, ImageTextMode mode,
                              const ComponentWeights& weights) {
  try {
    AlignmentBreakdown b;
    b.a_st = text_text_align(unit.src_emb, unit.tgt_emb);
    b.a_it = image_text_align(unit.img_emb, unit.tgt_emb, mode, unit.pooled_tgt);
    const ObjectTextScore ot = object_text_align(unit.obj_emb, unit.tgt_emb);
    b.a_ot = ot.value;
    b.a_ot_defined = ot.defined;
    return combine(b, weights);
  } catch (const Error& e) {
    throw Error(e.code(), "unit '" + unit.record.id + "': " + e.what());
  }
}

}  // namespace capalign
