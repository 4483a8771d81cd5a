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

// Multi-modal alignment of a translated caption against its source caption,
// its image, and the objects detected in that image.
//
// All three components are greedy mean-of-max (or plain max) cosine
// similarities over token embedding rows; the combined score is their
// weighted sum. Every function here is pure and safe to call concurrently.

#ifndef CAPALIGN_ALIGNMENT_HPP_
#define CAPALIGN_ALIGNMENT_HPP_

#include <optional>
#include <span>
#include <string_view>

#include "data_model.hpp"

namespace capalign {

enum class ImageTextMode {
  // Cosine between the image vector and a pooled sentence vector from a
  // joint text-image encoder.
  kPooled,
  // Max cosine between the image vector and any translated-caption token.
  kTokenMax,
};

std::string_view image_text_mode_name(ImageTextMode mode);
ImageTextMode parse_image_text_mode(std::string_view name);

struct ComponentWeights {
  double text_text = 1.0;
  double image_text = 1.0;
  double object_text = 1.0;

  bool operator==(const ComponentWeights&) const = default;
};

struct ScoringUnit {
  DatasetRecord record;
  TokenEmbeddings src_emb;
  TokenEmbeddings tgt_emb;
  TokenEmbeddings obj_emb;
  ImageEmbedding img_emb;
  std::optional<ImageEmbedding> pooled_tgt;
  ObjectAnnotationSet obj_labels;
};

struct AlignmentBreakdown {
  double a_st = 0.0;
  double a_it = 0.0;
  double a_ot = 0.0;
  bool a_ot_defined = false;
  double combined = 0.0;
};

struct ObjectTextScore {
  double value = 0.0;
  bool defined = false;
};

// Cosine similarity with 64-bit accumulation, clamped to [-1, 1].
double cosine(std::span<const float> u, std::span<const float> v);

// Mean over source rows of the best cosine against any target row.
double text_text_align(const TokenEmbeddings& src, const TokenEmbeddings& tgt);

// Same construction over object label rows. With no objects the score is
// reported as 0 and flagged undefined.
ObjectTextScore object_text_align(const TokenEmbeddings& obj,
                                  const TokenEmbeddings& tgt);

double image_text_align(const ImageEmbedding& img, const TokenEmbeddings& tgt,
                        ImageTextMode mode,
                        const std::optional<ImageEmbedding>& pooled_text);

AlignmentBreakdown combine(const AlignmentBreakdown& partial,
                           const ComponentWeights& weights);

AlignmentBreakdown score_unit(const ScoringUnit& unit, ImageTextMode mode,
                              const ComponentWeights& weights);

}  // namespace capalign

#endif  // CAPALIGN_ALIGNMENT_HPP_
