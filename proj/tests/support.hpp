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

// Shared test helpers: scratch directories, random generators and naive
// reference implementations written independently of the library code.

#ifndef CAPALIGN_TESTS_SUPPORT_HPP_
#define CAPALIGN_TESTS_SUPPORT_HPP_

#include <stdlib.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "alignment.hpp"
#include "data_model.hpp"

namespace capalign::testing {

class TempDir {
 public:
  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "capalign-test-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) throw std::runtime_error("mkdtemp");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::vector<std::string> lines;
  std::ifstream in(path, std::ios::binary);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

// Test-side random source. Only the engine is used (its output sequence is
// fixed by the standard); values are mapped by hand so generated cases are
// the same on every standard library.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }
  // Uniform in [0, 1).
  double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }
  // Uniform integer in [lo, hi].
  std::size_t between(std::size_t lo, std::size_t hi) {
    return lo + static_cast<std::size_t>(eng_() % (hi - lo + 1));
  }
  double normal() {
    // Box-Muller.
    double u1 = unit();
    while (u1 <= 0.0) u1 = unit();
    const double u2 = unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  std::vector<float> vec(std::size_t dim) {
    std::vector<float> v(dim);
    for (;;) {
      double norm = 0.0;
      for (auto& x : v) {
        x = static_cast<float>(uniform(-1.0, 1.0));
        norm += static_cast<double>(x) * x;
      }
      if (norm > 1e-6) return v;
    }
  }

  TokenEmbeddings matrix(std::size_t rows, std::size_t dim) {
    std::vector<float> data;
    data.reserve(rows * dim);
    for (std::size_t r = 0; r < rows; ++r) {
      auto v = vec(dim);
      data.insert(data.end(), v.begin(), v.end());
    }
    return TokenEmbeddings(rows, dim, std::move(data));
  }

 private:
  std::mt19937_64 eng_;
};

// ---- naive reference implementations ----

inline double naive_cosine(std::span<const float> a, std::span<const float> b) {
  long double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<long double>(a[i]) * b[i];
    na += static_cast<long double>(a[i]) * a[i];
    nb += static_cast<long double>(b[i]) * b[i];
  }
  long double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return static_cast<double>(std::clamp(c, -1.0L, 1.0L));
}

// Mean over rows of `from` of the best cosine against rows of `to`.
inline double naive_mean_max(const TokenEmbeddings& from, const TokenEmbeddings& to) {
  long double sum = 0;
  for (std::size_t i = 0; i < from.rows(); ++i) {
    double best = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < to.rows(); ++j) {
      best = std::max(best, naive_cosine(from.row(i), to.row(j)));
    }
    sum += best;
  }
  return static_cast<double>(sum / from.rows());
}

struct NaiveScore {
  double a_st, a_it, a_ot, combined;
  bool a_ot_defined;
};

inline NaiveScore naive_score(const ScoringUnit& u, ImageTextMode mode,
                              const ComponentWeights& w) {
  NaiveScore s{};
  s.a_st = naive_mean_max(u.src_emb, u.tgt_emb);
  if (mode == ImageTextMode::kPooled) {
    s.a_it = naive_cosine(u.img_emb.view(), u.pooled_tgt->view());
  } else {
    double best = -2.0;
    for (std::size_t j = 0; j < u.tgt_emb.rows(); ++j) {
      best = std::max(best, naive_cosine(u.img_emb.view(), u.tgt_emb.row(j)));
    }
    s.a_it = best;
  }
  s.a_ot_defined = u.obj_emb.rows() > 0;
  s.a_ot = s.a_ot_defined ? naive_mean_max(u.obj_emb, u.tgt_emb) : 0.0;
  s.combined = w.text_text * s.a_st + w.image_text * s.a_it +
               (s.a_ot_defined ? w.object_text * s.a_ot : 0.0);
  return s;
}

inline ScoringUnit random_unit(Gen& g, std::string id, std::size_t dim,
                               std::size_t max_tokens, std::size_t max_objects) {
  ScoringUnit u;
  u.record.id = std::move(id);
  u.record.image_ref = "img/" + u.record.id + ".jpg";
  u.record.caption_src = "src";
  u.record.caption_tgt = "tgt";
  u.src_emb = g.matrix(g.between(1, max_tokens), dim);
  u.tgt_emb = g.matrix(g.between(1, max_tokens), dim);
  const std::size_t k = g.between(0, max_objects);
  if (k > 0) u.obj_emb = g.matrix(k, dim);
  u.img_emb.data = g.vec(dim);
  u.pooled_tgt = ImageEmbedding{g.vec(dim)};
  return u;
}

// Naive Pearson, two-pass in long double.
inline double naive_pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

}  // namespace capalign::testing

#endif  // CAPALIGN_TESTS_SUPPORT_HPP_
