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

#include "capalign/capalign.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "alignment.hpp"
#include "annotation.hpp"
#include "benchgen.hpp"
#include "embedding_file.hpp"
#include "error.hpp"
#include "eval.hpp"
#include "filter.hpp"
#include "http_service.hpp"
#include "ingest.hpp"

using namespace capalign;

namespace {

thread_local std::string g_last_error;

capalign_status fail(capalign_status s, std::string message) {
  g_last_error = std::move(message);
  return s;
}

// Runs `body`, translating exceptions to status codes.
template <typename F>
capalign_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return CAPALIGN_OK;
  } catch (const Error& e) {
    return fail(static_cast<capalign_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(CAPALIGN_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(CAPALIGN_INTERNAL, e.what());
  }
}

void require(bool cond, const char* what) {
  if (!cond) throw Error(ErrorCode::kInvalidArgument, what);
}

char* dup_string(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (p == nullptr) throw std::bad_alloc();
  std::memcpy(p, s.data(), s.size() + 1);
  return p;
}

void set_out(char** out, const std::string& s) {
  if (out != nullptr) *out = dup_string(s);
}

TokenEmbeddings matrix(const float* p, std::size_t rows, std::size_t dim) {
  require(dim > 0, "dim must be positive");
  require(rows == 0 || p != nullptr, "null matrix");
  return TokenEmbeddings(rows, dim, std::vector<float>(p, p + rows * dim));
}

ImageEmbedding vector_of(const float* p, std::size_t dim) {
  require(p != nullptr && dim > 0, "null vector");
  return ImageEmbedding{std::vector<float>(p, p + dim)};
}

ImageTextMode to_mode(capalign_image_text_mode m) {
  switch (m) {
    case CAPALIGN_MODE_POOLED: return ImageTextMode::kPooled;
    case CAPALIGN_MODE_TOKEN_MAX: return ImageTextMode::kTokenMax;
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown image-text mode");
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot write " + path);
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.close();
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed: " + path);
}

std::vector<HumanJudgment> read_judgments(const std::string& path) {
  auto in = open_in(path);
  std::vector<HumanJudgment> out;
  std::string line;
  std::uint64_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(judgment_from_json(line));
    } catch (const Error& e) {
      throw IndexedError(e.code(), n,
                         path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

struct capalign_corpus {
  ManifestParse manifest;
  std::vector<std::unique_ptr<EmbeddingFile>> files;
  ObjectIndex objects;
  JoinResult joined;
};

struct capalign_ranking {
  std::string strategy;
  std::size_t k = 0;
  std::vector<RankedEntry> entries;
};

struct capalign_server {
  std::unique_ptr<AnnotationStore> store;
  std::unique_ptr<AnnotationServer> server;
};

extern "C" {

const char* capalign_version(void) { return "0.1.0"; }

const char* capalign_status_name(capalign_status status) {
  if (status == CAPALIGN_OK) return "Ok";
  if (status == CAPALIGN_INTERNAL) return "Internal";
  if (status < CAPALIGN_INVALID_ARGUMENT || status > CAPALIGN_PROVIDER_FAILURE) {
    return "Unknown";
  }
  return error_code_name(static_cast<ErrorCode>(status)).data();
}

const char* capalign_last_error(void) { return g_last_error.c_str(); }

void capalign_string_free(char* s) { std::free(s); }

capalign_status capalign_cosine(const float* u, const float* v, size_t dim,
                                double* out) {
  return guarded([&] {
    require(u != nullptr && v != nullptr && out != nullptr, "null argument");
    *out = cosine({u, dim}, {v, dim});
  });
}

capalign_status capalign_text_text_align(const float* src, size_t src_rows,
                                         const float* tgt, size_t tgt_rows,
                                         size_t dim, double* out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    *out = text_text_align(matrix(src, src_rows, dim), matrix(tgt, tgt_rows, dim));
  });
}

capalign_status capalign_object_text_align(const float* obj, size_t obj_rows,
                                           const float* tgt, size_t tgt_rows,
                                           size_t dim, double* out, int* defined) {
  return guarded([&] {
    require(out != nullptr && defined != nullptr, "null output");
    const auto s =
        object_text_align(matrix(obj, obj_rows, dim), matrix(tgt, tgt_rows, dim));
    *out = s.value;
    *defined = s.defined ? 1 : 0;
  });
}

capalign_status capalign_image_text_align(const float* img, const float* tgt,
                                          size_t tgt_rows, size_t dim,
                                          capalign_image_text_mode mode,
                                          const float* pooled_text, double* out) {
  return guarded([&] {
    require(out != nullptr, "null output");
    std::optional<ImageEmbedding> pooled;
    if (pooled_text != nullptr) pooled = vector_of(pooled_text, dim);
    *out = image_text_align(vector_of(img, dim), matrix(tgt, tgt_rows, dim),
                            to_mode(mode), pooled);
  });
}

capalign_status capalign_pearson(const double* xs, const double* ys, size_t n,
                                 double* r) {
  return guarded([&] {
    require(r != nullptr && (n == 0 || (xs != nullptr && ys != nullptr)),
            "null argument");
    *r = pearson({xs, n}, {ys, n});
  });
}

void capalign_corpus_options_init(capalign_corpus_options* o) {
  if (o == nullptr) return;
  *o = capalign_corpus_options{};
  o->threshold = kDefaultDetectionThreshold;
}

capalign_status capalign_corpus_load(const capalign_corpus_options* o,
                                     capalign_corpus** out) {
  return guarded([&] {
    require(o != nullptr && out != nullptr, "null argument");
    require(o->manifest && o->src_emb && o->tgt_emb && o->img_emb,
            "manifest, src, tgt and image embeddings are required");
    auto c = std::make_unique<capalign_corpus>();
    c->manifest = parse_manifest_file(o->manifest);
    auto open = [&](const char* path) -> const EmbeddingSource* {
      if (path == nullptr) return nullptr;
      c->files.push_back(EmbeddingFile::open(path));
      return c->files.back().get();
    };
    JoinSources sources;
    sources.src = open(o->src_emb);
    sources.tgt = open(o->tgt_emb);
    sources.img = open(o->img_emb);
    sources.obj = open(o->obj_emb);
    sources.pooled = open(o->pooled_emb);
    if (o->objects != nullptr) {
      c->objects = load_objects_file(o->objects, o->threshold);
      sources.objects = &c->objects;
    }
    std::vector<DatasetRecord> records;
    records.reserve(c->manifest.entries.size());
    for (const auto& e : c->manifest.entries) records.push_back(e.record);
    JoinPolicy policy;
    policy.allow_missing_objects = o->allow_missing_objects != 0;
    policy.require_pooled_text = o->require_pooled_text != 0;
    c->joined = join_units(records, sources, policy);
    *out = c.release();
  });
}

void capalign_corpus_free(capalign_corpus* c) { delete c; }

size_t capalign_corpus_unit_count(const capalign_corpus* c) {
  return c ? c->joined.units.size() : 0;
}

size_t capalign_corpus_orphan_count(const capalign_corpus* c) {
  return c ? c->joined.orphans.size() : 0;
}

size_t capalign_corpus_parse_error_count(const capalign_corpus* c) {
  return c ? c->manifest.errors.size() : 0;
}

capalign_status capalign_corpus_write_report(const capalign_corpus* c,
                                             const char* path) {
  return guarded([&] {
    require(c != nullptr && path != nullptr, "null argument");
    auto out = open_out(path);
    for (const auto& e : c->manifest.errors) {
      nlohmann::ordered_json j;
      j["line"] = e.line;
      j["error"] = e.message;
      out << j.dump() << '\n';
    }
    for (const auto& o : c->joined.orphans) {
      nlohmann::ordered_json j;
      j["id"] = o.id;
      j["missing"] = o.missing;
      out << j.dump() << '\n';
    }
    close_out(out, path);
  });
}

capalign_status capalign_corpus_score(const capalign_corpus* c,
                                      capalign_image_text_mode mode,
                                      const capalign_weights* weights,
                                      size_t workers, const char* out_path) {
  return guarded([&] {
    require(c != nullptr && out_path != nullptr, "null argument");
    ComponentWeights w;
    if (weights != nullptr) {
      w = {weights->text_text, weights->image_text, weights->object_text};
    }
    const auto scores = score_all(c->joined.units, to_mode(mode), w, workers);
    auto out = open_out(out_path);
    for (std::size_t i = 0; i < scores.size(); ++i) {
      out << breakdown_json_line(c->joined.units[i].record.id, scores[i]) << '\n';
    }
    close_out(out, out_path);
  });
}

void capalign_rank_options_init(capalign_rank_options* o) {
  if (o == nullptr) return;
  *o = capalign_rank_options{};
  o->strategy = "ours";
  o->mode = CAPALIGN_MODE_POOLED;
  o->workers = 1;
}

capalign_status capalign_rank_corpus(const capalign_corpus* c,
                                     const capalign_rank_options* o,
                                     capalign_ranking** out) {
  return guarded([&] {
    require(c != nullptr && o != nullptr && out != nullptr && o->strategy,
            "null argument");
    const auto strategy = FilterStrategy::from_name(o->strategy, o->seed);
    StrategyOptions so;
    so.mode = to_mode(o->mode);
    so.drop_undefined_objects = o->drop_undefined_objects != 0;
    const auto& units = c->joined.units;
    UnitAccessor at = [&units](std::size_t i, ScoringUnit&) -> const ScoringUnit& {
      return units[i];
    };
    auto r = std::make_unique<capalign_ranking>();
    r->strategy = std::string(strategy.name());
    r->k = o->k;
    r->entries = score_and_rank(units.size(), at, strategy, so, o->k,
                                o->workers == 0 ? 1 : o->workers);
    *out = r.release();
  });
}

capalign_status capalign_rank_breakdowns(const char* breakdown_path,
                                         const capalign_rank_options* o,
                                         capalign_ranking** out) {
  return guarded([&] {
    require(breakdown_path != nullptr && o != nullptr && out != nullptr &&
                o->strategy,
            "null argument");
    const auto strategy = FilterStrategy::from_name(o->strategy, o->seed);
    auto in = open_in(breakdown_path);
    const auto scored = read_breakdowns(in);
    auto r = std::make_unique<capalign_ranking>();
    r->strategy = std::string(strategy.name());
    r->k = o->k;
    r->entries = rank_topk(
        apply_strategy(scored, strategy, o->drop_undefined_objects != 0), o->k);
    *out = r.release();
  });
}

void capalign_ranking_free(capalign_ranking* r) { delete r; }

size_t capalign_ranking_size(const capalign_ranking* r) {
  return r ? r->entries.size() : 0;
}

capalign_status capalign_ranking_entry(const capalign_ranking* r, size_t i,
                                       const char** id, double* score) {
  return guarded([&] {
    require(r != nullptr, "null ranking");
    require(i < r->entries.size(), "rank index out of range");
    if (id != nullptr) *id = r->entries[i].id.c_str();
    if (score != nullptr) *score = r->entries[i].score;
  });
}

capalign_status capalign_ranking_emit(const capalign_ranking* r,
                                      const char* manifest_path,
                                      const char* out_path, char** summary_json) {
  return guarded([&] {
    require(r != nullptr && manifest_path != nullptr && out_path != nullptr,
            "null argument");
    auto in = open_in(manifest_path);
    auto out = open_out(out_path);
    const auto summary = emit_manifest(r->entries, in, out, r->strategy, r->k);
    close_out(out, out_path);
    set_out(summary_json, summary_json_line(summary));
  });
}

void capalign_bench_options_init(capalign_bench_options* o) {
  if (o == nullptr) return;
  *o = capalign_bench_options{};
  const auto d = GenerationConfig::defaults();
  o->target = 0;
  o->round_limit = d.round_limit;
  o->max_attempts = d.max_attempts;
  o->backoff_ms = static_cast<uint32_t>(d.backoff.count());
}

capalign_status capalign_bench_generate(const capalign_bench_options* o,
                                        char** summary_json) {
  return guarded([&] {
    require(o != nullptr && o->out_path != nullptr, "null argument");
    require(o->replay_path != nullptr || o->provider_url != nullptr,
            "a replay transcript or a provider URL is required");
    auto config = GenerationConfig::defaults();
    if (o->culture != nullptr) config.culture = o->culture;
    if (o->seeds_path != nullptr) {
      config.seeds.clear();
      for (auto& p : read_prompts_file(o->seeds_path)) {
        config.seeds.push_back(std::move(p.text));
      }
    }
    config.target_count = o->target;
    config.round_limit = o->round_limit;
    config.max_attempts = o->max_attempts == 0 ? 1 : o->max_attempts;
    config.backoff = std::chrono::milliseconds(o->backoff_ms);
    config.rng_seed = o->seed;

    std::unique_ptr<TextProvider> base;
    if (o->replay_path != nullptr) {
      base = std::make_unique<ReplayProvider>(ReplayProvider::from_file(o->replay_path));
    } else {
      base = std::make_unique<HttpProvider>(o->provider_url);
    }
    std::ofstream transcript;
    std::unique_ptr<RecordingProvider> recorder;
    TextProvider* provider = base.get();
    if (o->record_path != nullptr) {
      transcript = open_out(o->record_path);
      recorder = std::make_unique<RecordingProvider>(*base, transcript);
      provider = recorder.get();
    }

    auto result = iterate_generation(*provider, config);
    auto pool = dedup(result.pool);
    const std::size_t generated = pool.size();
    if (o->subsample > 0) pool = subsample(pool, o->subsample, o->seed);

    auto out = open_out(o->out_path);
    write_prompts(out, pool);
    close_out(out, o->out_path);
    if (o->record_path != nullptr) close_out(transcript, o->record_path);

    nlohmann::ordered_json j;
    j["pool"] = generated;
    j["written"] = pool.size();
    j["rounds"] = result.rounds_executed;
    j["failed_rounds"] = result.failures.size();
    j["partial"] = result.partial;
    j["seed"] = o->seed;
    set_out(summary_json, j.dump());
  });
}

capalign_status capalign_bench_stats(const char* prompts_path,
                                     const char* objects_path,
                                     char** summary_json) {
  return guarded([&] {
    require(prompts_path != nullptr, "null prompts path");
    const auto prompts = read_prompts_file(prompts_path);
    std::optional<ObjectCounts> counts;
    if (objects_path != nullptr) counts = read_object_counts_file(objects_path);
    const auto s = corpus_stats(prompts, counts ? &*counts : nullptr);
    nlohmann::ordered_json j;
    j["count"] = s.count;
    j["mean_words"] = s.mean_words;
    j["mean_objects"] = s.mean_objects;
    j["objects_heuristic"] = s.objects_heuristic;
    set_out(summary_json, j.dump());
  });
}

capalign_status capalign_bench_prompt(const char* const* seeds, size_t n,
                                      const char* culture, char** prompt) {
  return guarded([&] {
    require(prompt != nullptr && (n == 0 || seeds != nullptr), "null argument");
    auto config = GenerationConfig::defaults();
    if (culture != nullptr) config.culture = culture;
    std::vector<std::string> s(seeds, seeds + n);
    *prompt = dup_string(build_prompt(config, s));
  });
}

capalign_status capalign_eval_correlate(const capalign_correlate_options* o,
                                        char** report, char** json_lines) {
  return guarded([&] {
    require(o != nullptr && o->judgments_path != nullptr && o->rubric != nullptr,
            "null argument");
    require(o->metric_count > 0 && o->metrics != nullptr,
            "at least one metric is required");
    const Rubric rubric = parse_rubric(o->rubric);
    const AllMode all_mode =
        o->all_mode ? parse_all_mode(o->all_mode) : AllMode::kPooled;
    const auto judgments = read_judgments(o->judgments_path);

    std::vector<CorrelationTable> tables;
    for (std::size_t m = 0; m < o->metric_count; ++m) {
      const auto& spec = o->metrics[m];
      require(spec.name != nullptr && spec.path != nullptr, "metric name and path");
      const std::string field = spec.field ? spec.field : "combined";
      auto in = open_in(spec.path);
      MetricScores scores;
      for (const auto& [id, b] : read_breakdowns(in)) {
        double v = 0.0;
        if (field == "combined") {
          v = b.combined;
        } else if (field == "a_st") {
          v = b.a_st;
        } else if (field == "a_it") {
          v = b.a_it;
        } else if (field == "a_ot") {
          v = b.a_ot;
        } else {
          const auto st = FilterStrategy::from_name(field);
          require(st.kind != StrategyKind::kRandom,
                  "the random strategy has no metric value");
          v = combine(b, st.weights).combined;
        }
        scores[id] = v;
      }
      tables.push_back(
          correlate_by_criterion(judgments, scores, rubric, spec.name, all_mode));
    }
    std::string lines;
    for (const auto& t : tables) lines += correlation_json_line(t) + "\n";
    set_out(report, render_correlation_report(tables));
    set_out(json_lines, lines);
  });
}

capalign_status capalign_eval_aggregate(const char* judgments_path,
                                        const char* rubric_name_c,
                                        int with_histogram, char** report,
                                        char** json_lines) {
  return guarded([&] {
    require(judgments_path != nullptr && rubric_name_c != nullptr,
            "null argument");
    const Rubric rubric = parse_rubric(rubric_name_c);
    const auto judgments = read_judgments(judgments_path);
    std::vector<HumanJudgment> picked;
    for (const auto& j : judgments) {
      if (j.rubric == rubric) picked.push_back(j);
    }
    const auto rows = aggregate_all_systems(picked, rubric);
    std::string text = render_aggregate_report(rows);
    std::string lines;
    for (const auto& r : rows) lines += aggregate_json_line(r) + "\n";
    if (with_histogram != 0) {
      for (const auto& r : rows) {
        std::vector<HumanJudgment> sys;
        for (const auto& j : picked) {
          if (j.system_tag == r.system) sys.push_back(j);
        }
        const auto h = score_histogram(sys);
        text += "\n" + (r.system.empty() ? std::string("(untagged)") : r.system) +
                "\n" + render_histogram(h);
        nlohmann::ordered_json j;
        j["system"] = r.system;
        j["counts"] = h.counts;
        j["total"] = h.total;
        j["above_average_ratio"] = h.above_average_ratio
                                       ? nlohmann::ordered_json(*h.above_average_ratio)
                                       : nlohmann::ordered_json(nullptr);
        lines += j.dump() + "\n";
      }
    }
    set_out(report, text);
    set_out(json_lines, lines);
  });
}

capalign_status capalign_server_create(const capalign_server_options* o,
                                       capalign_server** out) {
  return guarded([&] {
    require(o != nullptr && out != nullptr && o->data_dir != nullptr,
            "null argument");
    require(o->port >= 0 && o->port <= 65535, "port out of range");
    auto s = std::make_unique<capalign_server>();
    s->store = AnnotationStore::open(o->data_dir);
    ServiceOptions so;
    if (o->host != nullptr) so.host = o->host;
    so.port = o->port;
    if (o->static_dir != nullptr) so.static_dir = o->static_dir;
    if (o->rubrics_file != nullptr) so.rubrics_file = o->rubrics_file;
    s->server = std::make_unique<AnnotationServer>(*s->store, so);
    *out = s.release();
  });
}

capalign_status capalign_server_warnings(const capalign_server* s, char** text) {
  return guarded([&] {
    require(s != nullptr && text != nullptr, "null argument");
    std::string joined;
    for (const auto& w : s->store->recovery_warnings()) joined += w + "\n";
    *text = dup_string(joined);
  });
}

capalign_status capalign_server_bind(capalign_server* s, int* port) {
  return guarded([&] {
    require(s != nullptr, "null server");
    const int p = s->server->bind();
    if (port != nullptr) *port = p;
  });
}

capalign_status capalign_server_listen(capalign_server* s) {
  return guarded([&] {
    require(s != nullptr, "null server");
    s->server->listen();
  });
}

void capalign_server_stop(capalign_server* s) {
  if (s != nullptr) s->server->stop();
}

void capalign_server_free(capalign_server* s) { delete s; }

}  // extern "C"
