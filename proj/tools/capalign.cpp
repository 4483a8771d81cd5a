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

// capalign command-line driver. Talks to the library only through the C API.

#include <csignal>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <pthread.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "capalign/capalign.h"

namespace {

using nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;

// Owns a malloc'd string returned by the library.
struct CString {
  char* p = nullptr;
  ~CString() { capalign_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

struct Failure {
  capalign_status status;
  std::string message;
};

void check(capalign_status s) {
  if (s != CAPALIGN_OK) throw Failure{s, capalign_last_error()};
}

void invalid(const std::string& message) {
  throw Failure{CAPALIGN_INVALID_ARGUMENT, message};
}

int exit_code_for(capalign_status s) {
  if (s == CAPALIGN_OK) return kExitOk;
  return s == CAPALIGN_IO_FAILURE ? kExitIo : kExitValidation;
}

const char* opt_cstr(const std::string& s) { return s.empty() ? nullptr : s.c_str(); }

capalign_image_text_mode parse_mode(const std::string& m) {
  if (m == "pooled") return CAPALIGN_MODE_POOLED;
  if (m == "token-max") return CAPALIGN_MODE_TOKEN_MAX;
  invalid("unknown --mode '" + m + "' (pooled | token-max)");
  return CAPALIGN_MODE_POOLED;
}

struct Common {
  std::size_t workers = 1;
  std::uint64_t seed = 0;
  std::string run_summary;
};

struct CorpusFlags {
  std::string manifest, src, tgt, img, obj, pooled, objects;
  double threshold = 0.5;
  bool allow_missing_objects = false;
  std::string mode = "pooled";

  void attach(CLI::App* cmd, bool manifest_required) {
    auto* m = cmd->add_option("--manifest", manifest, "line-delimited record manifest");
    if (manifest_required) m->required();
    cmd->add_option("--src-emb", src, "source caption token embeddings (EMB1)");
    cmd->add_option("--tgt-emb", tgt, "translated caption token embeddings (EMB1)");
    cmd->add_option("--img-emb", img, "image embeddings (EMB1, one row)");
    cmd->add_option("--obj-emb", obj, "object label embeddings (EMB1, keyed by label)");
    cmd->add_option("--pooled-emb", pooled,
                    "pooled translated-caption vectors (EMB1, one row)");
    cmd->add_option("--objects", objects, "detection lines {id, objects:[{label,score}]}");
    cmd->add_option("--threshold", threshold, "keep detections scoring above this")
        ->capture_default_str();
    cmd->add_flag("--allow-missing-objects", allow_missing_objects,
                  "score records without detections with K=0");
    cmd->add_option("--mode", mode, "image-text mode: pooled | token-max")
        ->capture_default_str();
  }

  bool has_embeddings() const { return !src.empty() || !tgt.empty() || !img.empty(); }

  capalign_corpus* load() const {
    if (src.empty() || tgt.empty() || img.empty()) {
      invalid("--src-emb, --tgt-emb and --img-emb are required");
    }
    const auto m = parse_mode(mode);
    if (m == CAPALIGN_MODE_POOLED && pooled.empty()) {
      invalid("--mode pooled needs --pooled-emb (or use --mode token-max)");
    }
    capalign_corpus_options o;
    capalign_corpus_options_init(&o);
    o.manifest = manifest.c_str();
    o.src_emb = src.c_str();
    o.tgt_emb = tgt.c_str();
    o.img_emb = img.c_str();
    o.obj_emb = opt_cstr(obj);
    o.pooled_emb = opt_cstr(pooled);
    o.objects = opt_cstr(objects);
    o.threshold = threshold;
    o.allow_missing_objects = allow_missing_objects ? 1 : 0;
    o.require_pooled_text = m == CAPALIGN_MODE_POOLED ? 1 : 0;
    capalign_corpus* c = nullptr;
    check(capalign_corpus_load(&o, &c));
    return c;
  }
};

struct CorpusHandle {
  capalign_corpus* c;
  ~CorpusHandle() { capalign_corpus_free(c); }
};

ordered_json corpus_counts(const capalign_corpus* c) {
  ordered_json j;
  j["units"] = capalign_corpus_unit_count(c);
  j["orphans"] = capalign_corpus_orphan_count(c);
  j["parse_errors"] = capalign_corpus_parse_error_count(c);
  return j;
}

capalign_weights parse_weights(const std::string& text) {
  capalign_weights w{1.0, 1.0, 1.0};
  std::vector<double> v;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      invalid("--weights expects three comma-separated numbers");
    }
  }
  if (v.size() != 3) invalid("--weights expects three comma-separated numbers");
  w = {v[0], v[1], v[2]};
  return w;
}

capalign_weights strategy_weights(const std::string& s) {
  if (s == "ours") return {1, 1, 1};
  if (s == "text-only") return {1, 0, 0};
  if (s == "image-only") return {0, 1, 0};
  if (s == "object-ablated") return {1, 1, 0};
  invalid("--strategy '" + s + "' has no score weights");
  return {};
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  out.close();
  if (!out) throw Failure{CAPALIGN_IO_FAILURE, "cannot write " + path};
}

void install_serve_signals(sigset_t& set) {
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"capalign: caption alignment scoring, filtering, prompt sets and "
               "judgment evaluation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(capalign_version()));

  Common common;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--workers", common.workers, "worker threads")->capture_default_str();
    cmd->add_option("--seed", common.seed, "seed for every random choice")
        ->capture_default_str();
    cmd->add_option("--run-summary", common.run_summary,
                    "run summary path (default <out>.run.json)");
  };

  // ingest
  auto* ingest = app.add_subcommand("ingest", "join a manifest with embeddings and report orphans");
  CorpusFlags ingest_flags;
  std::string ingest_report;
  ingest_flags.attach(ingest, true);
  ingest->add_option("--report", ingest_report, "orphan and parse-error report");
  add_common(ingest);

  // score
  auto* score = app.add_subcommand("score", "write per-unit alignment breakdowns");
  CorpusFlags score_flags;
  std::string score_out, score_strategy = "ours", score_weights;
  score_flags.attach(score, true);
  score->add_option("--strategy", score_strategy, "weights preset")->capture_default_str();
  score->add_option("--weights", score_weights, "explicit weights text,image,object");
  score->add_option("--out", score_out, "breakdown file")->required();
  add_common(score);

  // filter
  auto* filter = app.add_subcommand("filter", "select the top-K records under a strategy");
  CorpusFlags filter_flags;
  std::string filter_out, filter_strategy = "ours", filter_scores;
  std::size_t top_k = 0;
  bool drop_undefined = false;
  filter_flags.attach(filter, true);
  filter->add_option("--scores", filter_scores, "rank a breakdown file instead of embeddings");
  filter->add_option("--strategy", filter_strategy,
                     "ours | text-only | image-only | object-ablated | random")
      ->capture_default_str();
  filter->add_option("--top-k", top_k, "records to keep")->required();
  filter->add_flag("--drop-undefined-objects", drop_undefined,
                   "skip records with no retained objects");
  filter->add_option("--out", filter_out, "filtered manifest")->required();
  add_common(filter);

  // bench
  auto* bench = app.add_subcommand("bench", "challenge prompt sets");
  bench->require_subcommand(1);
  auto* gen = bench->add_subcommand("gen", "grow a prompt pool from seed captions");
  std::string gen_seeds, gen_replay, gen_url, gen_record, gen_out, gen_culture;
  std::size_t gen_target = 0, gen_subsample = 0, gen_round_limit = 10000,
              gen_attempts = 3;
  std::uint32_t gen_backoff = 250;
  gen->add_option("--seeds", gen_seeds, "seed caption file (default: built-in seeds)");
  gen->add_option("--replay", gen_replay, "replay transcript instead of a live provider");
  gen->add_option("--provider-url", gen_url, "text provider endpoint")
      ->envname("CAPALIGN_PROVIDER_URL");
  gen->add_option("--record", gen_record, "write a transcript of provider exchanges");
  gen->add_option("--culture", gen_culture, "target culture in the request");
  gen->add_option("--target", gen_target, "pool size to reach")->required();
  gen->add_option("--round-limit", gen_round_limit, "maximum rounds")->capture_default_str();
  gen->add_option("--max-attempts", gen_attempts, "provider attempts per round")
      ->capture_default_str();
  gen->add_option("--backoff-ms", gen_backoff, "initial retry backoff")->capture_default_str();
  gen->add_option("--subsample", gen_subsample, "sample this many prompts from the pool");
  gen->add_option("--out", gen_out, "prompt pool output")->required();
  add_common(gen);

  auto* stats = bench->add_subcommand("stats", "prompt count, mean words, mean objects");
  std::string stats_prompts, stats_objects;
  stats->add_option("--prompts", stats_prompts, "prompt pool or plain caption file")
      ->required();
  stats->add_option("--objects", stats_objects, "object counts {id, objects}");
  add_common(stats);

  // eval
  auto* eval = app.add_subcommand("eval", "metric meta-evaluation");
  eval->require_subcommand(1);
  auto* correlate = eval->add_subcommand("correlate", "per-criterion Pearson correlation");
  std::string corr_judgments, corr_rubric = "caption", corr_all_mode = "pooled", corr_out;
  std::vector<std::string> corr_metrics, corr_fields;
  correlate->add_option("--judgments", corr_judgments, "exported judgment lines")->required();
  correlate->add_option("--rubric", corr_rubric, "caption | image")->capture_default_str();
  correlate->add_option("--metric", corr_metrics, "NAME=BREAKDOWN_FILE, repeatable")
      ->required();
  correlate->add_option("--field", corr_fields,
                        "combined | a_st | a_it | a_ot | ours | text-only | "
                        "image-only | object-ablated; repeatable");
  correlate->add_option("--all-mode", corr_all_mode, "pooled | mean-of-r")
      ->capture_default_str();
  correlate->add_option("--out", corr_out, "correlation records");
  add_common(correlate);

  auto* aggregate = eval->add_subcommand("aggregate", "per-system criterion means");
  std::string agg_judgments, agg_rubric = "image", agg_out;
  bool agg_hist = false;
  aggregate->add_option("--judgments", agg_judgments, "exported judgment lines")->required();
  aggregate->add_option("--rubric", agg_rubric, "caption | image")->capture_default_str();
  aggregate->add_flag("--histogram", agg_hist, "add score histograms per system");
  aggregate->add_option("--out", agg_out, "aggregate records");
  add_common(aggregate);

  // serve
  auto* serve = app.add_subcommand("serve", "run the annotation HTTP service");
  std::string serve_host = "127.0.0.1", serve_data, serve_static, serve_rubrics;
  int serve_port = 8080;
  serve->add_option("--host", serve_host, "listen address")->capture_default_str();
  serve->add_option("--port", serve_port, "listen port (0 = ephemeral)")->capture_default_str();
  serve->add_option("--data-dir", serve_data, "task and judgment logs")
      ->envname("CAPALIGN_DATA_DIR")
      ->required();
  serve->add_option("--static-dir", serve_static, "image directory served at /static");
  serve->add_option("--rubrics", serve_rubrics, "rubric definition file served at /rubrics");
  add_common(serve);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  std::string command;
  std::string default_out;
  ordered_json result;
  capalign_status status = CAPALIGN_OK;
  std::string error_message;

  try {
    if (*ingest) {
      command = "ingest";
      default_out = ingest_report;
      CorpusHandle c{ingest_flags.load()};
      if (!ingest_report.empty()) check(capalign_corpus_write_report(c.c, ingest_report.c_str()));
      result = corpus_counts(c.c);
      std::cout << result.dump() << "\n";
    } else if (*score) {
      command = "score";
      default_out = score_out;
      const auto weights =
          score_weights.empty() ? strategy_weights(score_strategy) : parse_weights(score_weights);
      CorpusHandle c{score_flags.load()};
      check(capalign_corpus_score(c.c, parse_mode(score_flags.mode), &weights,
                                  common.workers, score_out.c_str()));
      result = corpus_counts(c.c);
      result["weights"] = {weights.text_text, weights.image_text, weights.object_text};
      result["mode"] = score_flags.mode;
      std::cout << result.dump() << "\n";
    } else if (*filter) {
      command = "filter";
      default_out = filter_out;
      capalign_rank_options o;
      capalign_rank_options_init(&o);
      o.strategy = filter_strategy.c_str();
      o.seed = common.seed;
      o.drop_undefined_objects = drop_undefined ? 1 : 0;
      o.k = top_k;
      o.workers = common.workers;
      o.mode = parse_mode(filter_flags.mode);
      capalign_ranking* r = nullptr;
      if (!filter_scores.empty()) {
        if (filter_flags.has_embeddings()) invalid("--scores excludes embedding inputs");
        check(capalign_rank_breakdowns(filter_scores.c_str(), &o, &r));
      } else {
        CorpusHandle c{filter_flags.load()};
        check(capalign_rank_corpus(c.c, &o, &r));
        result = corpus_counts(c.c);
      }
      struct RankingHandle {
        capalign_ranking* r;
        ~RankingHandle() { capalign_ranking_free(r); }
      } rh{r};
      CString summary;
      check(capalign_ranking_emit(r, filter_flags.manifest.c_str(), filter_out.c_str(),
                                  &summary.p));
      result["selection"] = ordered_json::parse(summary.str());
      std::cout << summary.str() << "\n";
    } else if (*gen) {
      command = "bench gen";
      default_out = gen_out;
      capalign_bench_options o;
      capalign_bench_options_init(&o);
      o.seeds_path = opt_cstr(gen_seeds);
      o.replay_path = opt_cstr(gen_replay);
      o.provider_url = opt_cstr(gen_url);
      o.record_path = opt_cstr(gen_record);
      o.culture = opt_cstr(gen_culture);
      o.target = gen_target;
      o.round_limit = gen_round_limit;
      o.max_attempts = gen_attempts;
      o.backoff_ms = gen_backoff;
      o.seed = common.seed;
      o.subsample = gen_subsample;
      o.out_path = gen_out.c_str();
      CString summary;
      check(capalign_bench_generate(&o, &summary.p));
      result = ordered_json::parse(summary.str());
      std::cout << summary.str() << "\n";
    } else if (*stats) {
      command = "bench stats";
      CString summary;
      check(capalign_bench_stats(stats_prompts.c_str(), opt_cstr(stats_objects), &summary.p));
      result = ordered_json::parse(summary.str());
      std::cout << summary.str() << "\n";
    } else if (*correlate) {
      command = "eval correlate";
      default_out = corr_out;
      if (corr_fields.empty()) corr_fields.push_back("combined");
      std::vector<std::string> names, paths, labels;
      for (const auto& m : corr_metrics) {
        const auto eq = m.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == m.size()) {
          invalid("--metric expects NAME=PATH, got '" + m + "'");
        }
        names.push_back(m.substr(0, eq));
        paths.push_back(m.substr(eq + 1));
      }
      for (std::size_t i = 0; i < names.size(); ++i) {
        for (const auto& f : corr_fields) {
          labels.push_back(corr_fields.size() == 1 ? names[i] : names[i] + ":" + f);
        }
      }
      std::vector<capalign_metric_spec> specs;
      std::size_t li = 0;
      for (std::size_t i = 0; i < names.size(); ++i) {
        for (const auto& f : corr_fields) {
          specs.push_back({labels[li++].c_str(), paths[i].c_str(), f.c_str()});
        }
      }
      capalign_correlate_options o{corr_judgments.c_str(), corr_rubric.c_str(),
                                   corr_all_mode.c_str(), specs.data(), specs.size()};
      CString report, lines;
      check(capalign_eval_correlate(&o, &report.p, &lines.p));
      std::cout << report.str();
      if (!corr_out.empty()) write_text(corr_out, lines.str());
      result["rubric"] = corr_rubric;
      result["all_mode"] = corr_all_mode;
      result["rows"] = ordered_json::array();
      std::istringstream ls(lines.str());
      for (std::string l; std::getline(ls, l);) result["rows"].push_back(ordered_json::parse(l));
    } else if (*aggregate) {
      command = "eval aggregate";
      default_out = agg_out;
      CString report, lines;
      check(capalign_eval_aggregate(agg_judgments.c_str(), agg_rubric.c_str(),
                                    agg_hist ? 1 : 0, &report.p, &lines.p));
      std::cout << report.str();
      if (!agg_out.empty()) write_text(agg_out, lines.str());
      result["rubric"] = agg_rubric;
      result["rows"] = ordered_json::array();
      std::istringstream ls(lines.str());
      for (std::string l; std::getline(ls, l);) result["rows"].push_back(ordered_json::parse(l));
    } else if (*serve) {
      command = "serve";
      sigset_t set;
      install_serve_signals(set);
      capalign_server_options o{serve_data.c_str(), serve_host.c_str(), serve_port,
                                opt_cstr(serve_static), opt_cstr(serve_rubrics)};
      capalign_server* s = nullptr;
      check(capalign_server_create(&o, &s));
      struct ServerHandle {
        capalign_server* s;
        ~ServerHandle() { capalign_server_free(s); }
      } sh{s};
      CString warnings;
      check(capalign_server_warnings(s, &warnings.p));
      if (!warnings.str().empty()) std::cerr << "warning: " << warnings.str();
      int port = 0;
      check(capalign_server_bind(s, &port));
      std::cout << "listening on http://" << serve_host << ":" << port << "\n" << std::flush;
      capalign_status listen_status = CAPALIGN_OK;
      std::string listen_error;
      const pthread_t main_thread = pthread_self();
      std::thread listener([&] {
        listen_status = capalign_server_listen(s);
        if (listen_status != CAPALIGN_OK) listen_error = capalign_last_error();
        // Wake the signal wait below if the server stopped on its own.
        pthread_kill(main_thread, SIGTERM);
      });
      int sig = 0;
      sigwait(&set, &sig);
      capalign_server_stop(s);
      listener.join();
      if (listen_status != CAPALIGN_OK) throw Failure{listen_status, listen_error};
      result["port"] = port;
    }
  } catch (const Failure& f) {
    status = f.status;
    error_message = f.message;
  }

  ordered_json summary;
  summary["command"] = command;
  summary["status"] = capalign_status_name(status);
  summary["exit_code"] = exit_code_for(status);
  if (!error_message.empty()) summary["error"] = error_message;
  summary["seed"] = common.seed;
  summary["workers"] = common.workers;
  summary["result"] = result;
  std::string path = common.run_summary;
  if (path.empty()) path = default_out.empty() ? "capalign-run.json" : default_out + ".run.json";
  {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << summary.dump(2) << "\n";
    if (!out && status == CAPALIGN_OK) {
      status = CAPALIGN_IO_FAILURE;
      error_message = "cannot write run summary " + path;
    }
  }

  if (status != CAPALIGN_OK) {
    std::cerr << "capalign " << command << ": " << capalign_status_name(status) << ": "
              << error_message << "\n";
  }
  return exit_code_for(status);
}
