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

#include "filter.hpp"

#include <algorithm>
#include <exception>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "error.hpp"
#include "hashing.hpp"

namespace capalign {

FilterStrategy FilterStrategy::from_name(std::string_view name,
                                         std::uint64_t seed) {
  FilterStrategy s;
  s.seed = seed;
  if (name == "ours") {
    s.kind = StrategyKind::kOurs;
    s.weights = {1.0, 1.0, 1.0};
  } else if (name == "text-only") {
    s.kind = StrategyKind::kTextOnly;
    s.weights = {1.0, 0.0, 0.0};
  } else if (name == "image-only") {
    s.kind = StrategyKind::kImageOnly;
    s.weights = {0.0, 1.0, 0.0};
  } else if (name == "object-ablated") {
    s.kind = StrategyKind::kObjectAblated;
    s.weights = {1.0, 1.0, 0.0};
  } else if (name == "random") {
    s.kind = StrategyKind::kRandom;
    s.weights = {0.0, 0.0, 0.0};
  } else {
    throw Error(ErrorCode::kUnknownStrategy,
                "unknown strategy '" + std::string(name) +
                    "' (expected ours|text-only|image-only|object-ablated|random)");
  }
  return s;
}

std::string_view FilterStrategy::name() const {
  switch (kind) {
    case StrategyKind::kOurs: return "ours";
    case StrategyKind::kTextOnly: return "text-only";
    case StrategyKind::kImageOnly: return "image-only";
    case StrategyKind::kObjectAblated: return "object-ablated";
    case StrategyKind::kRandom: return "random";
  }
  return "unknown";
}

double random_key(std::uint64_t seed, std::string_view id) {
  const std::uint64_t bits = splitmix64(seed ^ fnv1a64(id));
  return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

void TopK::push(RankedEntry entry) {
  if (k_ == 0) return;
  if (heap_.size() < k_) {
    heap_.push_back(std::move(entry));
    std::push_heap(heap_.begin(), heap_.end(), ranks_before);
    return;
  }
  if (!ranks_before(entry, heap_.front())) return;
  std::pop_heap(heap_.begin(), heap_.end(), ranks_before);
  heap_.back() = std::move(entry);
  std::push_heap(heap_.begin(), heap_.end(), ranks_before);
}

void TopK::merge(TopK&& other) {
  for (auto& e : other.heap_) push(std::move(e));
  other.heap_.clear();
}

std::vector<RankedEntry> TopK::take() && {
  std::sort_heap(heap_.begin(), heap_.end(), ranks_before);
  return std::move(heap_);
}

namespace {

std::optional<RankedEntry> rank_unit(const ScoringUnit& unit,
                                     const FilterStrategy& strategy,
                                     const StrategyOptions& options) {
  if (options.drop_undefined_objects && unit.obj_emb.empty()) return std::nullopt;
  RankedEntry e;
  e.id = unit.record.id;
  if (strategy.kind == StrategyKind::kRandom) {
    e.score = random_key(strategy.seed, e.id);
    return e;
  }
  e.breakdown = score_unit(unit, options.mode, strategy.weights);
  e.score = e.breakdown.combined;
  return e;
}

template <typename Fn>
void run_partitioned(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n == 0 ? 1 : n));
  if (workers == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    threads.emplace_back([&, w, begin, end] {
      try {
        fn(w, begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::vector<RankedEntry> apply_strategy(std::span<const ScoringUnit> units,
                                        const FilterStrategy& strategy,
                                        const StrategyOptions& options) {
  std::vector<RankedEntry> out;
  out.reserve(units.size());
  for (const auto& u : units) {
    if (auto e = rank_unit(u, strategy, options)) out.push_back(std::move(*e));
  }
  return out;
}

std::vector<RankedEntry> apply_strategy(
    std::span<const std::pair<std::string, AlignmentBreakdown>> scored,
    const FilterStrategy& strategy, bool drop_undefined_objects) {
  std::vector<RankedEntry> out;
  out.reserve(scored.size());
  for (const auto& [id, b] : scored) {
    if (drop_undefined_objects && !b.a_ot_defined) continue;
    RankedEntry e;
    e.id = id;
    if (strategy.kind == StrategyKind::kRandom) {
      e.score = random_key(strategy.seed, id);
    } else {
      e.breakdown = combine(b, strategy.weights);
      e.score = e.breakdown.combined;
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<RankedEntry> rank_topk(std::vector<RankedEntry> entries,
                                   std::size_t k) {
  TopK top(k);
  for (auto& e : entries) top.push(std::move(e));
  return std::move(top).take();
}

std::vector<RankedEntry> score_and_rank(std::size_t n, const UnitAccessor& unit_at,
                                        const FilterStrategy& strategy,
                                        const StrategyOptions& options,
                                        std::size_t k, std::size_t workers) {
  workers = std::max<std::size_t>(1, workers);
  std::vector<TopK> partial(workers, TopK(k));
  run_partitioned(n, workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
    ScoringUnit scratch;
    TopK& local = partial[w];
    for (std::size_t i = begin; i < end; ++i) {
      const ScoringUnit& unit = unit_at(i, scratch);
      if (auto e = rank_unit(unit, strategy, options)) local.push(std::move(*e));
    }
  });
  TopK merged(k);
  for (auto& p : partial) merged.merge(std::move(p));
  return std::move(merged).take();
}

std::vector<AlignmentBreakdown> score_all(std::span<const ScoringUnit> units,
                                          ImageTextMode mode,
                                          const ComponentWeights& weights,
                                          std::size_t workers) {
  std::vector<AlignmentBreakdown> out(units.size());
  run_partitioned(units.size(), workers,
                  [&](std::size_t, std::size_t begin, std::size_t end) {
                    for (std::size_t i = begin; i < end; ++i) {
                      out[i] = score_unit(units[i], mode, weights);
                    }
                  });
  return out;
}

EmitSummary emit_manifest(const std::vector<RankedEntry>& topk,
                          std::istream& manifest, std::ostream& out,
                          std::string_view strategy, std::size_t k) {
  EmitSummary summary;
  summary.strategy = std::string(strategy);
  summary.k = k;

  std::unordered_map<std::string, std::string> wanted;
  wanted.reserve(topk.size());
  for (const auto& e : topk) wanted.emplace(e.id, std::string());
  std::unordered_set<std::string> found;

  std::string line;
  while (std::getline(manifest, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) continue;
    auto id_it = j.find("id");
    if (id_it == j.end()) continue;
    const std::string id =
        id_it->is_string() ? id_it->get<std::string>() : id_it->dump();
    auto w = wanted.find(id);
    if (w != wanted.end() && found.insert(id).second) w->second = line;
  }
  if (manifest.bad()) throw Error(ErrorCode::kIoFailure, "manifest read failed");

  std::vector<double> scores;
  for (const auto& e : topk) {
    if (!found.count(e.id)) {
      ++summary.dropped;
      summary.dropped_ids.push_back(e.id);
      continue;
    }
    out << wanted[e.id] << '\n';
    ++summary.selected;
    scores.push_back(e.score);
  }
  if (!out) throw Error(ErrorCode::kIoFailure, "manifest write failed");

  if (!scores.empty()) {
    std::sort(scores.begin(), scores.end());
    const std::size_t n = scores.size();
    summary.min_score = scores.front();
    summary.max_score = scores.back();
    summary.median_score =
        n % 2 == 1 ? scores[n / 2] : 0.5 * (scores[n / 2 - 1] + scores[n / 2]);
  }
  return summary;
}

std::string summary_json_line(const EmitSummary& s) {
  nlohmann::ordered_json j;
  j["strategy"] = s.strategy;
  j["k"] = s.k;
  j["selected"] = s.selected;
  j["dropped"] = s.dropped;
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  j["min"] = opt(s.min_score);
  j["median"] = opt(s.median_score);
  j["max"] = opt(s.max_score);
  return j.dump();
}

std::string breakdown_json_line(std::string_view id, const AlignmentBreakdown& b) {
  nlohmann::ordered_json j;
  j["id"] = id;
  j["a_st"] = b.a_st;
  j["a_it"] = b.a_it;
  j["a_ot"] = b.a_ot;
  j["a_ot_defined"] = b.a_ot_defined;
  j["combined"] = b.combined;
  return j.dump();
}

std::vector<std::pair<std::string, AlignmentBreakdown>> read_breakdowns(
    std::istream& in) {
  std::vector<std::pair<std::string, AlignmentBreakdown>> out;
  std::string line;
  std::uint64_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    auto number = [&](const char* key) {
      auto it = j.find(key);
      if (it == j.end() || !it->is_number()) {
        throw IndexedError(ErrorCode::kRecordParse, n,
                           "breakdown line " + std::to_string(n) +
                               ": missing numeric '" + key + "'");
      }
      return it->get<double>();
    };
    if (j.is_discarded() || !j.is_object() || !j.contains("id") ||
        !j["id"].is_string()) {
      throw IndexedError(ErrorCode::kRecordParse, n,
                         "breakdown line " + std::to_string(n) +
                             ": expected an object with a string id");
    }
    AlignmentBreakdown b;
    b.a_st = number("a_st");
    b.a_it = number("a_it");
    b.a_ot = number("a_ot");
    b.combined = number("combined");
    auto def = j.find("a_ot_defined");
    if (def == j.end() || !def->is_boolean()) {
      throw IndexedError(ErrorCode::kRecordParse, n,
                         "breakdown line " + std::to_string(n) +
                             ": missing boolean 'a_ot_defined'");
    }
    b.a_ot_defined = def->get<bool>();
    out.emplace_back(j["id"].get<std::string>(), b);
  }
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "breakdown read failed");
  return out;
}

}  // namespace capalign
