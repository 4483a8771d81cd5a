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

#include "benchgen.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <thread>
#include <unordered_set>

#include <httplib.h>
#include <json.hpp>

#include "data_model.hpp"
#include "error.hpp"
#include "hashing.hpp"

namespace capalign {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Markdown emphasis, list bullets and quotes that models wrap lines in.
std::string_view strip_decoration(std::string_view s) {
  constexpr std::string_view kDecor = " \t*_`\"'>#-";
  constexpr std::string_view kBullet = "\xE2\x80\xA2";
  for (;;) {
    s = trim(s);
    if (s.substr(0, kBullet.size()) == kBullet) s.remove_prefix(kBullet.size());
    const auto b = s.find_first_not_of(kDecor);
    const auto e = s.find_last_not_of(kDecor);
    if (b == std::string_view::npos) return {};
    auto next = s.substr(b, e - b + 1);
    if (next == s) return s;
    s = next;
  }
}

}  // namespace

std::vector<std::string> parse_generations(std::string_view response) {
  static const std::regex kExample(
      R"(^(?:\d+[.)]\s*)?example\s*#?\s*(\d+)\s*[:.)\-]\s*(.*)$)",
      std::regex::icase);
  std::vector<std::string> out;
  std::set<int> seen;
  std::size_t start = 0;
  while (start <= response.size() && out.size() < kSeedsPerPrompt) {
    auto end = response.find('\n', start);
    if (end == std::string_view::npos) end = response.size();
    const std::string line(strip_decoration(response.substr(start, end - start)));
    start = end + 1;

    std::smatch m;
    if (!std::regex_match(line, m, kExample)) continue;
    const int k = std::stoi(m[1].str());
    if (k < 1 || k > static_cast<int>(kSeedsPerPrompt) || seen.count(k)) continue;
    const std::string caption(strip_decoration(m[2].str()));
    if (caption.empty()) continue;
    seen.insert(k);
    out.push_back(caption);
  }
  if (out.empty()) {
    throw Error(ErrorCode::kNoCaptionsParsed,
                "response contains no 'Example <k>: <caption>' lines");
  }
  return out;
}

std::string request_hash(std::string_view prompt) { return hex64(fnv1a64(prompt)); }

std::string transcript_line(std::string_view prompt, std::string_view response) {
  nlohmann::ordered_json j;
  j["request_hash"] = request_hash(prompt);
  j["response_text"] = std::string(response);
  return j.dump();
}

ReplayProvider::ReplayProvider(std::istream& transcript) {
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(transcript, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("request_hash") ||
        !j.contains("response_text") || !j["request_hash"].is_string() ||
        !j["response_text"].is_string()) {
      throw IndexedError(ErrorCode::kRecordParse, line_no,
                         "transcript line " + std::to_string(line_no) +
                             ": expected {request_hash, response_text}");
    }
    responses_[j["request_hash"].get<std::string>()].push_back(
        j["response_text"].get<std::string>());
    ++entries_;
  }
}

ReplayProvider ReplayProvider::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open transcript " + path);
  return ReplayProvider(in);
}

std::string ReplayProvider::generate(const std::string& prompt) {
  const std::string h = request_hash(prompt);
  auto it = responses_.find(h);
  if (it == responses_.end() || it->second.empty()) {
    throw Error(ErrorCode::kProviderFailure,
                "no transcript entry for request " + h);
  }
  std::string r = it->second.front();
  if (it->second.size() > 1) it->second.pop_front();
  return r;
}

std::string RecordingProvider::generate(const std::string& prompt) {
  std::string r = inner_.generate(prompt);
  out_ << transcript_line(prompt, r) << '\n';
  out_.flush();
  return r;
}

HttpProvider::HttpProvider(std::string url, std::chrono::seconds timeout)
    : timeout_(timeout) {
  static const std::regex kUrl(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, kUrl)) {
    throw Error(ErrorCode::kInvalidArgument,
                "provider url must look like http://host:port/path, got " + url);
  }
  base_ = m[1].str();
  path_ = m[2].matched ? m[2].str() : "/";
}

std::string HttpProvider::generate(const std::string& prompt) {
  httplib::Client client(base_);
  client.set_read_timeout(timeout_);
  client.set_connection_timeout(std::chrono::seconds(10));
  nlohmann::json body;
  body["prompt"] = prompt;
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::kProviderFailure,
                "provider request failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::kProviderFailure,
                "provider returned HTTP " + std::to_string(res->status));
  }
  auto j = nlohmann::json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("text") ||
      !j["text"].is_string()) {
    throw Error(ErrorCode::kProviderFailure, "provider response lacks 'text'");
  }
  return j["text"].get<std::string>();
}

namespace {

// Floyd's algorithm; returned indices are sorted.
std::vector<std::size_t> sample_distinct(SeededRng& rng, std::size_t n,
                                         std::size_t k) {
  std::set<std::size_t> chosen;
  for (std::size_t j = n - k; j < n; ++j) {
    const std::size_t t = static_cast<std::size_t>(rng.below(j + 1));
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return {chosen.begin(), chosen.end()};
}

}  // namespace

GenerationResult iterate_generation(TextProvider& provider,
                                    const GenerationConfig& config) {
  GenerationResult result;
  std::unordered_set<std::string> known;
  auto add = [&](const std::string& text, std::uint64_t round,
                 std::vector<std::string> seed_ids) {
    std::string norm = normalize_caption(text);
    if (norm.empty() || !known.insert(norm).second) return false;
    BenchmarkPrompt p;
    p.id = std::to_string(result.pool.size());
    p.text = std::string(trim(text));
    p.round = round;
    p.seed_ids = std::move(seed_ids);
    p.normalized = std::move(norm);
    result.pool.push_back(std::move(p));
    return true;
  };
  for (const auto& s : config.seeds) add(s, 0, {});
  if (result.pool.size() < kSeedsPerPrompt) {
    throw Error(ErrorCode::kSeedArity,
                "generation needs at least 5 distinct seed captions, got " +
                    std::to_string(result.pool.size()));
  }

  SeededRng rng(config.rng_seed);
  const std::size_t per_round = std::max<std::size_t>(1, config.per_round);
  while (result.pool.size() < config.target_count &&
         result.rounds_executed < config.round_limit) {
    const std::uint64_t round = ++result.rounds_executed;
    const auto picked = sample_distinct(rng, result.pool.size(), kSeedsPerPrompt);
    std::vector<std::string> seed_texts, seed_ids;
    for (auto i : picked) {
      seed_texts.push_back(result.pool[i].text);
      seed_ids.push_back(result.pool[i].id);
    }
    const std::string prompt = build_prompt(config, seed_texts);

    std::optional<std::string> response;
    std::string last_error;
    for (std::size_t attempt = 0; attempt < std::max<std::size_t>(1, config.max_attempts);
         ++attempt) {
      if (attempt > 0 && config.backoff.count() > 0) {
        std::this_thread::sleep_for(config.backoff * (1LL << (attempt - 1)));
      }
      try {
        response = provider.generate(prompt);
        break;
      } catch (const std::exception& e) {
        last_error = e.what();
      }
    }
    if (!response) {
      result.failures.push_back({round, "provider: " + last_error});
      continue;
    }

    std::vector<std::string> captions;
    try {
      captions = parse_generations(*response);
    } catch (const Error& e) {
      result.failures.push_back({round, e.what()});
      continue;
    }
    std::size_t accepted = 0;
    for (const auto& c : captions) {
      if (accepted == per_round || result.pool.size() >= config.target_count) break;
      if (add(c, round, seed_ids)) ++accepted;
    }
  }
  result.partial = result.pool.size() < config.target_count;
  return result;
}

std::vector<BenchmarkPrompt> dedup(std::span<const BenchmarkPrompt> pool) {
  std::vector<BenchmarkPrompt> out;
  std::unordered_set<std::string> seen;
  for (const auto& p : pool) {
    std::string norm = normalize_caption(p.text);
    if (!seen.insert(norm).second) continue;
    out.push_back(p);
    out.back().normalized = std::move(norm);
  }
  return out;
}

std::vector<BenchmarkPrompt> subsample(std::span<const BenchmarkPrompt> pool,
                                       std::size_t n, std::uint64_t seed) {
  if (n > pool.size()) {
    throw Error(ErrorCode::kSampleTooLarge,
                "cannot sample " + std::to_string(n) + " from a pool of " +
                    std::to_string(pool.size()));
  }
  // Selection sampling: each index is kept with probability
  // (still needed) / (still available).
  SeededRng rng(seed);
  std::vector<BenchmarkPrompt> out;
  out.reserve(n);
  std::size_t needed = n;
  for (std::size_t i = 0; i < pool.size() && needed > 0; ++i) {
    const std::size_t available = pool.size() - i;
    if (rng.below(available) < needed) {
      out.push_back(pool[i]);
      --needed;
    }
  }
  return out;
}

std::size_t count_words(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for (unsigned char c : text) {
    const bool space = std::isspace(c) != 0;
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

namespace {

const std::unordered_set<std::string>& function_words() {
  static const std::unordered_set<std::string> kWords = {
      "a", "an", "the", "this", "that", "these", "those", "some", "any", "each",
      "every", "both", "either", "neither", "of", "in", "on", "at", "by", "for",
      "with", "without", "from", "to", "into", "onto", "over", "under", "above",
      "below", "between", "among", "amid", "amidst", "through", "across",
      "behind", "beside", "near", "around", "against", "along", "during",
      "before", "after", "while", "as", "like", "within", "upon", "about",
      "and", "or", "but", "nor", "yet", "so", "is", "are", "was", "were", "be",
      "been", "being", "has", "have", "had", "do", "does", "did", "it", "its",
      "they", "their", "them", "he", "his", "him", "she", "her", "we", "our",
      "you", "your", "who", "whom", "whose", "which", "what", "where", "when",
      "there", "here", "not", "no", "all", "various", "other", "such", "than",
      "then", "also", "very", "one's"};
  return kWords;
}

bool is_verb_form(const std::string& w) {
  auto ends_with = [&](std::string_view suffix) {
    return w.size() > suffix.size() + 2 &&
           std::string_view(w).substr(w.size() - suffix.size()) == suffix;
  };
  return ends_with("ing") || ends_with("ed");
}

}  // namespace

std::size_t count_noun_chunks(std::string_view text) {
  std::size_t chunks = 0;
  bool in_chunk = false;
  std::string word;
  auto flush_word = [&](bool boundary_after) {
    if (!word.empty()) {
      const bool content = !function_words().count(word) && !is_verb_form(word);
      if (content && !in_chunk) ++chunks;
      in_chunk = content;
      word.clear();
    }
    if (boundary_after) in_chunk = false;
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '-' || c == '\'' || c >= 0x80) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if (std::isspace(c)) {
      flush_word(false);
    } else {
      flush_word(true);
    }
  }
  flush_word(true);
  return chunks;
}

CorpusStats corpus_stats(std::span<const BenchmarkPrompt> prompts,
                         const ObjectCounts* object_counts) {
  if (prompts.empty()) {
    throw Error(ErrorCode::kEmptyGroup, "corpus statistics need at least one prompt");
  }
  CorpusStats s;
  s.count = prompts.size();
  s.objects_heuristic = object_counts == nullptr;
  double words = 0.0, objects = 0.0;
  for (const auto& p : prompts) {
    words += static_cast<double>(count_words(p.text));
    if (object_counts) {
      auto it = object_counts->find(p.id);
      if (it == object_counts->end()) {
        throw Error(ErrorCode::kInvalidArgument,
                    "no object count for prompt id '" + p.id + "'");
      }
      objects += it->second;
    } else {
      objects += static_cast<double>(count_noun_chunks(p.text));
    }
  }
  s.mean_words = words / static_cast<double>(s.count);
  s.mean_objects = objects / static_cast<double>(s.count);
  return s;
}

std::vector<BenchmarkPrompt> read_prompts(std::istream& in) {
  std::vector<BenchmarkPrompt> out;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto t = trim(line);
    if (t.empty()) continue;
    BenchmarkPrompt p;
    if (t.front() == '{') {
      auto j = nlohmann::json::parse(t, nullptr, false);
      if (j.is_discarded() || !j.is_object() || !j.contains("text") ||
          !j["text"].is_string()) {
        throw IndexedError(ErrorCode::kRecordParse, line_no,
                           "prompt line " + std::to_string(line_no) +
                               ": expected {text, round, seed_ids}");
      }
      p.text = j["text"].get<std::string>();
      p.id = j.contains("id") && j["id"].is_string() ? j["id"].get<std::string>()
                                                       : std::to_string(out.size());
      if (j.contains("round") && j["round"].is_number_unsigned()) {
        p.round = j["round"].get<std::uint64_t>();
      }
      if (j.contains("seed_ids") && j["seed_ids"].is_array()) {
        for (const auto& s : j["seed_ids"]) {
          p.seed_ids.push_back(s.is_string() ? s.get<std::string>() : s.dump());
        }
      }
    } else {
      p.text = std::string(t);
      p.id = std::to_string(out.size());
    }
    p.normalized = normalize_caption(p.text);
    out.push_back(std::move(p));
  }
  if (in.bad()) throw Error(ErrorCode::kIoFailure, "prompt file read failed");
  return out;
}

std::vector<BenchmarkPrompt> read_prompts_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open prompt file " + path);
  return read_prompts(in);
}

void write_prompts(std::ostream& out, std::span<const BenchmarkPrompt> pool) {
  for (const auto& p : pool) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["text"] = p.text;
    j["round"] = p.round;
    j["seed_ids"] = p.seed_ids;
    out << j.dump() << '\n';
  }
}

ObjectCounts read_object_counts_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open object counts " + path);
  ObjectCounts counts;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("id") ||
        !j.contains("objects") || !j["objects"].is_number()) {
      throw IndexedError(ErrorCode::kRecordParse, line_no,
                         "object count line " + std::to_string(line_no) +
                             ": expected {id, objects}");
    }
    const auto& id = j["id"];
    counts[id.is_string() ? id.get<std::string>() : id.dump()] =
        j["objects"].get<double>();
  }
  return counts;
}

}  // namespace capalign
