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

#include "eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include "error.hpp"

namespace capalign {

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw Error(ErrorCode::kDimMismatch,
                "pearson: " + std::to_string(xs.size()) + " xs vs " +
                    std::to_string(ys.size()) + " ys");
  }
  const std::size_t n = xs.size();
  if (n < 3) {
    throw Error(ErrorCode::kInsufficientSamples,
                "pearson needs at least 3 samples, got " + std::to_string(n));
  }
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    throw Error(ErrorCode::kDegenerateVariance, "pearson: zero variance input");
  }
  return std::clamp(sxy / (std::sqrt(sxx) * std::sqrt(syy)), -1.0, 1.0);
}

double pearson_p_value(double r, std::size_t n) {
  if (n < 3) return 1.0;
  if (std::abs(r) >= 1.0) return 0.0;
  const double df = static_cast<double>(n - 2);
  const double t = std::abs(r) * std::sqrt(df / (1.0 - r * r));
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, t));
}

std::string_view cell_status_name(CellStatus status) {
  switch (status) {
    case CellStatus::kOk: return "ok";
    case CellStatus::kInsufficientSamples: return "insufficient_samples";
    case CellStatus::kDegenerateVariance: return "degenerate_variance";
  }
  return "unknown";
}

std::string_view all_mode_name(AllMode mode) {
  return mode == AllMode::kPooled ? "pooled" : "mean-of-r";
}

AllMode parse_all_mode(std::string_view name) {
  if (name == "pooled") return AllMode::kPooled;
  if (name == "mean-of-r") return AllMode::kMeanOfR;
  throw Error(ErrorCode::kInvalidArgument,
              "unknown all-mode '" + std::string(name) + "'");
}

namespace {

CorrelationCell correlate_cell(std::string column, const std::vector<double>& xs,
                               const std::vector<double>& ys) {
  CorrelationCell cell;
  cell.column = std::move(column);
  cell.n = xs.size();
  if (cell.n < 3) {
    cell.status = CellStatus::kInsufficientSamples;
    return cell;
  }
  try {
    cell.r = pearson(xs, ys);
    cell.status = CellStatus::kOk;
    cell.p_value = pearson_p_value(cell.r, cell.n);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDegenerateVariance) throw;
    cell.status = CellStatus::kDegenerateVariance;
  }
  return cell;
}

}  // namespace

CorrelationTable correlate_by_criterion(std::span<const HumanJudgment> judgments,
                                        const MetricScores& metric_scores,
                                        Rubric rubric, std::string metric_name,
                                        AllMode all_mode) {
  struct Acc {
    double sum = 0.0;
    std::size_t n = 0;
  };
  // Ordered so the pooled pair sequence is deterministic.
  std::map<std::string, std::array<Acc, kCriteriaPerRubric>> per_item;
  for (const auto& j : judgments) {
    if (j.rubric != rubric) continue;
    auto idx = criterion_index(rubric, j.criterion);
    if (!idx) continue;
    if (!metric_scores.count(j.item_id)) continue;
    auto& acc = per_item[j.item_id][*idx];
    acc.sum += j.score;
    ++acc.n;
  }
  if (per_item.empty()) {
    throw Error(ErrorCode::kEmptyJoin,
                "no " + std::string(rubric_name(rubric)) +
                    " judgment joins a metric score by item id");
  }

  CorrelationTable table;
  table.rubric = rubric;
  table.metric = std::move(metric_name);
  table.all_mode = all_mode;
  table.joined_items = per_item.size();

  const auto crit = rubric_criteria(rubric);
  std::vector<double> all_x, all_y;
  for (std::size_t c = 0; c < crit.size(); ++c) {
    std::vector<double> xs, ys;
    for (const auto& [item, accs] : per_item) {
      if (accs[c].n == 0) continue;
      xs.push_back(metric_scores.at(item));
      ys.push_back(accs[c].sum / static_cast<double>(accs[c].n));
    }
    all_x.insert(all_x.end(), xs.begin(), xs.end());
    all_y.insert(all_y.end(), ys.begin(), ys.end());
    table.criteria.push_back(correlate_cell(std::string(crit[c].column), xs, ys));
  }

  if (all_mode == AllMode::kPooled) {
    table.overall = correlate_cell("All", all_x, all_y);
  } else {
    CorrelationCell cell;
    cell.column = "All";
    cell.n = all_x.size();
    double sum = 0.0;
    std::size_t ok = 0;
    for (const auto& c : table.criteria) {
      if (c.status != CellStatus::kOk) continue;
      sum += c.r;
      ++ok;
    }
    if (ok > 0) {
      cell.status = CellStatus::kOk;
      cell.r = sum / static_cast<double>(ok);
    }
    table.overall = cell;
  }
  return table;
}

AggregateRow aggregate_scores(std::span<const HumanJudgment> judgments,
                              Rubric rubric, std::string_view system_tag) {
  AggregateRow row;
  row.system = std::string(system_tag);
  row.rubric = rubric;
  std::array<double, kCriteriaPerRubric> sums{};
  std::size_t total = 0;
  for (const auto& j : judgments) {
    if (j.rubric != rubric || j.system_tag != system_tag) continue;
    auto idx = criterion_index(rubric, j.criterion);
    if (!idx) continue;
    sums[*idx] += j.score;
    ++row.counts[*idx];
    ++total;
  }
  if (total == 0) {
    throw Error(ErrorCode::kEmptyGroup,
                "no " + std::string(rubric_name(rubric)) +
                    " judgments for system '" + std::string(system_tag) + "'");
  }
  for (std::size_t c = 0; c < kCriteriaPerRubric; ++c) {
    if (row.counts[c] > 0) row.means[c] = sums[c] / static_cast<double>(row.counts[c]);
  }
  return row;
}

AggregateRow aggregate_image_scores(std::span<const HumanJudgment> judgments,
                                    std::string_view system_tag) {
  return aggregate_scores(judgments, Rubric::kImage, system_tag);
}

std::vector<AggregateRow> aggregate_all_systems(
    std::span<const HumanJudgment> judgments, Rubric rubric) {
  std::map<std::string, bool> systems;
  for (const auto& j : judgments) {
    if (j.rubric == rubric) systems[j.system_tag] = true;
  }
  std::vector<AggregateRow> rows;
  for (const auto& [tag, _] : systems) {
    rows.push_back(aggregate_scores(judgments, rubric, tag));
  }
  return rows;
}

ScoreHistogram score_histogram(std::span<const HumanJudgment> judgments) {
  ScoreHistogram h;
  std::size_t above = 0;
  for (const auto& j : judgments) {
    if (j.score < kMinScore || j.score > kMaxScore) {
      throw Error(ErrorCode::kInvalidScore,
                  "score " + std::to_string(j.score) + " outside 1..5");
    }
    ++h.counts[static_cast<std::size_t>(j.score - 1)];
    ++h.total;
    if (j.score >= 3) ++above;
  }
  if (h.total > 0) {
    h.above_average_ratio = static_cast<double>(above) / static_cast<double>(h.total);
  }
  return h;
}

std::string format_two_decimals(double v) {
  // printf alone rounds exact ties to even.
  const double r = std::round(v * 100.0) / 100.0;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2f", r == 0.0 ? 0.0 : r);
  return buf;
}

namespace {

std::string format_r(const CorrelationCell& c) {
  if (c.status != CellStatus::kOk) return "n/a";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.3f", c.r);
  return buf;
}

// Left-aligned first column, right-aligned value columns.
std::string render_grid(const std::vector<std::string>& header,
                        const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) width[i] = header[i].size();
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.size(); ++i) width[i] = std::max(width[i], r[i].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string pad(width[i] - cells[i].size(), ' ');
      if (i == 0) {
        out << cells[i] << pad;
      } else {
        out << "  " << pad << cells[i];
      }
    }
    out << '\n';
  };
  emit(header);
  std::size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : rows) emit(r);
  return out.str();
}

const char kNoData[] = "(no data)\n";

}  // namespace

std::string render_correlation_report(std::span<const CorrelationTable> tables) {
  if (tables.empty()) return kNoData;
  std::vector<std::string> header = {"Metric"};
  for (const auto& c : rubric_criteria(tables.front().rubric)) {
    header.emplace_back(c.column);
  }
  header.emplace_back("All");
  std::vector<std::vector<std::string>> rows;
  for (const auto& t : tables) {
    std::vector<std::string> row = {t.metric};
    for (const auto& c : t.criteria) row.push_back(format_r(c));
    row.push_back(format_r(t.overall));
    rows.push_back(std::move(row));
  }
  return render_grid(header, rows);
}

std::string render_aggregate_report(std::span<const AggregateRow> rows_in) {
  if (rows_in.empty()) return kNoData;
  std::vector<std::string> header = {"System"};
  for (const auto& c : rubric_criteria(rows_in.front().rubric)) {
    header.emplace_back(c.column);
  }
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : rows_in) {
    std::vector<std::string> row = {r.system.empty() ? "(untagged)" : r.system};
    for (const auto& m : r.means) row.push_back(m ? format_two_decimals(*m) : "-");
    rows.push_back(std::move(row));
  }
  return render_grid(header, rows);
}

std::string render_histogram(const ScoreHistogram& h) {
  if (h.total == 0) return kNoData;
  std::vector<std::string> header = {"Score", "Count"};
  std::vector<std::vector<std::string>> rows;
  for (int s = kMinScore; s <= kMaxScore; ++s) {
    rows.push_back({std::to_string(s), std::to_string(h.counts[s - 1])});
  }
  std::string out = render_grid(header, rows);
  out += "rated >= 3: " + format_two_decimals(100.0 * *h.above_average_ratio) +
         "% of " + std::to_string(h.total) + "\n";
  return out;
}

namespace {

nlohmann::ordered_json cell_json(const CorrelationCell& c, std::string_view key) {
  nlohmann::ordered_json j;
  j["criterion"] = key;
  j["column"] = c.column;
  j["n"] = c.n;
  j["status"] = cell_status_name(c.status);
  j["r"] = c.status == CellStatus::kOk ? nlohmann::ordered_json(c.r)
                                       : nlohmann::ordered_json(nullptr);
  j["p"] = c.p_value ? nlohmann::ordered_json(*c.p_value)
                     : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace

std::string correlation_json_line(const CorrelationTable& t) {
  nlohmann::ordered_json j;
  j["metric"] = t.metric;
  j["rubric"] = rubric_name(t.rubric);
  j["all_mode"] = all_mode_name(t.all_mode);
  j["joined_items"] = t.joined_items;
  auto crit = rubric_criteria(t.rubric);
  nlohmann::ordered_json cells = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < t.criteria.size(); ++i) {
    cells.push_back(cell_json(t.criteria[i], crit[i].key));
  }
  j["cells"] = std::move(cells);
  j["all"] = cell_json(t.overall, "all");
  return j.dump();
}

std::string aggregate_json_line(const AggregateRow& row) {
  nlohmann::ordered_json j;
  j["system"] = row.system;
  j["rubric"] = rubric_name(row.rubric);
  nlohmann::ordered_json means;
  nlohmann::ordered_json counts;
  auto crit = rubric_criteria(row.rubric);
  for (std::size_t i = 0; i < kCriteriaPerRubric; ++i) {
    means[std::string(crit[i].key)] =
        row.means[i] ? nlohmann::ordered_json(*row.means[i])
                     : nlohmann::ordered_json(nullptr);
    counts[std::string(crit[i].key)] = row.counts[i];
  }
  j["means"] = std::move(means);
  j["counts"] = std::move(counts);
  return j.dump();
}

}  // namespace capalign
