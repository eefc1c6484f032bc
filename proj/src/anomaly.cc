/*
 * Copyright 2026 The trace-insight Authors.
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

#include "trace_insight/anomaly.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "trace_insight/random.h"

namespace trace_insight {
namespace {

constexpr double kEulerGamma = 0.5772156649015329;

double finite_or_zero(double v) { return std::isfinite(v) ? v : 0.0; }

template <typename T>
double mean_of(const std::vector<T>& values) {
  if (values.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& v : values) sum += finite_or_zero(static_cast<double>(v));
  return sum / static_cast<double>(values.size());
}

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::vector<double>>& rows,
              std::size_t height_limit, Rng& rng)
      : rows_(rows), height_limit_(height_limit), rng_(rng) {}

  std::int32_t build(std::vector<std::size_t> members, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.push_back({});
    tree_.nodes[id].size = members.size();
    if (members.size() <= 1 || depth >= height_limit_) return id;

    const std::size_t dims = rows_[members.front()].size();
    std::vector<std::size_t> candidates;
    std::vector<double> lo(dims), hi(dims);
    for (std::size_t d = 0; d < dims; ++d) {
      lo[d] = hi[d] = rows_[members.front()][d];
      for (auto m : members) {
        lo[d] = std::min(lo[d], rows_[m][d]);
        hi[d] = std::max(hi[d], rows_[m][d]);
      }
      if (lo[d] < hi[d]) candidates.push_back(d);
    }
    if (candidates.empty()) return id;

    const std::size_t dim = candidates[rng_.index(candidates.size())];
    double split = rng_.uniform(lo[dim], hi[dim]);
    while (split <= lo[dim]) split = rng_.uniform(lo[dim], hi[dim]);

    std::vector<std::size_t> left, right;
    for (auto m : members) {
      (rows_[m][dim] < split ? left : right).push_back(m);
    }
    const auto l = build(std::move(left), depth + 1);
    const auto r = build(std::move(right), depth + 1);
    tree_.nodes[id].dim = static_cast<int>(dim);
    tree_.nodes[id].split = split;
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  IsolationTree take() { return std::move(tree_); }

 private:
  const std::vector<std::vector<double>>& rows_;
  std::size_t height_limit_;
  Rng& rng_;
  IsolationTree tree_;
};

double path_length(const IsolationTree& tree, const std::vector<double>& row) {
  std::size_t depth = 0;
  std::int32_t id = 0;
  while (tree.nodes[id].dim >= 0) {
    const auto& node = tree.nodes[id];
    id = row[static_cast<std::size_t>(node.dim)] < node.split ? node.left
                                                              : node.right;
    ++depth;
  }
  return static_cast<double>(depth) + average_path_length(tree.nodes[id].size);
}

}  // namespace

std::string_view to_string(FeatureMode mode) {
  return mode == FeatureMode::kPerInterval ? "per-interval" : "per-machine-mean";
}

std::optional<FeatureMode> parse_feature_mode(std::string_view text) {
  if (text == "per-machine-mean") return FeatureMode::kPerMachineMean;
  if (text == "per-interval") return FeatureMode::kPerInterval;
  return std::nullopt;
}

FeatureMatrix build_feature_matrix(const std::vector<MachineSeries>& series,
                                   FeatureMode mode, bool zscore) {
  FeatureMatrix matrix;
  matrix.mode = mode;
  for (const auto& s : series) {
    if (mode == FeatureMode::kPerMachineMean) {
      matrix.row_machine.push_back(s.machine);
      matrix.rows.push_back({mean_of(s.cpu), mean_of(s.mem), mean_of(s.disk),
                             mean_of(s.batch_count),
                             mean_of(s.container_count)});
      continue;
    }
    for (std::size_t x = 0; x < s.interval_count(); ++x) {
      matrix.row_machine.push_back(s.machine);
      matrix.rows.push_back({finite_or_zero(s.cpu[x]),
                             finite_or_zero(s.mem[x]),
                             finite_or_zero(s.disk[x]),
                             static_cast<double>(s.batch_count[x]),
                             static_cast<double>(s.container_count[x])});
    }
  }
  if (zscore && !matrix.rows.empty()) {
    const double n = static_cast<double>(matrix.rows.size());
    for (std::size_t d = 0; d < kFeatureCount; ++d) {
      double mean = 0.0;
      for (const auto& r : matrix.rows) mean += r[d];
      mean /= n;
      double var = 0.0;
      for (const auto& r : matrix.rows) var += (r[d] - mean) * (r[d] - mean);
      const double sd = std::sqrt(var / n);
      for (auto& r : matrix.rows) r[d] = sd > 0.0 ? (r[d] - mean) / sd : 0.0;
    }
  }
  return matrix;
}

double average_path_length(std::size_t n) {
  if (n <= 1) return 0.0;
  if (n == 2) return 1.0;
  const double m = static_cast<double>(n - 1);
  return 2.0 * (std::log(m) + kEulerGamma) - 2.0 * m / static_cast<double>(n);
}

IsolationForestModel iforest_fit(const std::vector<std::vector<double>>& rows,
                                 std::size_t tree_count, std::size_t subsample,
                                 std::uint64_t seed) {
  if (rows.empty()) throw std::invalid_argument("empty feature matrix");
  if (tree_count < 1) throw std::invalid_argument("tree_count must be >= 1");
  if (subsample < 2) throw std::invalid_argument("subsample must be >= 2");
  for (const auto& r : rows) {
    if (r.size() != rows.front().size()) {
      throw std::invalid_argument("feature rows differ in length");
    }
  }

  IsolationForestModel model;
  model.tree_count = tree_count;
  model.subsample_size = std::min(subsample, rows.size());
  model.height_limit = static_cast<std::size_t>(
      std::ceil(std::log2(static_cast<double>(model.subsample_size))));
  model.seed = seed;
  model.trees.reserve(tree_count);
  for (std::size_t t = 0; t < tree_count; ++t) {
    Rng rng(derive_seed(seed, t));
    TreeBuilder builder(rows, model.height_limit, rng);
    builder.build(rng.sample(rows.size(), model.subsample_size), 0);
    model.trees.push_back(builder.take());
  }
  return model;
}

double expected_path_length(const IsolationForestModel& model,
                            const std::vector<double>& row) {
  double sum = 0.0;
  for (const auto& tree : model.trees) sum += path_length(tree, row);
  return sum / static_cast<double>(model.trees.size());
}

double anomaly_score(const IsolationForestModel& model,
                     const std::vector<double>& row) {
  const double c = average_path_length(model.subsample_size);
  if (c <= 0.0) return 0.0;
  return 0.5 - std::exp2(-expected_path_length(model, row) / c);
}

std::string_view to_string(CauseTag tag) {
  switch (tag) {
    case CauseTag::kFrequentSoftError: return "FrequentSoftError";
    case CauseTag::kSoftErrorWorkloadStop: return "SoftErrorWorkloadStop";
    case CauseTag::kNoWorkloadsScheduling: return "NoWorkloadsScheduling";
    case CauseTag::kNoOnlineServices: return "NoOnlineServices";
    case CauseTag::kNoBatchJobs: return "NoBatchJobs";
    case CauseTag::kHeavierOnlineServices: return "HeavierOnlineServices";
    case CauseTag::kUnbalancedLighterOnline: return "UnbalancedLighterOnline";
  }
  return "";
}

const std::vector<CauseTag>* AnomalyReport::causes_of(MachineId machine) const {
  auto it = std::lower_bound(
      scores.begin(), scores.end(), machine,
      [](const MachineScore& s, MachineId m) { return s.machine < m; });
  if (it == scores.end() || it->machine != machine) return nullptr;
  const auto i = static_cast<std::size_t>(it - scores.begin());
  return i < causes.size() ? &causes[i] : nullptr;
}

AnomalyReport iforest_score(const IsolationForestModel& model,
                            const FeatureMatrix& matrix) {
  std::map<MachineId, double> best;
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    const double s = anomaly_score(model, matrix.rows[r]);
    auto [it, inserted] = best.emplace(matrix.row_machine[r], s);
    if (!inserted) it->second = std::min(it->second, s);
  }
  AnomalyReport report;
  for (const auto& [machine, score] : best) {
    report.scores.push_back({machine, score});
    if (score < 0.0) ++report.negative_count;
  }
  std::vector<MachineScore> order = report.scores;
  std::stable_sort(order.begin(), order.end(),
                   [](const MachineScore& a, const MachineScore& b) {
                     return a.score < b.score;
                   });
  for (const auto& s : order) report.ranking.push_back(s.machine);
  report.causes.assign(report.scores.size(), {});
  return report;
}

std::vector<MachineScore> rank_anomalies(const AnomalyReport& report,
                                         std::size_t top_n) {
  std::vector<MachineScore> out;
  for (auto machine : report.ranking) {
    if (out.size() >= top_n) break;
    auto it = std::lower_bound(
        report.scores.begin(), report.scores.end(), machine,
        [](const MachineScore& s, MachineId m) { return s.machine < m; });
    out.push_back(*it);
  }
  return out;
}

PopulationStats population_stats(const std::vector<MachineSeries>& series) {
  std::vector<double> containers, batch;
  for (const auto& s : series) {
    const double c = mean_of(s.container_count);
    const double b = mean_of(s.batch_count);
    if (c > 0.0) containers.push_back(c);
    if (b > 0.0) batch.push_back(b);
  }
  return {median(std::move(containers)), median(std::move(batch))};
}

std::optional<std::size_t> batch_stop_interval(const MachineSeries& series) {
  std::size_t stop = series.interval_count();
  while (stop > 0 && series.batch_count[stop - 1] == 0) --stop;
  if (stop == 0 || stop == series.interval_count()) return std::nullopt;
  return stop;
}

std::vector<CauseTag> diagnose(WorkloadType label,
                               const std::vector<MachineEvent>& events,
                               const MachineSeries& series,
                               const IntervalGrid& grid,
                               const PopulationStats& stats,
                               const DiagnoseOptions& options) {
  std::vector<Seconds> softerrors;
  for (const auto& e : events) {
    if (e.machine == series.machine &&
        e.type == MachineEventType::kSoftError) {
      softerrors.push_back(e.timestamp);
    }
  }

  std::vector<CauseTag> tags;
  if (softerrors.size() >= options.frequent_softerrors) {
    tags.push_back(CauseTag::kFrequentSoftError);
  }
  if (const auto stop = batch_stop_interval(series)) {
    const Seconds stop_ts = grid.timestamp(*stop);
    for (auto ts : softerrors) {
      if (std::llabs(ts - stop_ts) <= grid.step()) {
        tags.push_back(CauseTag::kSoftErrorWorkloadStop);
        break;
      }
    }
  }
  switch (label) {
    case WorkloadType::kType2:
      if (softerrors.empty()) tags.push_back(CauseTag::kNoWorkloadsScheduling);
      break;
    case WorkloadType::kType3:
      tags.push_back(CauseTag::kNoOnlineServices);
      break;
    case WorkloadType::kType4:
      tags.push_back(CauseTag::kNoBatchJobs);
      break;
    case WorkloadType::kType1: {
      const double c = mean_of(series.container_count);
      const double b = mean_of(series.batch_count);
      if (stats.median_container_count > 0.0 &&
          c >= options.heavier_factor * stats.median_container_count) {
        tags.push_back(CauseTag::kHeavierOnlineServices);
      }
      if (c <= options.lighter_max_containers &&
          b >= stats.median_batch_count) {
        tags.push_back(CauseTag::kUnbalancedLighterOnline);
      }
      break;
    }
    default:
      break;
  }
  return tags;
}

void attach_causes(AnomalyReport& report, const CategoryModel& model,
                   const std::vector<MachineEvent>& events,
                   const std::vector<MachineSeries>& series,
                   const IntervalGrid& grid, const DiagnoseOptions& options) {
  const PopulationStats stats = population_stats(series);
  std::map<MachineId, const MachineSeries*> by_machine;
  for (const auto& s : series) by_machine[s.machine] = &s;
  std::map<MachineId, std::vector<MachineEvent>> by_event_machine;
  for (const auto& e : events) by_event_machine[e.machine].push_back(e);

  report.causes.assign(report.scores.size(), {});
  for (std::size_t i = 0; i < report.scores.size(); ++i) {
    const MachineId m = report.scores[i].machine;
    auto it = by_machine.find(m);
    if (it == by_machine.end()) continue;
    report.causes[i] = diagnose(model.label_of(m), by_event_machine[m],
                                *it->second, grid, stats, options);
  }
}

}  // namespace trace_insight
