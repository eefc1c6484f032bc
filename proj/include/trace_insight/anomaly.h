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

// Isolation-forest scoring of machines over five resource features, and the
// rule set that tags likely causes.

#ifndef TRACE_INSIGHT_ANOMALY_H_
#define TRACE_INSIGHT_ANOMALY_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "trace_insight/aggregate.h"
#include "trace_insight/classify.h"
#include "trace_insight/trace_model.h"

namespace trace_insight {

enum class FeatureMode { kPerMachineMean, kPerInterval };

std::string_view to_string(FeatureMode mode);
std::optional<FeatureMode> parse_feature_mode(std::string_view text);

// Column order of every feature row.
inline constexpr std::size_t kFeatureCount = 5;
inline constexpr std::string_view kFeatureNames[kFeatureCount] = {
    "cpu", "mem", "disk", "batch_count", "container_count"};

struct FeatureMatrix {
  FeatureMode mode = FeatureMode::kPerMachineMean;
  std::vector<MachineId> row_machine;
  std::vector<std::vector<double>> rows;
};

// Non-finite usage values count as 0. With `zscore`, every column is shifted
// and scaled to zero mean and unit variance (constant columns become 0).
FeatureMatrix build_feature_matrix(const std::vector<MachineSeries>& series,
                                   FeatureMode mode = FeatureMode::kPerMachineMean,
                                   bool zscore = false);

struct IsolationNode {
  // Leaf when dim < 0; otherwise rows with x[dim] < split go left.
  int dim = -1;
  double split = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::size_t size = 0;
};

struct IsolationTree {
  std::vector<IsolationNode> nodes;  // nodes[0] is the root
};

struct IsolationForestModel {
  std::size_t tree_count = 0;
  std::size_t subsample_size = 0;  // min(requested, n)
  std::size_t height_limit = 0;
  std::uint64_t seed = 0;
  std::vector<IsolationTree> trees;
};

// Average unsuccessful-search path length of a binary search tree on n
// points: 2 H(n-1) - 2 (n-1) / n with H(i) ~ ln(i) + 0.5772156649, c(2) = 1
// and c(n <= 1) = 0.
double average_path_length(std::size_t n);

// Tree i draws its subsample and splits from derive_seed(seed, i). Throws
// std::invalid_argument on an empty matrix, tree_count < 1 or subsample < 2.
IsolationForestModel iforest_fit(const std::vector<std::vector<double>>& rows,
                                 std::size_t tree_count, std::size_t subsample,
                                 std::uint64_t seed);

// Mean path length of `row` over the forest, leaf corrections included.
double expected_path_length(const IsolationForestModel& model,
                            const std::vector<double>& row);

// 0.5 - 2^(-E(h) / c(psi)); negative means anomalous. 0 when psi = 1.
double anomaly_score(const IsolationForestModel& model,
                     const std::vector<double>& row);

enum class CauseTag {
  kFrequentSoftError,
  kSoftErrorWorkloadStop,
  kNoWorkloadsScheduling,
  kNoOnlineServices,
  kNoBatchJobs,
  kHeavierOnlineServices,
  kUnbalancedLighterOnline,
};

std::string_view to_string(CauseTag tag);

struct MachineScore {
  MachineId machine = 0;
  double score = 0.0;
  bool operator==(const MachineScore&) const = default;
};

struct AnomalyReport {
  std::vector<MachineScore> scores;  // ascending machine id
  std::vector<MachineId> ranking;    // ascending score, ties by machine id
  std::size_t negative_count = 0;
  std::vector<std::vector<CauseTag>> causes;  // parallel to `scores`

  const std::vector<CauseTag>* causes_of(MachineId machine) const;
};

// Per-interval matrices score a machine by the minimum over its rows.
AnomalyReport iforest_score(const IsolationForestModel& model,
                            const FeatureMatrix& matrix);

// The first top_n entries of the ranking with their scores.
std::vector<MachineScore> rank_anomalies(const AnomalyReport& report,
                                         std::size_t top_n);

struct PopulationStats {
  // Medians over machines whose mean count is positive.
  double median_container_count = 0.0;
  double median_batch_count = 0.0;
};

PopulationStats population_stats(const std::vector<MachineSeries>& series);

struct DiagnoseOptions {
  std::size_t frequent_softerrors = 3;
  double heavier_factor = 1.5;
  double lighter_max_containers = 1.0;
};

// Interval index from which the machine runs no batch instance to the end of
// the trace, provided batch ran before it.
std::optional<std::size_t> batch_stop_interval(const MachineSeries& series);

// `events` may hold any machine's events; only `series.machine`'s are used.
std::vector<CauseTag> diagnose(WorkloadType label,
                               const std::vector<MachineEvent>& events,
                               const MachineSeries& series,
                               const IntervalGrid& grid,
                               const PopulationStats& stats,
                               const DiagnoseOptions& options = {});

// Fills report.causes for every scored machine.
void attach_causes(AnomalyReport& report, const CategoryModel& model,
                   const std::vector<MachineEvent>& events,
                   const std::vector<MachineSeries>& series,
                   const IntervalGrid& grid,
                   const DiagnoseOptions& options = {});

}  // namespace trace_insight

#endif  // TRACE_INSIGHT_ANOMALY_H_
