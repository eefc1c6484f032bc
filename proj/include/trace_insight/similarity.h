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

// Node similarity: dynamic time warping between per-machine (cpu, mem, disk)
// utilization curves and a few sampled standard curves.

#ifndef TRACE_INSIGHT_SIMILARITY_H_
#define TRACE_INSIGHT_SIMILARITY_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "trace_insight/aggregate.h"

namespace trace_insight {

using CurvePoint = std::array<double, 3>;  // cpu, mem, disk

struct ResourceCurve {
  MachineId machine = 0;
  std::vector<CurvePoint> points;
};

// Server-level cpu/mem/disk of each machine, one point per interval.
std::vector<ResourceCurve> resource_curves(
    const std::vector<MachineSeries>& series);

struct DtwResult {
  MachineId machine = 0;
  // Cumulative cost dtw(n, l), or (1/K) * sqrt(dtw(n, l)) when normalized.
  double distance = 0.0;
  // Length K of the recovered optimal warping path.
  std::size_t path_length = 0;
};

struct DtwOptions {
  bool normalized = false;
};

// Unconstrained DTW with squared Euclidean point cost:
//   dtw(i, j) = |q_i - s_j|^2 + min(dtw(i-1, j-1), dtw(i-1, j), dtw(i, j-1)).
// Throws std::invalid_argument on an empty curve. `machine` is q's.
DtwResult dtw_distance(const ResourceCurve& q, const ResourceCurve& s,
                       const DtwOptions& options = {});
DtwResult dtw_distance(std::span<const CurvePoint> q,
                       std::span<const CurvePoint> s,
                       const DtwOptions& options = {});

struct StandardSelection {
  double standard_value = 0.0;
  std::vector<MachineId> sample;
  std::vector<MachineId> standards;
};

// Samples `sample_num` curves without replacement, takes the median of their
// pairwise DTW distances as the standard value, and picks `standard_count`
// sample members at random as standard curves. Throws std::invalid_argument
// when sample_num < 2 or exceeds the number of curves.
StandardSelection select_standard(const std::vector<ResourceCurve>& curves,
                                  std::size_t sample_num,
                                  std::size_t standard_count,
                                  std::uint64_t seed,
                                  const DtwOptions& options = {});

struct DistanceRange {
  double lo = 0.0;
  double hi = 0.0;  // exclusive; +inf for the last range
};

// [0,1), [1,2), [2,3), [3,5), [5,inf)
std::vector<DistanceRange> default_distance_ranges();

struct SimilarityOptions {
  double threshold = 3.0;
  std::vector<DistanceRange> ranges = default_distance_ranges();
  // A standard whose sorted distance profile departs from the element-wise
  // median profile of all standards by more than this (sup norm) is reported.
  double suitability_gap = 1.0;
  DtwOptions dtw;
};

struct MachineSimilarity {
  MachineId machine = 0;
  std::vector<double> distances;  // one per standard, in standard order
  double mean = 0.0;
  bool abnormal = false;
};

struct DtwReport {
  double standard_value = 0.0;
  std::vector<MachineId> standards;
  std::vector<MachineSimilarity> machines;
  std::vector<DistanceRange> ranges;
  std::vector<std::size_t> histogram;  // machine means per range
  std::vector<MachineId> flagged;      // mean > threshold, ascending id
  double threshold = 0.0;
  // Per-standard sup-norm gap and the ones above suitability_gap.
  std::vector<double> standard_gaps;
  std::vector<MachineId> unsuitable_standards;
};

// Scores every curve against every standard. Throws std::invalid_argument
// when `standards` is empty or names a machine without a curve.
DtwReport score_similarity(const std::vector<ResourceCurve>& curves,
                           const std::vector<MachineId>& standards,
                           double standard_value,
                           const SimilarityOptions& options = {});

}  // namespace trace_insight

#endif  // TRACE_INSIGHT_SIMILARITY_H_
