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

// Workload-distribution categories: k-means over binarized batch/container
// occupancy vectors, with rule-based naming of the resulting clusters.

#ifndef TRACE_INSIGHT_CLASSIFY_H_
#define TRACE_INSIGHT_CLASSIFY_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trace_insight/aggregate.h"

namespace trace_insight {

enum class WorkloadType {
  kType1,  // containers and batch co-located throughout
  kType2,  // no workloads
  kType3,  // batch only
  kType4,  // containers only
  kType5,  // no containers, batch early only
  kType6,  // co-located, batch absent late
  kType7,  // co-located, short batch gap
  kType8,  // co-located, batch absent early
  kUnknown,
};
inline constexpr std::size_t kWorkloadTypeCount = 8;

std::string_view to_string(WorkloadType type);
std::optional<WorkloadType> parse_workload_type(std::string_view text);
inline WorkloadType workload_type(std::size_t index) {
  return static_cast<WorkloadType>(index);
}

// bits[x] = batch present in interval x, bits[N + x] = containers present.
struct OccupancyVector {
  MachineId machine = 0;
  std::vector<std::uint8_t> bits;
};

// Non-zero -> 1, zero -> 0.
std::vector<std::uint8_t> binarize(std::span<const double> values);
OccupancyVector binarize_occupancy(const MachineSeries& series);

struct KMeansOptions {
  std::size_t k = 8;
  std::uint64_t seed = 0;
  std::size_t max_iter = 100;
  // Independent k-means++ starts; the lowest-inertia run is kept.
  std::size_t restarts = 10;
};

struct CategoryModel {
  std::size_t k = 0;
  std::vector<std::vector<double>> centroids;
  // Machines in ascending id order, with their cluster index.
  std::vector<MachineId> machines;
  std::vector<std::size_t> assignments;
  // Per cluster; all kUnknown until label_clusters runs.
  std::vector<WorkloadType> labels;
  double inertia = 0.0;
  // Inertia after each assignment step of the kept run.
  std::vector<double> inertia_history;
  std::size_t iterations = 0;
  std::vector<std::string> diagnostics;

  std::optional<std::size_t> cluster_of(MachineId machine) const;
  WorkloadType label_of(MachineId machine) const;
};

// Lloyd iterations from seeded k-means++ starts on squared Euclidean
// distance. Input order does not matter: rows are sorted by machine id first.
// Throws std::invalid_argument when k is 0 or exceeds the number of distinct
// vectors.
CategoryModel kmeans_fit(const std::vector<OccupancyVector>& matrix,
                         const KMeansOptions& options);

struct LabelThresholds {
  double always = 0.90;  // mean occupancy counted as "throughout"
  double none = 0.05;    // mean occupancy counted as "absent"
  double split = 0.5;    // early/late boundary as a fraction of N
  double short_gap = 0.25;
  double present = 0.5;  // centroid bit counted as occupied
};

// Names a centroid of length 2N by its batch and container occupancy.
WorkloadType label_centroid(std::span<const double> centroid,
                            const LabelThresholds& thresholds = {});

// Labels each cluster. When several clusters map to one type, the largest
// keeps it and the rest become kUnknown (with a diagnostic).
CategoryModel label_clusters(CategoryModel model,
                             const LabelThresholds& thresholds = {});

struct CategorySummary {
  WorkloadType type = WorkloadType::kUnknown;
  std::vector<MachineId> machines;
  double mean_cpu = 0.0;
  double mean_mem = 0.0;
  double mean_disk = 0.0;
};

// Types 1..8 followed by Unknown.
std::vector<CategorySummary> category_report(
    const CategoryModel& model, const std::vector<MachineSeries>& series);

}  // namespace trace_insight

#endif  // TRACE_INSIGHT_CLASSIFY_H_
