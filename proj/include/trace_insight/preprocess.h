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

// Trace repair: gap filling of server usage on the recording grid and removal
// of duplicated container events.

#ifndef TRACE_INSIGHT_PREPROCESS_H_
#define TRACE_INSIGHT_PREPROCESS_H_

#include <cstddef>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "trace_insight/trace_model.h"

namespace trace_insight {

// A run of missing samples between two observed values.
struct GapSpec {
  double left_value = 0.0;
  double right_value = 0.0;
  // Samples from the left observation to the right one, both included.
  int span_count = 0;
  // 1-based position of the missing sample inside the span.
  int missing_index = 0;
};

// Linear fill: left + (right - left) / (span_count - 1) * missing_index.
// Throws std::invalid_argument when span_count < 3 or missing_index is not in
// [1, span_count - 2].
double interpolate_gap(const GapSpec& gap);

enum class BoundaryPolicy {
  // Samples before the first / after the last observation take the nearest
  // observed value.
  kHold,
  // Leading and trailing gaps stay NaN.
  kLeave,
};

// Server usage on every (machine, grid timestamp, metric). cpu/mem/disk are
// fractions, loads are raw.
class DenseUsage {
 public:
  DenseUsage() = default;
  DenseUsage(MachineId machine_count, const IntervalGrid& grid);

  MachineId machine_count() const { return machine_count_; }
  const IntervalGrid& grid() const { return grid_; }

  double at(MachineId machine, UsageMetric metric, std::size_t slot) const {
    return values_[offset(machine, metric) + slot];
  }
  double& at(MachineId machine, UsageMetric metric, std::size_t slot) {
    return values_[offset(machine, metric) + slot];
  }
  std::span<const double> series(MachineId machine, UsageMetric metric) const {
    return {values_.data() + offset(machine, metric), grid_.timestamp_count()};
  }

  bool operator==(const DenseUsage&) const = default;

 private:
  std::size_t offset(MachineId machine, UsageMetric metric) const {
    return (static_cast<std::size_t>(machine - 1) * kAllUsageMetrics.size() +
            static_cast<std::size_t>(metric)) *
           grid_.timestamp_count();
  }

  MachineId machine_count_ = 0;
  IntervalGrid grid_;
  std::vector<double> values_;
};

struct SupplementResult {
  DenseUsage usage;
  std::vector<RepairAnnotation> repairs;
};

// Places every server-usage record on the grid (a record fills slot x when
// t_x <= timestamp < t_x + step; several records in one slot are averaged),
// then fills the holes:
//   - a machine/metric with no observation at all is zero-filled;
//   - interior gaps are interpolated between the neighbouring observations;
//   - leading/trailing gaps follow `boundary`.
// Every synthesized value is annotated.
SupplementResult supplement_server_usage(
    const TraceBundle& bundle, const IntervalGrid& grid,
    BoundaryPolicy boundary = BoundaryPolicy::kHold);

class FilterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ContainerFilterResult {
  std::vector<ContainerEvent> clean;
  std::vector<ContainerEvent> removed;
};

// Resolves instances with several create records by dropping those whose
// requested memory exceeds `max_mem_req`. Exactly one record per instance
// must survive; otherwise throws FilterError.
ContainerFilterResult filter_container_events(
    const std::vector<ContainerEvent>& events, double max_mem_req = 0.9);

// machine,timestamp,cpu,mem,disk,load1,load5,load15 with fractions written
// losslessly.
void write_dense_usage_csv(const DenseUsage& usage,
                           const std::filesystem::path& path);
// Throws ParseError when the file does not cover `grid` for machine_count
// machines.
DenseUsage read_dense_usage_csv(const std::filesystem::path& path,
                                MachineId machine_count,
                                const IntervalGrid& grid);
void write_repair_log_csv(const std::vector<RepairAnnotation>& repairs,
                          const std::filesystem::path& path);

}  // namespace trace_insight

#endif  // TRACE_INSIGHT_PREPROCESS_H_
