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

// Attribution of CPU and memory usage to online containers and batch
// instances per machine and recording interval, and the per-machine series
// every analysis consumes.

#ifndef TRACE_INSIGHT_AGGREGATE_H_
#define TRACE_INSIGHT_AGGREGATE_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "trace_insight/preprocess.h"
#include "trace_insight/trace_model.h"

namespace trace_insight {

// How a batch instance [start, end] sits relative to an interval
// [t_x, t_{x+1}]. When bounds coincide, the first matching case in this
// order wins.
enum class OverlapCase {
  kInside,        // t_x <= start, end <= t_{x+1}
  kStartsBefore,  // start <= t_x, end <= t_{x+1}
  kEndsAfter,     // t_x <= start, t_{x+1} <= end
  kSpans,         // start <= t_x, t_{x+1} <= end
};

// True when the instance's life cycle intersects the interval. Intervals are
// treated as half-open for this purpose, so an instance ending exactly at t_x
// does not occupy I_x; a zero-length instance occupies the interval holding
// its timestamp.
bool occupies(Seconds start, Seconds end, const Interval& interval);

// nullopt when the instance does not occupy the interval.
std::optional<OverlapCase> classify_overlap(Seconds start, Seconds end,
                                            const Interval& interval);

// Real occupation time of [start, end] within the interval; 0 when disjoint.
Seconds overlap_runtime(Seconds start, Seconds end, const Interval& interval);

struct ContainerAgg {
  MachineId machine = 0;
  Interval interval;
  std::int32_t container_count = 0;
  double total_cpu = 0.0;  // fraction of the machine's cores
  double total_mem = 0.0;  // fraction of the machine's memory
};

struct BatchAgg {
  MachineId machine = 0;
  Interval interval;
  std::int32_t batch_count = 0;
  double total_cpu_cores = 0.0;
  double total_cpu = 0.0;  // total_cpu_cores / machine cores
  double total_mem = 0.0;
};

enum class BatchChargeMode {
  // An instance wholly inside an interval is charged its full average usage;
  // otherwise the share overlap / runtime of it.
  kFaithful,
  // Every instance is charged average usage * overlap / interval length.
  kDurationWeighted,
};

struct AggregateDiagnostics {
  std::size_t unknown_instance_records = 0;
  std::size_t off_grid_usage_records = 0;
  // Batch instances with a zero start or end (failed, waiting, ready).
  std::size_t excluded_batch_instances = 0;
  std::size_t zero_runtime_partial_overlaps = 0;
  std::size_t unknown_machine_records = 0;
};

// Cores per machine, indexed by machine id (slot 0 unused), taken from the
// first add event with a positive cpu count, else `fallback`.
std::vector<std::int32_t> machine_cores(const TraceBundle& bundle,
                                        std::int32_t fallback = 64);

// One entry per (machine, interval), ordered by machine then interval.
// Expects bundle.container_events to be filtered already.
std::vector<ContainerAgg> aggregate_container_usage(
    const TraceBundle& bundle, const IntervalGrid& grid,
    AggregateDiagnostics* diagnostics = nullptr);

std::vector<BatchAgg> aggregate_batch_usage(
    const TraceBundle& bundle, const IntervalGrid& grid,
    BatchChargeMode mode = BatchChargeMode::kFaithful,
    AggregateDiagnostics* diagnostics = nullptr);

// Everything known about one machine, one slot per grid interval.
struct MachineSeries {
  MachineId machine = 0;
  // Server level: mean of the dense samples at t_x and t_{x+1}.
  std::vector<double> cpu;
  std::vector<double> mem;
  std::vector<double> disk;
  std::vector<std::int32_t> container_count;
  std::vector<std::int32_t> batch_count;
  std::vector<double> container_cpu;
  std::vector<double> container_mem;
  std::vector<double> batch_cpu;
  std::vector<double> batch_mem;

  std::size_t interval_count() const { return cpu.size(); }
  bool operator==(const MachineSeries&) const = default;
};

// One series per machine id in [1, machine_count]; missing aggregates are 0.
std::vector<MachineSeries> build_machine_series(
    const TraceBundle& bundle, const IntervalGrid& grid,
    const DenseUsage& usage, const std::vector<ContainerAgg>& container_aggs,
    const std::vector<BatchAgg>& batch_aggs);

void write_container_level_csv(const std::vector<ContainerAgg>& aggs,
                               const std::filesystem::path& path);
void write_batch_level_csv(const std::vector<BatchAgg>& aggs,
                           const std::filesystem::path& path);
// Includes the residual (server minus container and batch) cpu/mem columns.
void write_server_level_csv(const std::vector<MachineSeries>& series,
                            const IntervalGrid& grid,
                            const std::filesystem::path& path);

}  // namespace trace_insight

#endif  // TRACE_INSIGHT_AGGREGATE_H_
