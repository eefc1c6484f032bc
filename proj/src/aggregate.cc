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

#include "trace_insight/aggregate.h"

#include <algorithm>
#include <fstream>
#include <stdexcept>
#include <unordered_map>

namespace trace_insight {
namespace {

struct ContainerInfo {
  MachineId machine;
  double cpu_req;
  double mem_req;
};

std::size_t slot(MachineId machine, std::size_t x, std::size_t intervals) {
  return static_cast<std::size_t>(machine - 1) * intervals + x;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

}  // namespace

bool occupies(Seconds start, Seconds end, const Interval& interval) {
  if (start == end) return interval.start <= start && start < interval.end;
  return start < interval.end && end > interval.start;
}

std::optional<OverlapCase> classify_overlap(Seconds start, Seconds end,
                                            const Interval& interval) {
  if (end < start || !occupies(start, end, interval)) return std::nullopt;
  const Seconds tx = interval.start;
  const Seconds tx1 = interval.end;
  if (start >= tx && end <= tx1) return OverlapCase::kInside;
  if (start <= tx && end <= tx1) return OverlapCase::kStartsBefore;
  if (start >= tx && end >= tx1) return OverlapCase::kEndsAfter;
  return OverlapCase::kSpans;
}

Seconds overlap_runtime(Seconds start, Seconds end, const Interval& interval) {
  const auto overlap = classify_overlap(start, end, interval);
  if (!overlap) return 0;
  switch (*overlap) {
    case OverlapCase::kInside: return end - start;
    case OverlapCase::kStartsBefore: return end - interval.start;
    case OverlapCase::kEndsAfter: return interval.end - start;
    case OverlapCase::kSpans: return interval.end - interval.start;
  }
  return 0;
}

std::vector<std::int32_t> machine_cores(const TraceBundle& bundle,
                                        std::int32_t fallback) {
  std::vector<std::int32_t> cores(
      static_cast<std::size_t>(bundle.machine_count) + 1, 0);
  for (const auto& e : bundle.events) {
    if (e.type != MachineEventType::kAdd || e.cpu_count <= 0) continue;
    if (e.machine < 1 || e.machine > bundle.machine_count) continue;
    auto& c = cores[static_cast<std::size_t>(e.machine)];
    if (c == 0) c = e.cpu_count;
  }
  for (auto& c : cores) {
    if (c == 0) c = fallback;
  }
  return cores;
}

std::vector<ContainerAgg> aggregate_container_usage(
    const TraceBundle& bundle, const IntervalGrid& grid,
    AggregateDiagnostics* diagnostics) {
  AggregateDiagnostics local;
  auto& diag = diagnostics ? *diagnostics : local;
  const MachineId machines = bundle.machine_count;
  const std::size_t intervals = grid.interval_count();
  const auto cores = machine_cores(bundle);

  std::vector<ContainerAgg> aggs(static_cast<std::size_t>(machines) *
                                 intervals);
  for (MachineId m = 1; m <= machines; ++m) {
    for (std::size_t x = 0; x < intervals; ++x) {
      auto& a = aggs[slot(m, x, intervals)];
      a.machine = m;
      a.interval = grid.interval(x);
    }
  }

  std::unordered_map<InstanceId, ContainerInfo> containers;
  for (const auto& e : bundle.container_events) {
    if (e.machine < 1 || e.machine > machines) {
      ++diag.unknown_machine_records;
      continue;
    }
    if (!containers.emplace(e.instance, ContainerInfo{e.machine, e.cpu_req,
                                                      e.mem_req})
             .second) {
      continue;
    }
    // Containers are never destroyed: the life cycle runs from creation to
    // the end of the trace.
    for (std::size_t x = 0; x < intervals; ++x) {
      if (e.timestamp < grid.timestamp(x + 1)) {
        ++aggs[slot(e.machine, x, intervals)].container_count;
      }
    }
  }

  for (const auto& r : bundle.container_usage) {
    const auto it = containers.find(r.instance);
    if (it == containers.end()) {
      ++diag.unknown_instance_records;
      continue;
    }
    const auto x = grid.interval_of(r.timestamp);
    if (!x) {
      ++diag.off_grid_usage_records;
      continue;
    }
    const auto& info = it->second;
    auto& a = aggs[slot(info.machine, *x, intervals)];
    a.total_cpu += r.cpu_of_req * info.cpu_req /
                   cores[static_cast<std::size_t>(info.machine)];
    a.total_mem += r.mem_of_req * info.mem_req;
  }
  return aggs;
}

std::vector<BatchAgg> aggregate_batch_usage(const TraceBundle& bundle,
                                            const IntervalGrid& grid,
                                            BatchChargeMode mode,
                                            AggregateDiagnostics* diagnostics) {
  AggregateDiagnostics local;
  auto& diag = diagnostics ? *diagnostics : local;
  const MachineId machines = bundle.machine_count;
  const std::size_t intervals = grid.interval_count();
  const auto cores = machine_cores(bundle);

  std::vector<BatchAgg> aggs(static_cast<std::size_t>(machines) * intervals);
  for (MachineId m = 1; m <= machines; ++m) {
    for (std::size_t x = 0; x < intervals; ++x) {
      auto& a = aggs[slot(m, x, intervals)];
      a.machine = m;
      a.interval = grid.interval(x);
    }
  }

  for (const auto& b : bundle.batch_instances) {
    if (b.start <= 0 || b.end <= 0 || b.end < b.start) {
      ++diag.excluded_batch_instances;
      continue;
    }
    if (b.machine < 1 || b.machine > machines) {
      ++diag.unknown_machine_records;
      continue;
    }
    if (b.end < grid.start() || b.start >= grid.end()) continue;
    const std::size_t lo =
        b.start <= grid.start()
            ? 0
            : static_cast<std::size_t>((b.start - grid.start()) / grid.step());
    const std::size_t hi = std::min(
        intervals - 1,
        static_cast<std::size_t>((b.end - grid.start()) / grid.step()));
    const Seconds runtime = b.end - b.start;
    for (std::size_t x = lo; x <= hi; ++x) {
      const Interval interval = grid.interval(x);
      const auto overlap = classify_overlap(b.start, b.end, interval);
      if (!overlap) continue;
      auto& a = aggs[slot(b.machine, x, intervals)];
      ++a.batch_count;
      const Seconds rt = overlap_runtime(b.start, b.end, interval);
      double share = 0.0;
      if (mode == BatchChargeMode::kDurationWeighted) {
        share = static_cast<double>(rt) /
                static_cast<double>(interval.end - interval.start);
      } else if (*overlap == OverlapCase::kInside) {
        share = 1.0;
      } else if (runtime == 0) {
        ++diag.zero_runtime_partial_overlaps;
        continue;
      } else {
        share = static_cast<double>(rt) / static_cast<double>(runtime);
      }
      a.total_cpu_cores += share * b.avg_cpu;
      a.total_mem += share * b.avg_mem;
    }
  }

  for (auto& a : aggs) {
    a.total_cpu = a.total_cpu_cores / cores[static_cast<std::size_t>(a.machine)];
  }
  return aggs;
}

std::vector<MachineSeries> build_machine_series(
    const TraceBundle& bundle, const IntervalGrid& grid,
    const DenseUsage& usage, const std::vector<ContainerAgg>& container_aggs,
    const std::vector<BatchAgg>& batch_aggs) {
  const MachineId machines = bundle.machine_count;
  const std::size_t n = grid.interval_count();
  std::vector<MachineSeries> all(static_cast<std::size_t>(machines));
  for (MachineId m = 1; m <= machines; ++m) {
    auto& s = all[static_cast<std::size_t>(m - 1)];
    s.machine = m;
    s.cpu.assign(n, 0.0);
    s.mem.assign(n, 0.0);
    s.disk.assign(n, 0.0);
    s.container_count.assign(n, 0);
    s.batch_count.assign(n, 0);
    s.container_cpu.assign(n, 0.0);
    s.container_mem.assign(n, 0.0);
    s.batch_cpu.assign(n, 0.0);
    s.batch_mem.assign(n, 0.0);
    if (m > usage.machine_count() || !(usage.grid() == grid)) continue;
    for (std::size_t x = 0; x < n; ++x) {
      const auto mean = [&](UsageMetric metric) {
        return 0.5 * (usage.at(m, metric, x) + usage.at(m, metric, x + 1));
      };
      s.cpu[x] = mean(UsageMetric::kCpu);
      s.mem[x] = mean(UsageMetric::kMem);
      s.disk[x] = mean(UsageMetric::kDisk);
    }
  }
  for (const auto& a : container_aggs) {
    if (a.machine < 1 || a.machine > machines || a.interval.index >= n) continue;
    auto& s = all[static_cast<std::size_t>(a.machine - 1)];
    s.container_count[a.interval.index] = a.container_count;
    s.container_cpu[a.interval.index] = a.total_cpu;
    s.container_mem[a.interval.index] = a.total_mem;
  }
  for (const auto& a : batch_aggs) {
    if (a.machine < 1 || a.machine > machines || a.interval.index >= n) continue;
    auto& s = all[static_cast<std::size_t>(a.machine - 1)];
    s.batch_count[a.interval.index] = a.batch_count;
    s.batch_cpu[a.interval.index] = a.total_cpu;
    s.batch_mem[a.interval.index] = a.total_mem;
  }
  return all;
}

void write_container_level_csv(const std::vector<ContainerAgg>& aggs,
                               const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "machine,interval_start,interval_end,container_count,total_cpu,"
         "total_mem\n";
  for (const auto& a : aggs) {
    out << a.machine << ',' << a.interval.start << ',' << a.interval.end << ','
        << a.container_count << ',' << csv::format_double(a.total_cpu) << ','
        << csv::format_double(a.total_mem) << '\n';
  }
}

void write_batch_level_csv(const std::vector<BatchAgg>& aggs,
                           const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "machine,interval_start,interval_end,batch_count,total_cpu_cores,"
         "total_cpu,total_mem\n";
  for (const auto& a : aggs) {
    out << a.machine << ',' << a.interval.start << ',' << a.interval.end << ','
        << a.batch_count << ',' << csv::format_double(a.total_cpu_cores) << ','
        << csv::format_double(a.total_cpu) << ','
        << csv::format_double(a.total_mem) << '\n';
  }
}

void write_server_level_csv(const std::vector<MachineSeries>& series,
                            const IntervalGrid& grid,
                            const std::filesystem::path& path) {
  auto out = open_for_write(path);
  out << "machine,interval_start,interval_end,cpu,mem,disk,container_count,"
         "batch_count,container_cpu,container_mem,batch_cpu,batch_mem,"
         "residual_cpu,residual_mem\n";
  for (const auto& s : series) {
    for (std::size_t x = 0; x < s.interval_count(); ++x) {
      const auto i = grid.interval(x);
      out << s.machine << ',' << i.start << ',' << i.end << ','
          << csv::format_double(s.cpu[x]) << ','
          << csv::format_double(s.mem[x]) << ','
          << csv::format_double(s.disk[x]) << ',' << s.container_count[x]
          << ',' << s.batch_count[x] << ','
          << csv::format_double(s.container_cpu[x]) << ','
          << csv::format_double(s.container_mem[x]) << ','
          << csv::format_double(s.batch_cpu[x]) << ','
          << csv::format_double(s.batch_mem[x]) << ','
          << csv::format_double(s.cpu[x] - s.container_cpu[x] - s.batch_cpu[x])
          << ','
          << csv::format_double(s.mem[x] - s.container_mem[x] - s.batch_mem[x])
          << '\n';
    }
  }
}

}  // namespace trace_insight
