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

#include "trace_insight/preprocess.h"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <string>

namespace trace_insight {

double interpolate_gap(const GapSpec& gap) {
  if (gap.span_count < 3) {
    throw std::invalid_argument("gap span must hold at least one missing sample");
  }
  if (gap.missing_index < 1 || gap.missing_index > gap.span_count - 2) {
    throw std::invalid_argument("missing index outside the gap");
  }
  const double rake_ratio =
      (gap.right_value - gap.left_value) / (gap.span_count - 1);
  return gap.left_value + rake_ratio * gap.missing_index;
}

DenseUsage::DenseUsage(MachineId machine_count, const IntervalGrid& grid)
    : machine_count_(machine_count),
      grid_(grid),
      values_(static_cast<std::size_t>(machine_count) *
                  kAllUsageMetrics.size() * grid.timestamp_count(),
              std::numeric_limits<double>::quiet_NaN()) {}

SupplementResult supplement_server_usage(const TraceBundle& bundle,
                                         const IntervalGrid& grid,
                                         BoundaryPolicy boundary) {
  const MachineId machines = bundle.machine_count;
  const std::size_t slots = grid.timestamp_count();
  constexpr std::size_t kMetrics = kAllUsageMetrics.size();

  SupplementResult result{DenseUsage(machines, grid), {}};
  // Per (machine, metric, slot): sum and count of observed values.
  std::vector<double> sum(static_cast<std::size_t>(machines) * kMetrics * slots,
                          0.0);
  std::vector<std::uint32_t> count(sum.size(), 0);
  std::vector<bool> has_rows(static_cast<std::size_t>(machines) + 1, false);
  const auto cell = [&](MachineId m, std::size_t k, std::size_t x) {
    return (static_cast<std::size_t>(m - 1) * kMetrics + k) * slots + x;
  };

  for (const auto& r : bundle.server_usage) {
    if (r.machine < 1 || r.machine > machines) continue;
    has_rows[static_cast<std::size_t>(r.machine)] = true;
    const auto x = grid.sample_slot(r.timestamp);
    if (!x) continue;
    for (std::size_t k = 0; k < kMetrics; ++k) {
      const double v = metric_value(r, kAllUsageMetrics[k]);
      if (std::isnan(v)) continue;
      sum[cell(r.machine, k, *x)] += v;
      ++count[cell(r.machine, k, *x)];
    }
  }

  auto& dense = result.usage;
  auto& repairs = result.repairs;
  for (MachineId m = 1; m <= machines; ++m) {
    for (std::size_t k = 0; k < kMetrics; ++k) {
      const UsageMetric metric = kAllUsageMetrics[k];
      std::vector<std::size_t> observed;
      for (std::size_t x = 0; x < slots; ++x) {
        const auto c = count[cell(m, k, x)];
        if (c == 0) continue;
        dense.at(m, metric, x) = sum[cell(m, k, x)] / c;
        observed.push_back(x);
      }

      if (observed.empty()) {
        for (std::size_t x = 0; x < slots; ++x) {
          dense.at(m, metric, x) = 0.0;
          repairs.push_back({m, metric, grid.timestamp(x),
                             RepairMethod::kZeroFilled, 0.0});
        }
        continue;
      }

      const auto annotate = [&](std::size_t x, RepairMethod method) {
        repairs.push_back(
            {m, metric, grid.timestamp(x), method, dense.at(m, metric, x)});
      };

      const std::size_t first = observed.front();
      const std::size_t last = observed.back();
      if (boundary == BoundaryPolicy::kHold) {
        for (std::size_t x = 0; x < first; ++x) {
          dense.at(m, metric, x) = dense.at(m, metric, first);
          annotate(x, RepairMethod::kBoundaryHeld);
        }
      }
      for (std::size_t i = 0; i + 1 < observed.size(); ++i) {
        const std::size_t left = observed[i];
        const std::size_t right = observed[i + 1];
        if (right - left < 2) continue;
        GapSpec gap{dense.at(m, metric, left), dense.at(m, metric, right),
                    static_cast<int>(right - left + 1), 0};
        for (std::size_t x = left + 1; x < right; ++x) {
          gap.missing_index = static_cast<int>(x - left);
          dense.at(m, metric, x) = interpolate_gap(gap);
          annotate(x, RepairMethod::kInterpolated);
        }
      }
      if (boundary == BoundaryPolicy::kHold) {
        for (std::size_t x = last + 1; x < slots; ++x) {
          dense.at(m, metric, x) = dense.at(m, metric, last);
          annotate(x, RepairMethod::kBoundaryHeld);
        }
      }
    }
  }
  return result;
}

ContainerFilterResult filter_container_events(
    const std::vector<ContainerEvent>& events, double max_mem_req) {
  std::map<InstanceId, std::vector<std::size_t>> by_instance;
  for (std::size_t i = 0; i < events.size(); ++i) {
    by_instance[events[i].instance].push_back(i);
  }

  std::vector<bool> keep(events.size(), true);
  for (const auto& [instance, rows] : by_instance) {
    if (rows.size() == 1) continue;
    std::size_t survivors = 0;
    for (auto i : rows) {
      if (events[i].mem_req > max_mem_req) {
        keep[i] = false;
      } else {
        ++survivors;
      }
    }
    if (survivors != 1) {
      throw FilterError("container instance " + std::to_string(instance) +
                        " has " + std::to_string(rows.size()) +
                        " create records and " + std::to_string(survivors) +
                        " survive the memory-request rule");
    }
  }

  ContainerFilterResult result;
  for (std::size_t i = 0; i < events.size(); ++i) {
    (keep[i] ? result.clean : result.removed).push_back(events[i]);
  }
  return result;
}

void write_dense_usage_csv(const DenseUsage& usage,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "machine,timestamp,cpu,mem,disk,load1,load5,load15\n";
  const auto& grid = usage.grid();
  for (MachineId m = 1; m <= usage.machine_count(); ++m) {
    for (std::size_t x = 0; x < grid.timestamp_count(); ++x) {
      out << m << ',' << grid.timestamp(x);
      for (auto metric : kAllUsageMetrics) {
        const double v = usage.at(m, metric, x);
        out << ',';
        if (!std::isnan(v)) out << csv::format_double(v);
      }
      out << '\n';
    }
  }
}

DenseUsage read_dense_usage_csv(const std::filesystem::path& path,
                                MachineId machine_count,
                                const IntervalGrid& grid) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  DenseUsage usage(machine_count, grid);
  std::vector<bool> seen(static_cast<std::size_t>(machine_count) *
                             grid.timestamp_count(),
                         false);
  std::string line;
  std::getline(in, line);  // header
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = csv::split(line);
    const auto where = path.string() + ":" + std::to_string(line_no);
    if (fields.size() != 8) throw ParseError(where + ": expected 8 columns");
    const auto m = csv::parse_int(fields[0]);
    const auto ts = csv::parse_int(fields[1]);
    if (!m || !ts || *m < 1 || *m > machine_count) {
      throw ParseError(where + ": bad machine or timestamp");
    }
    const auto x = grid.sample_slot(*ts);
    if (!x || grid.timestamp(*x) != *ts) {
      throw ParseError(where + ": timestamp is not on the grid");
    }
    for (std::size_t k = 0; k < kAllUsageMetrics.size(); ++k) {
      const auto text = fields[2 + k];
      double v = std::numeric_limits<double>::quiet_NaN();
      if (!text.empty()) {
        auto parsed = csv::parse_double(text);
        if (!parsed) throw ParseError(where + ": bad value");
        v = *parsed;
      }
      usage.at(static_cast<MachineId>(*m), kAllUsageMetrics[k], *x) = v;
    }
    seen[static_cast<std::size_t>(*m - 1) * grid.timestamp_count() + *x] =
        true;
  }
  for (bool s : seen) {
    if (!s) throw ParseError(path.string() + ": dense table has holes");
  }
  return usage;
}

void write_repair_log_csv(const std::vector<RepairAnnotation>& repairs,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "machine,metric,timestamp,method,value\n";
  for (const auto& r : repairs) {
    out << r.machine << ',' << to_string(r.metric) << ',' << r.timestamp << ','
        << to_string(r.method) << ',' << csv::format_double(r.value) << '\n';
  }
}

}  // namespace trace_insight
