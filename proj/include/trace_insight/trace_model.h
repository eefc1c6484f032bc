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

// Schema of the six-file co-located cluster trace, the CSV reader/writer for
// it, and the uniform recording grid every later stage is keyed on.
//
// Unit convention: usage percentages are converted to fractions in [0, 1]
// when a file is read and back to percent when it is written. A missing
// server-usage metric (empty CSV field) is held as NaN.

#ifndef TRACE_INSIGHT_TRACE_MODEL_H_
#define TRACE_INSIGHT_TRACE_MODEL_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace trace_insight {

// 1-based machine id, in [1, machine_count].
using MachineId = std::int32_t;
// Seconds relative to the trace start. 0 means "before the trace period".
using Seconds = std::int64_t;
using InstanceId = std::int64_t;

// Raised for unrecoverable input problems (missing file, too many bad rows).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class MachineEventType { kAdd, kSoftError, kHardError };
enum class ContainerEventType { kCreate };
enum class BatchTaskStatus { kTerminated, kWaiting, kRunning, kFailed };
enum class BatchInstanceStatus {
  kReady,
  kWaiting,
  kRunning,
  kTerminated,
  kFailed,
  kCancelled,
  kInterrupted,
};

std::string_view to_string(MachineEventType type);
std::string_view to_string(ContainerEventType type);
std::string_view to_string(BatchTaskStatus status);
std::string_view to_string(BatchInstanceStatus status);

struct MachineEvent {
  Seconds timestamp = 0;
  MachineId machine = 0;
  MachineEventType type = MachineEventType::kAdd;
  std::string detail;
  std::int32_t cpu_count = 0;
  double norm_memory = 0.0;
  double norm_disk = 0.0;

  bool operator==(const MachineEvent&) const = default;
};

struct ServerUsageRecord {
  Seconds timestamp = 0;
  MachineId machine = 0;
  double cpu = 0.0;
  double mem = 0.0;
  double disk = 0.0;
  double load1 = 0.0;
  double load5 = 0.0;
  double load15 = 0.0;
};
bool operator==(const ServerUsageRecord& a, const ServerUsageRecord& b);

struct ContainerEvent {
  Seconds timestamp = 0;
  ContainerEventType type = ContainerEventType::kCreate;
  InstanceId instance = 0;
  MachineId machine = 0;
  double cpu_req = 0.0;
  double mem_req = 0.0;
  double disk_req = 0.0;
  std::vector<std::int32_t> cpu_set;

  bool operator==(const ContainerEvent&) const = default;
};

struct ContainerUsageRecord {
  Seconds timestamp = 0;
  InstanceId instance = 0;
  double cpu_of_req = 0.0;
  double mem_of_req = 0.0;
  double disk_of_req = 0.0;
  double disk = 0.0;
  double load1 = 0.0;
  double load5 = 0.0;
  double load15 = 0.0;
  double avg_cpi = 0.0;
  double avg_mpki = 0.0;
  double max_cpi = 0.0;
  double max_mpki = 0.0;

  bool operator==(const ContainerUsageRecord&) const = default;
};

struct BatchTaskRecord {
  Seconds create_time = 0;
  Seconds end_time = 0;
  std::int64_t job = 0;
  std::int64_t task = 0;
  std::int64_t instance_count = 1;
  BatchTaskStatus status = BatchTaskStatus::kTerminated;
  double cpu_req = 0.0;
  double mem_req = 0.0;

  bool operator==(const BatchTaskRecord&) const = default;
};

struct BatchInstanceRecord {
  Seconds start = 0;
  Seconds end = 0;
  std::int64_t job = 0;
  std::int64_t task = 0;
  MachineId machine = 0;
  BatchInstanceStatus status = BatchInstanceStatus::kTerminated;
  std::int32_t seq_no = 1;
  std::int32_t total_seq_no = 1;
  double max_cpu = 0.0;
  double avg_cpu = 0.0;
  double max_mem = 0.0;
  double avg_mem = 0.0;

  bool operator==(const BatchInstanceRecord&) const = default;
};

enum class UsageMetric { kCpu, kMem, kDisk, kLoad1, kLoad5, kLoad15 };
inline constexpr std::array<UsageMetric, 6> kAllUsageMetrics = {
    UsageMetric::kCpu,   UsageMetric::kMem,   UsageMetric::kDisk,
    UsageMetric::kLoad1, UsageMetric::kLoad5, UsageMetric::kLoad15};
std::string_view to_string(UsageMetric metric);
std::optional<UsageMetric> parse_usage_metric(std::string_view name);
double& metric_value(ServerUsageRecord& record, UsageMetric metric);
double metric_value(const ServerUsageRecord& record, UsageMetric metric);

enum class RepairMethod { kInterpolated, kZeroFilled, kBoundaryHeld };
std::string_view to_string(RepairMethod method);

// One synthesized value in the dense usage table.
struct RepairAnnotation {
  MachineId machine = 0;
  UsageMetric metric = UsageMetric::kCpu;
  Seconds timestamp = 0;
  RepairMethod method = RepairMethod::kInterpolated;
  double value = 0.0;

  bool operator==(const RepairAnnotation&) const = default;
};

struct TraceBundle {
  std::vector<MachineEvent> events;
  std::vector<ServerUsageRecord> server_usage;
  std::vector<ContainerEvent> container_events;
  std::vector<ContainerUsageRecord> container_usage;
  std::vector<BatchTaskRecord> batch_tasks;
  std::vector<BatchInstanceRecord> batch_instances;
  MachineId machine_count = 0;
  std::vector<RepairAnnotation> repair_log;

  bool operator==(const TraceBundle&) const = default;
};

enum class TraceFile {
  kServerEvent,
  kServerUsage,
  kContainerEvent,
  kContainerUsage,
  kBatchTask,
  kBatchInstance,
};
inline constexpr std::array<TraceFile, 6> kAllTraceFiles = {
    TraceFile::kServerEvent,    TraceFile::kServerUsage,
    TraceFile::kContainerEvent, TraceFile::kContainerUsage,
    TraceFile::kBatchTask,      TraceFile::kBatchInstance};
std::string_view default_file_name(TraceFile file);
// Number of logical fields per file.
std::size_t field_count(TraceFile file);

// Maps each logical field (in the order listed on the record structs above)
// to a CSV column index. The standard profile is the identity mapping.
class SchemaProfile {
 public:
  static SchemaProfile standard();

  // Throws std::invalid_argument unless `columns` has one distinct
  // non-negative entry per logical field.
  void set_columns(TraceFile file, std::vector<int> columns);
  const std::vector<int>& columns(TraceFile file) const {
    return columns_[static_cast<std::size_t>(file)];
  }
  // Width of a row: one past the largest mapped column.
  std::size_t row_width(TraceFile file) const;

 private:
  std::array<std::vector<int>, 6> columns_;
};

struct TraceIoOptions {
  SchemaProfile profile = SchemaProfile::standard();
  std::array<std::string, 6> file_names = {
      "server_event.csv",    "server_usage.csv", "container_event.csv",
      "container_usage.csv", "batch_task.csv",   "batch_instance.csv"};
  bool has_header = false;
  // A file whose rejected-row ratio exceeds this fails the whole parse.
  double max_skip_ratio = 0.01;

  const std::string& file_name(TraceFile file) const {
    return file_names[static_cast<std::size_t>(file)];
  }
};

struct RowDiagnostic {
  TraceFile file = TraceFile::kServerEvent;
  std::size_t line = 0;
  std::string message;
};

// Reads the six trace files in `dir`. Rejected rows are reported through
// `diagnostics` when non-null. Throws ParseError for a missing file or when a
// file's skip ratio exceeds the configured bound.
TraceBundle parse_trace_dir(const std::filesystem::path& dir,
                            const TraceIoOptions& options = {},
                            std::vector<RowDiagnostic>* diagnostics = nullptr);

// Row-level parsers, exposed for tests and for the CLI's dense-table reader.
// Each returns nullopt and fills `error` on a malformed or invalid row.
std::optional<MachineEvent> parse_machine_event(
    const std::vector<std::string_view>& fields, std::string* error);
std::optional<ServerUsageRecord> parse_server_usage(
    const std::vector<std::string_view>& fields, std::string* error);
std::optional<ContainerEvent> parse_container_event(
    const std::vector<std::string_view>& fields, std::string* error);
std::optional<ContainerUsageRecord> parse_container_usage(
    const std::vector<std::string_view>& fields, std::string* error);
std::optional<BatchTaskRecord> parse_batch_task(
    const std::vector<std::string_view>& fields, std::string* error);
std::optional<BatchInstanceRecord> parse_batch_instance(
    const std::vector<std::string_view>& fields, std::string* error);

// Logical field values of a record as CSV text, in canonical field order.
std::vector<std::string> format_fields(const MachineEvent& r);
std::vector<std::string> format_fields(const ServerUsageRecord& r);
std::vector<std::string> format_fields(const ContainerEvent& r);
std::vector<std::string> format_fields(const ContainerUsageRecord& r);
std::vector<std::string> format_fields(const BatchTaskRecord& r);
std::vector<std::string> format_fields(const BatchInstanceRecord& r);

// Writes the bundle as six CSV files laid out by `options.profile`.
void write_trace_dir(const TraceBundle& bundle,
                     const std::filesystem::path& dir,
                     const TraceIoOptions& options = {});

struct Interval {
  std::size_t index = 0;
  Seconds start = 0;
  Seconds end = 0;

  bool operator==(const Interval&) const = default;
};

// Timestamps t_x = start + x * step for x = 0..N, intervals I_x = [t_x,
// t_{x+1}] for x = 0..N-1, N = (end - start) / step.
class IntervalGrid {
 public:
  IntervalGrid() = default;
  // Throws std::invalid_argument when end <= start, step <= 0, or the span is
  // not a multiple of step.
  IntervalGrid(Seconds start, Seconds end, Seconds step);

  Seconds start() const { return start_; }
  Seconds end() const { return end_; }
  Seconds step() const { return step_; }
  std::size_t interval_count() const {
    return static_cast<std::size_t>((end_ - start_) / step_);
  }
  std::size_t timestamp_count() const { return interval_count() + 1; }
  Seconds timestamp(std::size_t x) const {
    return start_ + static_cast<Seconds>(x) * step_;
  }
  Interval interval(std::size_t x) const {
    return {x, timestamp(x), timestamp(x + 1)};
  }

  // Sample slot x such that t_x <= ts < t_x + step, for x in [0, N].
  std::optional<std::size_t> sample_slot(Seconds ts) const;
  // Interval x such that t_x <= ts < t_{x+1}, for x in [0, N).
  std::optional<std::size_t> interval_of(Seconds ts) const;

  bool operator==(const IntervalGrid&) const = default;

 private:
  Seconds start_ = 0;
  Seconds end_ = 1;
  Seconds step_ = 1;
};

IntervalGrid build_interval_grid(Seconds start, Seconds end, Seconds step);

struct ValidationReport {
  // Machines in [1, machine_count] without a single server_usage row.
  std::vector<MachineId> machines_without_usage;
  // Machines with at least one row but fewer occupied sample slots than the
  // grid has timestamps, with their occupied-slot count.
  std::vector<std::pair<MachineId, std::size_t>> undersampled_machines;
  // Instance ids carrying more than one container event.
  std::vector<InstanceId> duplicated_container_instances;
  // Indices into batch_instances whose start or end timestamp is 0.
  std::vector<std::size_t> zero_timestamp_batch_instances;

  bool empty() const {
    return machines_without_usage.empty() && undersampled_machines.empty() &&
           duplicated_container_instances.empty() &&
           zero_timestamp_batch_instances.empty();
  }
  bool operator==(const ValidationReport&) const = default;
};

ValidationReport validate_bundle(const TraceBundle& bundle,
                                 const IntervalGrid& grid);

// CSV text helpers shared by every writer in the toolkit.
namespace csv {
std::vector<std::string_view> split(std::string_view line, char sep = ',');
// Shortest representation that parses back to the same double.
std::string format_double(double value);
// Fraction written as a percent with 15 significant digits; reproduces the
// source text of any percent that had at most 15 significant digits.
std::string format_percent(double fraction);
std::optional<double> parse_double(std::string_view text);
std::optional<std::int64_t> parse_int(std::string_view text);
std::string join(const std::vector<std::string>& fields, char sep = ',');
}  // namespace csv

}  // namespace trace_insight

#endif  // TRACE_INSIGHT_TRACE_MODEL_H_
