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

#include "trace_insight/trace_model.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace trace_insight {
namespace {

constexpr double kMemReqTolerance = 1e-4;
constexpr double kAvgCpuTolerance = 1e-3;

const std::array<std::vector<std::string>, 6> kFieldNames = {{
    {"timestamp", "machine_id", "event_type", "event_detail", "cpu_count",
     "normalized_memory", "normalized_disk"},
    {"timestamp", "machine_id", "cpu_pct", "mem_pct", "disk_pct", "load1",
     "load5", "load15"},
    {"timestamp", "event_type", "instance_id", "machine_id", "cpu_req",
     "mem_req", "disk_req", "cpu_set"},
    {"timestamp", "instance_id", "cpu_pct_of_req", "mem_pct_of_req",
     "disk_pct_of_req", "disk_pct", "load1", "load5", "load15", "avg_cpi",
     "avg_mpki", "max_cpi", "max_mpki"},
    {"create_time", "end_time", "job_id", "task_id", "instance_count",
     "status", "cpu_req", "mem_req"},
    {"start_time", "end_time", "job_id", "task_id", "machine_id", "status",
     "seq_no", "total_seq_no", "max_cpu", "avg_cpu", "max_mem", "avg_mem"},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() &&
         (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto lower = [](char c) {
      return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
    };
    if (lower(a[i]) != lower(b[i])) return false;
  }
  return true;
}

// Field readers. Each returns false and sets `error` on failure.
class FieldReader {
 public:
  FieldReader(const std::vector<std::string_view>& fields, std::string* error)
      : fields_(fields), error_(error) {}

  bool ok() const { return ok_; }

  bool present(std::size_t i) const {
    return i < fields_.size() && !trim(fields_[i]).empty();
  }

  std::int64_t integer(std::size_t i, const char* name) {
    if (!ok_) return 0;
    auto v = i < fields_.size() ? csv::parse_int(fields_[i]) : std::nullopt;
    if (!v) return fail(name, "is not an integer"), 0;
    return *v;
  }

  double real(std::size_t i, const char* name) {
    if (!ok_) return 0.0;
    auto v = i < fields_.size() ? csv::parse_double(fields_[i]) : std::nullopt;
    if (!v || !std::isfinite(*v)) return fail(name, "is not a number"), 0.0;
    return *v;
  }

  // Empty field maps to `fallback`.
  double real_or(std::size_t i, const char* name, double fallback) {
    return present(i) ? real(i, name) : fallback;
  }

  double percent_or_missing(std::size_t i, const char* name) {
    if (!present(i)) return std::nan("");
    const double p = real(i, name);
    if (ok_ && (p < 0.0 || p > 100.0)) fail(name, "is outside [0, 100]");
    return p / 100.0;
  }

  double percent(std::size_t i, const char* name) {
    const double p = real(i, name);
    if (ok_ && (p < 0.0 || p > 100.0)) fail(name, "is outside [0, 100]");
    return p / 100.0;
  }

  void check(bool condition, const char* name, const char* what) {
    if (ok_ && !condition) fail(name, what);
  }

  std::string_view text(std::size_t i) const {
    return i < fields_.size() ? trim(fields_[i]) : std::string_view{};
  }

  void fail(const char* name, const char* what) {
    if (!ok_) return;
    ok_ = false;
    if (error_) *error_ = std::string(name) + " " + what;
  }

 private:
  const std::vector<std::string_view>& fields_;
  std::string* error_;
  bool ok_ = true;
};

bool parse_enum(std::string_view text, MachineEventType* out) {
  for (auto t : {MachineEventType::kAdd, MachineEventType::kSoftError,
                 MachineEventType::kHardError}) {
    if (iequals(text, to_string(t))) return *out = t, true;
  }
  return false;
}

bool parse_enum(std::string_view text, BatchTaskStatus* out) {
  for (auto s : {BatchTaskStatus::kTerminated, BatchTaskStatus::kWaiting,
                 BatchTaskStatus::kRunning, BatchTaskStatus::kFailed}) {
    if (iequals(text, to_string(s))) return *out = s, true;
  }
  return false;
}

bool parse_enum(std::string_view text, BatchInstanceStatus* out) {
  for (auto s :
       {BatchInstanceStatus::kReady, BatchInstanceStatus::kWaiting,
        BatchInstanceStatus::kRunning, BatchInstanceStatus::kTerminated,
        BatchInstanceStatus::kFailed, BatchInstanceStatus::kCancelled,
        BatchInstanceStatus::kInterrupted}) {
    if (iequals(text, to_string(s))) return *out = s, true;
  }
  // Spelling used by the public trace's schema notes.
  if (iequals(text, "Interupted")) {
    return *out = BatchInstanceStatus::kInterrupted, true;
  }
  return false;
}

std::string fmt_int(std::int64_t v) { return std::to_string(v); }

std::string fmt_optional_double(double v) {
  return std::isnan(v) ? std::string() : csv::format_double(v);
}

std::string fmt_optional_percent(double v) {
  return std::isnan(v) ? std::string() : csv::format_percent(v);
}

bool same_value(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename Record, typename Parser>
std::vector<Record> parse_file(const std::filesystem::path& dir,
                               TraceFile file, const TraceIoOptions& options,
                               Parser parser,
                               std::vector<RowDiagnostic>* diagnostics) {
  const auto path = dir / options.file_name(file);
  if (!std::filesystem::exists(path)) {
    throw ParseError("missing trace file " + path.string());
  }
  const std::string content = read_file(path);
  const auto& columns = options.profile.columns(file);
  const std::size_t width = options.profile.row_width(file);

  std::vector<Record> records;
  std::size_t rows = 0;
  std::size_t rejected = 0;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  std::vector<std::string_view> logical(columns.size());
  while (pos < content.size()) {
    std::size_t eol = content.find('\n', pos);
    if (eol == std::string::npos) eol = content.size();
    std::string_view line(content.data() + pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (line_no == 1 && options.has_header) continue;
    if (trim(line).empty()) continue;
    ++rows;

    const auto raw = csv::split(line);
    std::string error;
    std::optional<Record> record;
    if (raw.size() < width) {
      error = "expected " + std::to_string(width) + " columns, got " +
              std::to_string(raw.size());
    } else {
      for (std::size_t f = 0; f < columns.size(); ++f) {
        logical[f] = raw[static_cast<std::size_t>(columns[f])];
      }
      record = parser(logical, &error);
    }
    if (record) {
      records.push_back(std::move(*record));
    } else {
      ++rejected;
      if (diagnostics) diagnostics->push_back({file, line_no, error});
    }
  }
  if (rows > 0 &&
      static_cast<double>(rejected) / static_cast<double>(rows) >
          options.max_skip_ratio) {
    throw ParseError(options.file_name(file) + ": rejected " +
                     std::to_string(rejected) + " of " + std::to_string(rows) +
                     " rows, above the configured skip ratio");
  }
  return records;
}

template <typename Record>
void write_file(const std::filesystem::path& dir, TraceFile file,
                const TraceIoOptions& options,
                const std::vector<Record>& records) {
  const auto path = dir / options.file_name(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  const auto& columns = options.profile.columns(file);
  std::vector<std::string> row(options.profile.row_width(file));
  if (options.has_header) {
    std::fill(row.begin(), row.end(), std::string());
    const auto& names = kFieldNames[static_cast<std::size_t>(file)];
    for (std::size_t f = 0; f < columns.size(); ++f) {
      row[static_cast<std::size_t>(columns[f])] = names[f];
    }
    out << csv::join(row) << '\n';
  }
  for (const auto& record : records) {
    std::fill(row.begin(), row.end(), std::string());
    auto fields = format_fields(record);
    for (std::size_t f = 0; f < columns.size(); ++f) {
      row[static_cast<std::size_t>(columns[f])] = std::move(fields[f]);
    }
    out << csv::join(row) << '\n';
  }
}

}  // namespace

std::string_view to_string(MachineEventType type) {
  switch (type) {
    case MachineEventType::kAdd: return "add";
    case MachineEventType::kSoftError: return "softerror";
    case MachineEventType::kHardError: return "harderror";
  }
  return "?";
}

std::string_view to_string(ContainerEventType) { return "Create"; }

std::string_view to_string(BatchTaskStatus status) {
  switch (status) {
    case BatchTaskStatus::kTerminated: return "Terminated";
    case BatchTaskStatus::kWaiting: return "Waiting";
    case BatchTaskStatus::kRunning: return "Running";
    case BatchTaskStatus::kFailed: return "Failed";
  }
  return "?";
}

std::string_view to_string(BatchInstanceStatus status) {
  switch (status) {
    case BatchInstanceStatus::kReady: return "Ready";
    case BatchInstanceStatus::kWaiting: return "Waiting";
    case BatchInstanceStatus::kRunning: return "Running";
    case BatchInstanceStatus::kTerminated: return "Terminated";
    case BatchInstanceStatus::kFailed: return "Failed";
    case BatchInstanceStatus::kCancelled: return "Cancelled";
    case BatchInstanceStatus::kInterrupted: return "Interrupted";
  }
  return "?";
}

std::string_view to_string(UsageMetric metric) {
  switch (metric) {
    case UsageMetric::kCpu: return "cpu";
    case UsageMetric::kMem: return "mem";
    case UsageMetric::kDisk: return "disk";
    case UsageMetric::kLoad1: return "load1";
    case UsageMetric::kLoad5: return "load5";
    case UsageMetric::kLoad15: return "load15";
  }
  return "?";
}

std::optional<UsageMetric> parse_usage_metric(std::string_view name) {
  for (auto m : kAllUsageMetrics) {
    if (iequals(name, to_string(m))) return m;
  }
  return std::nullopt;
}

double& metric_value(ServerUsageRecord& r, UsageMetric metric) {
  switch (metric) {
    case UsageMetric::kCpu: return r.cpu;
    case UsageMetric::kMem: return r.mem;
    case UsageMetric::kDisk: return r.disk;
    case UsageMetric::kLoad1: return r.load1;
    case UsageMetric::kLoad5: return r.load5;
    case UsageMetric::kLoad15: return r.load15;
  }
  return r.cpu;
}

double metric_value(const ServerUsageRecord& r, UsageMetric metric) {
  return metric_value(const_cast<ServerUsageRecord&>(r), metric);
}

std::string_view to_string(RepairMethod method) {
  switch (method) {
    case RepairMethod::kInterpolated: return "Interpolated";
    case RepairMethod::kZeroFilled: return "ZeroFilled";
    case RepairMethod::kBoundaryHeld: return "BoundaryHeld";
  }
  return "?";
}

bool operator==(const ServerUsageRecord& a, const ServerUsageRecord& b) {
  return a.timestamp == b.timestamp && a.machine == b.machine &&
         same_value(a.cpu, b.cpu) && same_value(a.mem, b.mem) &&
         same_value(a.disk, b.disk) && same_value(a.load1, b.load1) &&
         same_value(a.load5, b.load5) && same_value(a.load15, b.load15);
}

std::string_view default_file_name(TraceFile file) {
  return TraceIoOptions{}.file_name(file);
}

std::size_t field_count(TraceFile file) {
  return kFieldNames[static_cast<std::size_t>(file)].size();
}

SchemaProfile SchemaProfile::standard() {
  SchemaProfile profile;
  for (auto file : kAllTraceFiles) {
    std::vector<int> identity(field_count(file));
    for (std::size_t i = 0; i < identity.size(); ++i) {
      identity[i] = static_cast<int>(i);
    }
    profile.columns_[static_cast<std::size_t>(file)] = std::move(identity);
  }
  return profile;
}

void SchemaProfile::set_columns(TraceFile file, std::vector<int> columns) {
  if (columns.size() != field_count(file)) {
    throw std::invalid_argument("column map for " +
                                std::string(default_file_name(file)) +
                                " needs " + std::to_string(field_count(file)) +
                                " entries");
  }
  std::set<int> seen;
  for (int c : columns) {
    if (c < 0 || !seen.insert(c).second) {
      throw std::invalid_argument("column map entries must be distinct and >= 0");
    }
  }
  columns_[static_cast<std::size_t>(file)] = std::move(columns);
}

std::size_t SchemaProfile::row_width(TraceFile file) const {
  const auto& cols = columns(file);
  return static_cast<std::size_t>(*std::max_element(cols.begin(), cols.end())) +
         1;
}

std::optional<MachineEvent> parse_machine_event(
    const std::vector<std::string_view>& fields, std::string* error) {
  FieldReader in(fields, error);
  MachineEvent e;
  e.timestamp = in.integer(0, "timestamp");
  e.machine = static_cast<MachineId>(in.integer(1, "machine_id"));
  if (in.ok() && !parse_enum(in.text(2), &e.type)) {
    in.fail("event_type", "is not add/softerror/harderror");
  }
  e.detail = std::string(in.text(3));
  e.cpu_count = static_cast<std::int32_t>(
      in.present(4) ? in.integer(4, "cpu_count") : 0);
  e.norm_memory = in.real_or(5, "normalized_memory", 0.0);
  e.norm_disk = in.real_or(6, "normalized_disk", 0.0);
  in.check(e.timestamp >= 0, "timestamp", "is negative");
  in.check(e.machine >= 1, "machine_id", "is below 1");
  in.check(e.cpu_count >= 0, "cpu_count", "is negative");
  in.check(e.norm_memory >= 0.0 && e.norm_memory <= 1.0, "normalized_memory",
           "is outside [0, 1]");
  in.check(e.norm_disk >= 0.0 && e.norm_disk <= 1.0, "normalized_disk",
           "is outside [0, 1]");
  if (!in.ok()) return std::nullopt;
  return e;
}

std::optional<ServerUsageRecord> parse_server_usage(
    const std::vector<std::string_view>& fields, std::string* error) {
  FieldReader in(fields, error);
  ServerUsageRecord r;
  r.timestamp = in.integer(0, "timestamp");
  r.machine = static_cast<MachineId>(in.integer(1, "machine_id"));
  r.cpu = in.percent_or_missing(2, "cpu_pct");
  r.mem = in.percent_or_missing(3, "mem_pct");
  r.disk = in.percent_or_missing(4, "disk_pct");
  r.load1 = in.present(5) ? in.real(5, "load1") : std::nan("");
  r.load5 = in.present(6) ? in.real(6, "load5") : std::nan("");
  r.load15 = in.present(7) ? in.real(7, "load15") : std::nan("");
  in.check(r.timestamp >= 0, "timestamp", "is negative");
  in.check(r.machine >= 1, "machine_id", "is below 1");
  in.check(!(r.load1 < 0.0 || r.load5 < 0.0 || r.load15 < 0.0), "load",
           "is negative");
  if (!in.ok()) return std::nullopt;
  return r;
}

std::optional<ContainerEvent> parse_container_event(
    const std::vector<std::string_view>& fields, std::string* error) {
  FieldReader in(fields, error);
  ContainerEvent e;
  e.timestamp = in.integer(0, "timestamp");
  if (in.ok() && !iequals(in.text(1), "create")) {
    in.fail("event_type", "is not Create");
  }
  e.instance = in.integer(2, "instance_id");
  e.machine = static_cast<MachineId>(in.integer(3, "machine_id"));
  e.cpu_req = in.real(4, "cpu_req");
  e.mem_req = in.real(5, "mem_req");
  e.disk_req = in.real_or(6, "disk_req", 0.0);
  if (in.ok() && in.present(7)) {
    for (auto id : csv::split(in.text(7), '|')) {
      auto v = csv::parse_int(id);
      if (!v) {
        in.fail("cpu_set", "holds a non-integer core id");
        break;
      }
      e.cpu_set.push_back(static_cast<std::int32_t>(*v));
    }
  }
  in.check(e.timestamp >= 0, "timestamp", "is negative");
  in.check(e.machine >= 1, "machine_id", "is below 1");
  in.check(e.cpu_req > 0.0, "cpu_req", "is not positive");
  in.check(e.mem_req > 0.0 && e.mem_req <= 1.0 + kMemReqTolerance, "mem_req",
           "is outside (0, 1]");
  in.check(e.disk_req >= 0.0 && e.disk_req <= 1.0, "disk_req",
           "is outside [0, 1]");
  if (!in.ok()) return std::nullopt;
  return e;
}

std::optional<ContainerUsageRecord> parse_container_usage(
    const std::vector<std::string_view>& fields, std::string* error) {
  FieldReader in(fields, error);
  ContainerUsageRecord r;
  r.timestamp = in.integer(0, "timestamp");
  r.instance = in.integer(1, "instance_id");
  r.cpu_of_req = in.percent(2, "cpu_pct_of_req");
  r.mem_of_req = in.percent(3, "mem_pct_of_req");
  r.disk_of_req = in.percent(4, "disk_pct_of_req");
  r.disk = in.percent(5, "disk_pct");
  r.load1 = in.real(6, "load1");
  r.load5 = in.real(7, "load5");
  r.load15 = in.real(8, "load15");
  r.avg_cpi = in.real(9, "avg_cpi");
  r.avg_mpki = in.real(10, "avg_mpki");
  r.max_cpi = in.real(11, "max_cpi");
  r.max_mpki = in.real(12, "max_mpki");
  in.check(r.timestamp >= 0, "timestamp", "is negative");
  in.check(r.load1 >= 0.0 && r.load5 >= 0.0 && r.load15 >= 0.0, "load",
           "is negative");
  in.check(r.avg_cpi >= 0.0 && r.avg_mpki >= 0.0 && r.max_cpi >= 0.0 &&
               r.max_mpki >= 0.0,
           "performance counter", "is negative");
  if (!in.ok()) return std::nullopt;
  return r;
}

std::optional<BatchTaskRecord> parse_batch_task(
    const std::vector<std::string_view>& fields, std::string* error) {
  FieldReader in(fields, error);
  BatchTaskRecord r;
  r.create_time = in.integer(0, "create_time");
  r.end_time = in.integer(1, "end_time");
  r.job = in.integer(2, "job_id");
  r.task = in.integer(3, "task_id");
  r.instance_count = in.integer(4, "instance_count");
  if (in.ok() && !parse_enum(in.text(5), &r.status)) {
    in.fail("status", "is not a batch task status");
  }
  r.cpu_req = in.real_or(6, "cpu_req", 0.0);
  r.mem_req = in.real_or(7, "mem_req", 0.0);
  in.check(r.create_time >= 0 && r.end_time >= 0, "timestamp", "is negative");
  in.check(r.instance_count >= 1, "instance_count", "is below 1");
  in.check(r.cpu_req >= 0.0 && r.mem_req >= 0.0, "request", "is negative");
  if (!in.ok()) return std::nullopt;
  return r;
}

std::optional<BatchInstanceRecord> parse_batch_instance(
    const std::vector<std::string_view>& fields, std::string* error) {
  FieldReader in(fields, error);
  BatchInstanceRecord r;
  r.start = in.integer(0, "start_time");
  r.end = in.integer(1, "end_time");
  r.job = in.integer(2, "job_id");
  r.task = in.integer(3, "task_id");
  // Unscheduled instances (both timestamps 0) may carry no machine.
  if (in.present(4) || r.start != 0 || r.end != 0) {
    r.machine = static_cast<MachineId>(in.integer(4, "machine_id"));
    in.check(r.machine >= 1, "machine_id", "is below 1");
  }
  if (in.ok() && !parse_enum(in.text(5), &r.status)) {
    in.fail("status", "is not a batch instance status");
  }
  r.seq_no = static_cast<std::int32_t>(in.integer(6, "seq_no"));
  r.total_seq_no = static_cast<std::int32_t>(in.integer(7, "total_seq_no"));
  r.max_cpu = in.real(8, "max_cpu");
  r.avg_cpu = in.real(9, "avg_cpu");
  r.max_mem = in.real(10, "max_mem");
  r.avg_mem = in.real(11, "avg_mem");
  in.check(r.start >= 0 && r.end >= 0, "timestamp", "is negative");
  in.check(r.status != BatchInstanceStatus::kTerminated ||
               (r.start > 0 && r.end >= r.start),
           "timestamps", "are inconsistent with Terminated status");
  in.check(r.max_cpu >= 0.0 && r.avg_cpu >= 0.0, "cpu", "is negative");
  in.check(r.avg_cpu <= r.max_cpu + kAvgCpuTolerance, "avg_cpu",
           "exceeds max_cpu");
  in.check(r.avg_mem >= 0.0 && r.avg_mem <= 1.0, "avg_mem",
           "is outside [0, 1]");
  in.check(r.max_mem >= 0.0 && r.max_mem <= 1.0, "max_mem",
           "is outside [0, 1]");
  if (!in.ok()) return std::nullopt;
  return r;
}

std::vector<std::string> format_fields(const MachineEvent& r) {
  return {fmt_int(r.timestamp),
          fmt_int(r.machine),
          std::string(to_string(r.type)),
          r.detail,
          fmt_int(r.cpu_count),
          csv::format_double(r.norm_memory),
          csv::format_double(r.norm_disk)};
}

std::vector<std::string> format_fields(const ServerUsageRecord& r) {
  return {fmt_int(r.timestamp),        fmt_int(r.machine),
          fmt_optional_percent(r.cpu), fmt_optional_percent(r.mem),
          fmt_optional_percent(r.disk), fmt_optional_double(r.load1),
          fmt_optional_double(r.load5), fmt_optional_double(r.load15)};
}

std::vector<std::string> format_fields(const ContainerEvent& r) {
  std::string cpu_set;
  for (std::size_t i = 0; i < r.cpu_set.size(); ++i) {
    if (i) cpu_set += '|';
    cpu_set += std::to_string(r.cpu_set[i]);
  }
  return {fmt_int(r.timestamp),
          std::string(to_string(r.type)),
          fmt_int(r.instance),
          fmt_int(r.machine),
          csv::format_double(r.cpu_req),
          csv::format_double(r.mem_req),
          csv::format_double(r.disk_req),
          cpu_set};
}

std::vector<std::string> format_fields(const ContainerUsageRecord& r) {
  return {fmt_int(r.timestamp),
          fmt_int(r.instance),
          csv::format_percent(r.cpu_of_req),
          csv::format_percent(r.mem_of_req),
          csv::format_percent(r.disk_of_req),
          csv::format_percent(r.disk),
          csv::format_double(r.load1),
          csv::format_double(r.load5),
          csv::format_double(r.load15),
          csv::format_double(r.avg_cpi),
          csv::format_double(r.avg_mpki),
          csv::format_double(r.max_cpi),
          csv::format_double(r.max_mpki)};
}

std::vector<std::string> format_fields(const BatchTaskRecord& r) {
  return {fmt_int(r.create_time),
          fmt_int(r.end_time),
          fmt_int(r.job),
          fmt_int(r.task),
          fmt_int(r.instance_count),
          std::string(to_string(r.status)),
          csv::format_double(r.cpu_req),
          csv::format_double(r.mem_req)};
}

std::vector<std::string> format_fields(const BatchInstanceRecord& r) {
  return {fmt_int(r.start),
          fmt_int(r.end),
          fmt_int(r.job),
          fmt_int(r.task),
          r.machine >= 1 ? fmt_int(r.machine) : std::string(),
          std::string(to_string(r.status)),
          fmt_int(r.seq_no),
          fmt_int(r.total_seq_no),
          csv::format_double(r.max_cpu),
          csv::format_double(r.avg_cpu),
          csv::format_double(r.max_mem),
          csv::format_double(r.avg_mem)};
}

TraceBundle parse_trace_dir(const std::filesystem::path& dir,
                            const TraceIoOptions& options,
                            std::vector<RowDiagnostic>* diagnostics) {
  for (auto file : kAllTraceFiles) {
    if (!std::filesystem::exists(dir / options.file_name(file))) {
      throw ParseError("missing trace file " +
                       (dir / options.file_name(file)).string());
    }
  }
  TraceBundle bundle;
  bundle.events = parse_file<MachineEvent>(
      dir, TraceFile::kServerEvent, options, parse_machine_event, diagnostics);
  bundle.server_usage =
      parse_file<ServerUsageRecord>(dir, TraceFile::kServerUsage, options,
                                    parse_server_usage, diagnostics);
  bundle.container_events =
      parse_file<ContainerEvent>(dir, TraceFile::kContainerEvent, options,
                                 parse_container_event, diagnostics);
  bundle.container_usage =
      parse_file<ContainerUsageRecord>(dir, TraceFile::kContainerUsage,
                                       options, parse_container_usage,
                                       diagnostics);
  bundle.batch_tasks = parse_file<BatchTaskRecord>(
      dir, TraceFile::kBatchTask, options, parse_batch_task, diagnostics);
  bundle.batch_instances =
      parse_file<BatchInstanceRecord>(dir, TraceFile::kBatchInstance, options,
                                      parse_batch_instance, diagnostics);

  MachineId max_id = 0;
  for (const auto& e : bundle.events) max_id = std::max(max_id, e.machine);
  for (const auto& r : bundle.server_usage) max_id = std::max(max_id, r.machine);
  for (const auto& e : bundle.container_events) {
    max_id = std::max(max_id, e.machine);
  }
  for (const auto& b : bundle.batch_instances) {
    max_id = std::max(max_id, b.machine);
  }
  bundle.machine_count = max_id;
  return bundle;
}

void write_trace_dir(const TraceBundle& bundle,
                     const std::filesystem::path& dir,
                     const TraceIoOptions& options) {
  std::filesystem::create_directories(dir);
  write_file(dir, TraceFile::kServerEvent, options, bundle.events);
  write_file(dir, TraceFile::kServerUsage, options, bundle.server_usage);
  write_file(dir, TraceFile::kContainerEvent, options, bundle.container_events);
  write_file(dir, TraceFile::kContainerUsage, options, bundle.container_usage);
  write_file(dir, TraceFile::kBatchTask, options, bundle.batch_tasks);
  write_file(dir, TraceFile::kBatchInstance, options, bundle.batch_instances);
}

IntervalGrid::IntervalGrid(Seconds start, Seconds end, Seconds step)
    : start_(start), end_(end), step_(step) {
  if (step <= 0) throw std::invalid_argument("grid step must be positive");
  if (end <= start) throw std::invalid_argument("grid end must exceed start");
  if ((end - start) % step != 0) {
    throw std::invalid_argument("grid span " + std::to_string(end - start) +
                                " is not a multiple of step " +
                                std::to_string(step));
  }
}

std::optional<std::size_t> IntervalGrid::sample_slot(Seconds ts) const {
  if (ts < start_) return std::nullopt;
  const auto x = static_cast<std::size_t>((ts - start_) / step_);
  if (x > interval_count()) return std::nullopt;
  return x;
}

std::optional<std::size_t> IntervalGrid::interval_of(Seconds ts) const {
  if (ts < start_ || ts >= end_) return std::nullopt;
  return static_cast<std::size_t>((ts - start_) / step_);
}

IntervalGrid build_interval_grid(Seconds start, Seconds end, Seconds step) {
  return IntervalGrid(start, end, step);
}

ValidationReport validate_bundle(const TraceBundle& bundle,
                                 const IntervalGrid& grid) {
  ValidationReport report;
  const auto machines = static_cast<std::size_t>(bundle.machine_count);
  std::vector<std::size_t> rows(machines + 1, 0);
  std::vector<std::vector<bool>> slots(
      machines + 1, std::vector<bool>(grid.timestamp_count(), false));
  for (const auto& r : bundle.server_usage) {
    if (r.machine < 1 || static_cast<std::size_t>(r.machine) > machines) {
      continue;
    }
    ++rows[static_cast<std::size_t>(r.machine)];
    if (auto x = grid.sample_slot(r.timestamp)) {
      slots[static_cast<std::size_t>(r.machine)][*x] = true;
    }
  }
  for (std::size_t m = 1; m <= machines; ++m) {
    if (rows[m] == 0) {
      report.machines_without_usage.push_back(static_cast<MachineId>(m));
      continue;
    }
    const auto filled = static_cast<std::size_t>(
        std::count(slots[m].begin(), slots[m].end(), true));
    if (filled < grid.timestamp_count()) {
      report.undersampled_machines.emplace_back(static_cast<MachineId>(m),
                                                filled);
    }
  }

  std::map<InstanceId, std::size_t> per_instance;
  for (const auto& e : bundle.container_events) ++per_instance[e.instance];
  for (const auto& [instance, count] : per_instance) {
    if (count > 1) report.duplicated_container_instances.push_back(instance);
  }

  for (std::size_t i = 0; i < bundle.batch_instances.size(); ++i) {
    const auto& b = bundle.batch_instances[i];
    if (b.start == 0 || b.end == 0) {
      report.zero_timestamp_batch_instances.push_back(i);
    }
  }
  return report;
}

namespace csv {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t next = line.find(sep, start);
    if (next == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, next - start));
    start = next + 1;
  }
  return out;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

std::string format_percent(double fraction) {
  char buf[64];
  const int n = std::snprintf(buf, sizeof(buf), "%.15g", fraction * 100.0);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                   value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    return std::nullopt;
  }
  return value;
}

std::optional<std::int64_t> parse_int(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(),
                                   value);
  if (ec == std::errc() && ptr == text.data() + text.size()) return value;
  // Some exports write integral columns as "39600.0".
  auto d = parse_double(text);
  if (d && std::isfinite(*d) && std::floor(*d) == *d &&
      std::fabs(*d) < 9.0e15) {
    return static_cast<std::int64_t>(*d);
  }
  return std::nullopt;
}

std::string join(const std::vector<std::string>& fields, char sep) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += sep;
    out += fields[i];
  }
  return out;
}

}  // namespace csv
}  // namespace trace_insight
