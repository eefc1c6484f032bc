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

#include "trace_insight/synth.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "json.hpp"
#include "trace_insight/random.h"

namespace trace_insight {
namespace {

using nlohmann::json;

constexpr std::int32_t kCores = 64;

// Typical per-container and per-unit-batch contributions to server usage,
// used to shift the server level of machines with planted workload changes.
constexpr double kTypicalContainers = 8.5;
constexpr double kContainerCpuShare = 6.0 * 0.10 / kCores;
constexpr double kContainerMemShare = 0.05 * 0.40;
constexpr double kBatchCpuShare = 0.10;
constexpr double kBatchMemShare = 0.10;

// Mean cpu / mem / disk per type.
struct UsageLevel {
  double cpu, mem, disk;
};
constexpr std::array<UsageLevel, kWorkloadTypeCount> kTypeLevels = {{
    {0.25, 0.55, 0.50},
    {0.01, 0.096, 0.3092},
    {0.1744, 0.2955, 0.4332},
    {0.1206, 0.362, 0.3346},
    {0.22, 0.285, 0.42},
    {0.2129, 0.3988, 0.4531},
    {0.2474, 0.4743, 0.5004},
    {0.1958, 0.2966, 0.5658},
}};

// Percents carry two decimals so that the CSV text round-trips exactly.
double percent2(double fraction) {
  const double p = std::round(std::clamp(fraction, 0.0, 1.0) * 10000.0) / 100.0;
  return p / 100.0;
}

double round_to(double v, double scale) { return std::round(v * scale) / scale; }

double param(const AnomalyPlant& plant, const std::string& key,
             double fallback) {
  auto it = plant.params.find(key);
  return it == plant.params.end() ? fallback : it->second;
}

bool has_batch(WorkloadType t) {
  return t != WorkloadType::kType2 && t != WorkloadType::kType4;
}

bool has_containers(WorkloadType t) {
  return t == WorkloadType::kType1 || t == WorkloadType::kType4 ||
         t == WorkloadType::kType6 || t == WorkloadType::kType7 ||
         t == WorkloadType::kType8;
}

void check_plant_fits(const AnomalyPlant& plant, WorkloadType type) {
  bool ok = true;
  switch (plant.kind) {
    case AnomalyKind::kFrequentSoftError:
      break;
    case AnomalyKind::kSoftErrorWorkloadStop:
      ok = type == WorkloadType::kType5 || type == WorkloadType::kType6;
      break;
    case AnomalyKind::kHeavyOnline:
      ok = has_containers(type);
      break;
    case AnomalyKind::kLighterOnlineSkew:
      ok = has_containers(type) && has_batch(type);
      break;
    case AnomalyKind::kIdle:
      ok = type == WorkloadType::kType2;
      break;
  }
  if (!ok) {
    throw std::invalid_argument(
        std::string(to_string(plant.kind)) + " cannot be planted on machine " +
        std::to_string(plant.machine) + " of " + std::string(to_string(type)));
  }
}

// Runs [begin, end) of intervals in which batch is present.
std::vector<std::pair<std::size_t, std::size_t>> present_runs(
    const std::vector<std::uint8_t>& bits, std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t x = 0; x < n;) {
    if (!bits[x]) {
      ++x;
      continue;
    }
    std::size_t y = x;
    while (y < n && bits[y]) ++y;
    runs.emplace_back(x, y);
    x = y;
  }
  return runs;
}

struct Counters {
  InstanceId next_container = 1;
  std::int64_t next_job = 1;
};

void generate_machine(const SynthConfig& config, const IntervalGrid& grid,
                      MachineId machine, WorkloadType type,
                      const std::vector<const AnomalyPlant*>& plants,
                      Counters& counters, TraceBundle& bundle) {
  const std::size_t n = grid.interval_count();
  Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(machine)));
  const auto bits = planted_pattern(type, n);
  const auto find_plant = [&](AnomalyKind kind) -> const AnomalyPlant* {
    for (const auto* p : plants) {
      if (p->kind == kind) return p;
    }
    return nullptr;
  };

  bundle.events.push_back(
      {0, machine, MachineEventType::kAdd, "", kCores, 1.0, 1.0});

  // Online containers, all created at time 0.
  std::size_t containers = 0;
  if (bits[n] != 0) {
    containers = static_cast<std::size_t>(rng.between(7, 10));
    if (const auto* p = find_plant(AnomalyKind::kHeavyOnline)) {
      containers = static_cast<std::size_t>(param(*p, "containers", 18));
    }
    if (const auto* p = find_plant(AnomalyKind::kLighterOnlineSkew)) {
      containers = static_cast<std::size_t>(param(*p, "containers", 1));
    }
  }
  for (std::size_t c = 0; c < containers; ++c) {
    ContainerEvent e;
    e.timestamp = 0;
    e.instance = counters.next_container++;
    e.machine = machine;
    e.cpu_req = rng.bernoulli(0.5) ? 4 : 8;
    e.mem_req = round_to(rng.uniform(0.02, 0.08), 1e4);
    e.disk_req = round_to(rng.uniform(0.01, 0.05), 1e4);
    const auto first_core = static_cast<std::int32_t>(rng.index(kCores - 8));
    for (std::int32_t k = 0; k < static_cast<std::int32_t>(e.cpu_req); ++k) {
      e.cpu_set.push_back(first_core + k);
    }
    for (std::size_t x = 0; x < n; ++x) {
      ContainerUsageRecord u;
      u.timestamp = grid.timestamp(x);
      u.instance = e.instance;
      u.cpu_of_req = percent2(0.10 + rng.normal(0.0, config.noise));
      u.mem_of_req = percent2(0.40 + rng.normal(0.0, config.noise));
      u.disk_of_req = percent2(0.30 + rng.normal(0.0, config.noise));
      u.disk = percent2(kTypeLevels[static_cast<std::size_t>(type)].disk);
      u.load1 = u.load5 = u.load15 = 1.0;
      u.avg_cpi = u.max_cpi = 1.5;
      u.avg_mpki = u.max_mpki = 2.0;
      bundle.container_usage.push_back(u);
    }
    bundle.container_events.push_back(std::move(e));
  }

  // Batch instances: every present interval gets fresh starts, durations are
  // log-uniform in [30, 4 * step] and never run past the present run.
  double batch_factor = 1.0;
  if (const auto* p = find_plant(AnomalyKind::kLighterOnlineSkew)) {
    batch_factor = param(*p, "batch_factor", 4);
  }
  const double log_lo = std::log(30.0);
  const double log_hi =
      std::log(std::max(30.0, 4.0 * static_cast<double>(grid.step())));
  for (const auto& [begin, end] : present_runs(bits, n)) {
    const std::int64_t job = counters.next_job++;
    const Seconds run_end = grid.timestamp(end);
    for (std::size_t x = begin; x < end; ++x) {
      const auto count = static_cast<std::int32_t>(
          std::lround(static_cast<double>(rng.between(8, 16)) * batch_factor));
      const Seconds lo = std::max<Seconds>(1, grid.timestamp(x));
      const Seconds hi = grid.timestamp(x + 1) - 1;
      BatchTaskRecord task;
      task.job = job;
      task.task = static_cast<std::int64_t>(x - begin + 1);
      task.instance_count = count;
      task.create_time = hi;
      task.end_time = 0;
      task.cpu_req = 50;
      task.mem_req = 0.2;
      for (std::int32_t i = 0; i < count; ++i) {
        BatchInstanceRecord r;
        r.start = rng.between(lo, hi);
        const auto duration = static_cast<Seconds>(
            std::llround(std::exp(rng.uniform(log_lo, log_hi))));
        r.end = std::min(r.start + duration, run_end);
        r.job = job;
        r.task = task.task;
        r.machine = machine;
        r.status = BatchInstanceStatus::kTerminated;
        r.seq_no = i + 1;
        r.total_seq_no = count;
        r.avg_cpu = round_to(rng.uniform(0.1, 0.6), 100);
        r.max_cpu = round_to(r.avg_cpu * rng.uniform(1.0, 1.5), 100);
        r.avg_mem = round_to(rng.uniform(0.002, 0.01), 1e4);
        r.max_mem = round_to(r.avg_mem * 1.2, 1e4);
        task.create_time = std::min(task.create_time, r.start);
        task.end_time = std::max(task.end_time, r.end);
        bundle.batch_instances.push_back(r);
      }
      bundle.batch_tasks.push_back(task);
    }
  }

  // Server usage at every grid timestamp. Cpu drops when batch is absent
  // from the neighbouring intervals.
  UsageLevel level = kTypeLevels[static_cast<std::size_t>(type)];
  // Planted container and batch loads move the server totals with them.
  if (containers > 0) {
    const double extra = static_cast<double>(containers) - kTypicalContainers;
    level.cpu += extra * kContainerCpuShare;
    level.mem += extra * kContainerMemShare;
  }
  level.cpu += (batch_factor - 1.0) * kBatchCpuShare;
  level.mem += (batch_factor - 1.0) * kBatchMemShare;
  const double offset_cpu = rng.normal(0.0, config.noise);
  const double offset_mem = rng.normal(0.0, config.noise);
  const double offset_disk = rng.normal(0.0, config.noise);
  for (std::size_t x = 0; x <= n; ++x) {
    const bool batch_near =
        (x < n && bits[x]) || (x > 0 && bits[x - 1]);
    const double cpu_scale = has_batch(type) && !batch_near ? 0.6 : 1.0;
    ServerUsageRecord r;
    r.timestamp = grid.timestamp(x);
    r.machine = machine;
    r.cpu = percent2(level.cpu * cpu_scale + offset_cpu +
                     rng.normal(0.0, config.noise));
    r.mem = percent2(level.mem + offset_mem + rng.normal(0.0, config.noise));
    r.disk = percent2(level.disk + offset_disk + rng.normal(0.0, config.noise));
    r.load1 = round_to(r.cpu * kCores, 100);
    r.load5 = r.load1;
    r.load15 = r.load1;
    bundle.server_usage.push_back(r);
  }

  if (const auto* p = find_plant(AnomalyKind::kFrequentSoftError)) {
    const auto count = static_cast<std::size_t>(param(*p, "count", 4));
    std::vector<Seconds> stamps;
    for (std::size_t i = 0; i < count; ++i) {
      stamps.push_back(rng.between(grid.start(), grid.end()));
    }
    std::sort(stamps.begin(), stamps.end());
    for (auto ts : stamps) {
      bundle.events.push_back(
          {ts, machine, MachineEventType::kSoftError, "agent check failed", 0,
           0.0, 0.0});
    }
  }
  if (const auto* p = find_plant(AnomalyKind::kSoftErrorWorkloadStop)) {
    std::size_t stop = n;
    while (stop > 0 && !bits[stop - 1]) --stop;
    const auto offset = static_cast<Seconds>(param(*p, "offset", 223));
    const Seconds ts =
        std::clamp(grid.timestamp(stop) + offset, grid.start(), grid.end());
    bundle.events.push_back(
        {ts, machine, MachineEventType::kSoftError, "disk full", 0, 0.0, 0.0});
  }
}

std::vector<std::string_view> split_nonempty(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  for (auto part : csv::split(text, sep)) {
    if (!part.empty()) out.push_back(part);
  }
  return out;
}

std::int64_t to_int(std::string_view text, const char* what) {
  auto v = csv::parse_int(text);
  if (!v) {
    throw std::invalid_argument(std::string("bad ") + what + ": '" +
                                std::string(text) + "'");
  }
  return *v;
}

}  // namespace

std::string_view to_string(AnomalyKind kind) {
  switch (kind) {
    case AnomalyKind::kFrequentSoftError: return "FrequentSoftError";
    case AnomalyKind::kSoftErrorWorkloadStop: return "SoftErrorWorkloadStop";
    case AnomalyKind::kHeavyOnline: return "HeavyOnline";
    case AnomalyKind::kLighterOnlineSkew: return "LighterOnlineSkew";
    case AnomalyKind::kIdle: return "Idle";
  }
  return "";
}

std::optional<AnomalyKind> parse_anomaly_kind(std::string_view text) {
  for (auto kind :
       {AnomalyKind::kFrequentSoftError, AnomalyKind::kSoftErrorWorkloadStop,
        AnomalyKind::kHeavyOnline, AnomalyKind::kLighterOnlineSkew,
        AnomalyKind::kIdle}) {
    if (to_string(kind) == text) return kind;
  }
  return std::nullopt;
}

std::vector<std::uint8_t> planted_pattern(WorkloadType type, std::size_t n) {
  const auto need = [&](std::size_t min_n) {
    if (n < min_n) {
      throw std::invalid_argument(std::string(to_string(type)) + " needs at least " +
                                  std::to_string(min_n) + " intervals, grid has " +
                                  std::to_string(n));
    }
  };
  need(1);
  std::vector<std::uint8_t> bits(2 * n, 0);
  const auto batch = [&](std::size_t from, std::size_t to) {
    for (std::size_t x = from; x < to; ++x) bits[x] = 1;
  };
  const auto containers = [&] {
    for (std::size_t x = 0; x < n; ++x) bits[n + x] = 1;
  };
  switch (type) {
    case WorkloadType::kType1:
      batch(0, n);
      containers();
      break;
    case WorkloadType::kType2:
      break;
    case WorkloadType::kType3:
      batch(0, n);
      break;
    case WorkloadType::kType4:
      containers();
      break;
    case WorkloadType::kType5:
      need(2);
      batch(0, std::max<std::size_t>(1, n / 3));
      break;
    case WorkloadType::kType6:
      need(2);
      batch(0, n / 2);
      containers();
      break;
    case WorkloadType::kType7: {
      need(5);
      const std::size_t gap = std::max<std::size_t>(1, (n - 1) / 5);
      const std::size_t from = (n - gap) / 2;
      batch(0, from);
      batch(from + gap, n);
      containers();
      break;
    }
    case WorkloadType::kType8:
      need(3);
      batch(n / 3, n);
      containers();
      break;
    case WorkloadType::kUnknown:
      throw std::invalid_argument("no pattern for Unknown");
  }
  return bits;
}

SynthOutput generate_trace(const SynthConfig& config) {
  const IntervalGrid grid(config.start, config.end, config.step);
  if (config.machine_count < 1) {
    throw std::invalid_argument("machine_count must be positive");
  }
  const std::size_t quota_sum =
      std::accumulate(config.quotas.begin(), config.quotas.end(), std::size_t{0});
  if (quota_sum != static_cast<std::size_t>(config.machine_count)) {
    throw std::invalid_argument("quotas sum to " + std::to_string(quota_sum) +
                                ", machine_count is " +
                                std::to_string(config.machine_count));
  }
  if (!(config.noise >= 0.0)) throw std::invalid_argument("noise must be >= 0");

  SynthOutput out;
  GroundTruth& truth = out.truth;
  truth.machine_count = config.machine_count;
  for (std::size_t t = 0; t < kWorkloadTypeCount; ++t) {
    if (config.quotas[t] > 0) planted_pattern(workload_type(t), grid.interval_count());
    truth.labels.insert(truth.labels.end(), config.quotas[t], workload_type(t));
  }

  std::map<MachineId, std::vector<const AnomalyPlant*>> plants;
  std::set<std::pair<MachineId, AnomalyKind>> seen;
  for (const auto& p : config.plants) {
    if (p.machine < 1 || p.machine > config.machine_count) {
      throw std::invalid_argument("plant on unknown machine " +
                                  std::to_string(p.machine));
    }
    if (!seen.emplace(p.machine, p.kind).second) {
      throw std::invalid_argument("duplicate plant on machine " +
                                  std::to_string(p.machine));
    }
    check_plant_fits(p, truth.label_of(p.machine));
    plants[p.machine].push_back(&p);
    truth.anomalies[p.machine].push_back(p.kind);
  }

  Counters counters;
  TraceBundle& bundle = out.bundle;
  for (MachineId m = 1; m <= config.machine_count; ++m) {
    generate_machine(config, grid, m, truth.label_of(m), plants[m], counters,
                     bundle);
  }
  std::stable_sort(bundle.events.begin(), bundle.events.end(),
                   [](const MachineEvent& a, const MachineEvent& b) {
                     return a.timestamp < b.timestamp;
                   });
  bundle.machine_count = config.machine_count;

  for (const auto& g : config.gaps) {
    if (g.first > g.last) throw std::invalid_argument("gap range is reversed");
    std::vector<std::size_t> samples(g.last - g.first + 1);
    std::iota(samples.begin(), samples.end(), g.first);
    plant_gap(bundle, truth, grid, g.machine, g.metric, samples);
  }
  return out;
}

void plant_gap(TraceBundle& bundle, GroundTruth& truth, const IntervalGrid& grid,
               MachineId machine, std::optional<UsageMetric> metric,
               std::span<const std::size_t> samples) {
  const auto has_machine =
      std::any_of(bundle.server_usage.begin(), bundle.server_usage.end(),
                  [&](const ServerUsageRecord& r) { return r.machine == machine; });
  if (!has_machine) {
    throw std::invalid_argument("machine " + std::to_string(machine) +
                                " has no server usage rows");
  }
  for (auto x : samples) {
    if (x >= grid.timestamp_count()) {
      throw std::invalid_argument("sample index " + std::to_string(x) +
                                  " is off the grid");
    }
    const Seconds ts = grid.timestamp(x);
    auto it = std::find_if(bundle.server_usage.begin(), bundle.server_usage.end(),
                           [&](const ServerUsageRecord& r) {
                             return r.machine == machine && r.timestamp == ts &&
                                    (!metric || !std::isnan(metric_value(r, *metric)));
                           });
    if (it == bundle.server_usage.end()) {
      throw std::invalid_argument("machine " + std::to_string(machine) +
                                  " has no sample at " + std::to_string(ts));
    }
    if (metric) {
      truth.gaps.push_back({machine, *metric, ts, metric_value(*it, *metric)});
      metric_value(*it, *metric) = std::nan("");
      continue;
    }
    for (auto m : kAllUsageMetrics) {
      if (!std::isnan(metric_value(*it, m))) {
        truth.gaps.push_back({machine, m, ts, metric_value(*it, m)});
      }
    }
    bundle.server_usage.erase(it);
  }
}

void apply_occupancy_noise(std::vector<OccupancyVector>& matrix, double rate,
                           std::uint64_t seed) {
  for (auto& v : matrix) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(v.machine)));
    for (auto& bit : v.bits) {
      if (rng.bernoulli(rate)) bit ^= 1;
    }
  }
}

void write_ground_truth(const GroundTruth& truth,
                        const std::filesystem::path& path) {
  json j;
  j["machine_count"] = truth.machine_count;
  json labels = json::array();
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    labels.push_back({{"machine", static_cast<MachineId>(i + 1)},
                      {"type", to_string(truth.labels[i])}});
  }
  j["labels"] = std::move(labels);
  json anomalies = json::array();
  for (const auto& [machine, kinds] : truth.anomalies) {
    json names = json::array();
    for (auto k : kinds) names.push_back(to_string(k));
    anomalies.push_back({{"machine", machine}, {"kinds", std::move(names)}});
  }
  j["anomalies"] = std::move(anomalies);
  json gaps = json::array();
  for (const auto& g : truth.gaps) {
    gaps.push_back({{"machine", g.machine},
                    {"metric", to_string(g.metric)},
                    {"timestamp", g.timestamp},
                    {"value", g.value}});
  }
  j["gaps"] = std::move(gaps);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

GroundTruth read_ground_truth(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  const json j = json::parse(in);
  GroundTruth truth;
  truth.machine_count = j.at("machine_count").get<MachineId>();
  for (const auto& l : j.at("labels")) {
    auto type = parse_workload_type(l.at("type").get<std::string>());
    if (!type) throw std::runtime_error("bad type in " + path.string());
    truth.labels.push_back(*type);
  }
  for (const auto& a : j.at("anomalies")) {
    auto& kinds = truth.anomalies[a.at("machine").get<MachineId>()];
    for (const auto& k : a.at("kinds")) {
      auto kind = parse_anomaly_kind(k.get<std::string>());
      if (!kind) throw std::runtime_error("bad anomaly kind in " + path.string());
      kinds.push_back(*kind);
    }
  }
  for (const auto& g : j.at("gaps")) {
    auto metric = parse_usage_metric(g.at("metric").get<std::string>());
    if (!metric) throw std::runtime_error("bad metric in " + path.string());
    truth.gaps.push_back({g.at("machine").get<MachineId>(), *metric,
                          g.at("timestamp").get<Seconds>(),
                          g.at("value").get<double>()});
  }
  return truth;
}

std::array<std::size_t, kWorkloadTypeCount> parse_quotas(std::string_view text) {
  const auto parts = csv::split(text, ',');
  if (parts.size() != kWorkloadTypeCount) {
    throw std::invalid_argument("quotas need 8 comma-separated counts");
  }
  std::array<std::size_t, kWorkloadTypeCount> quotas{};
  for (std::size_t i = 0; i < parts.size(); ++i) {
    const auto v = to_int(parts[i], "quota");
    if (v < 0) throw std::invalid_argument("quota must be >= 0");
    quotas[i] = static_cast<std::size_t>(v);
  }
  return quotas;
}

std::vector<AnomalyPlant> parse_plants(std::string_view text) {
  std::vector<AnomalyPlant> plants;
  for (auto item : split_nonempty(text, ',')) {
    const auto parts = csv::split(item, ':');
    if (parts.size() < 2) {
      throw std::invalid_argument("plant needs machine:kind, got '" +
                                  std::string(item) + "'");
    }
    AnomalyPlant p;
    p.machine = static_cast<MachineId>(to_int(parts[0], "plant machine"));
    auto kind = parse_anomaly_kind(parts[1]);
    if (!kind) {
      throw std::invalid_argument("unknown anomaly kind '" +
                                  std::string(parts[1]) + "'");
    }
    p.kind = *kind;
    for (std::size_t i = 2; i < parts.size(); ++i) {
      const auto eq = parts[i].find('=');
      auto value = eq == std::string_view::npos
                       ? std::nullopt
                       : csv::parse_double(parts[i].substr(eq + 1));
      if (!value) {
        throw std::invalid_argument("plant param needs key=value, got '" +
                                    std::string(parts[i]) + "'");
      }
      p.params[std::string(parts[i].substr(0, eq))] = *value;
    }
    plants.push_back(std::move(p));
  }
  return plants;
}

std::vector<GapPlant> parse_gap_plants(std::string_view text) {
  std::vector<GapPlant> gaps;
  for (auto item : split_nonempty(text, ',')) {
    const auto parts = csv::split(item, ':');
    if (parts.size() != 3) {
      throw std::invalid_argument("gap needs machine:metric:first-last, got '" +
                                  std::string(item) + "'");
    }
    GapPlant g;
    g.machine = static_cast<MachineId>(to_int(parts[0], "gap machine"));
    if (parts[1] != "all") {
      g.metric = parse_usage_metric(parts[1]);
      if (!g.metric) {
        throw std::invalid_argument("unknown metric '" + std::string(parts[1]) +
                                    "'");
      }
    }
    const auto dash = parts[2].find('-');
    g.first = static_cast<std::size_t>(to_int(parts[2].substr(0, dash), "gap range"));
    g.last = dash == std::string_view::npos
                 ? g.first
                 : static_cast<std::size_t>(
                       to_int(parts[2].substr(dash + 1), "gap range"));
    gaps.push_back(g);
  }
  return gaps;
}

}  // namespace trace_insight
