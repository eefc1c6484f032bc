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

// Seeded synthetic traces with known workload types, anomalies and gaps.

#ifndef TRACE_INSIGHT_SYNTH_H_
#define TRACE_INSIGHT_SYNTH_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "trace_insight/classify.h"
#include "trace_insight/trace_model.h"

namespace trace_insight {

enum class AnomalyKind {
  kFrequentSoftError,
  kSoftErrorWorkloadStop,
  kHeavyOnline,
  kLighterOnlineSkew,
  kIdle,
};

std::string_view to_string(AnomalyKind kind);
std::optional<AnomalyKind> parse_anomaly_kind(std::string_view text);

// Recognized params, with defaults:
//   FrequentSoftError      count = 4
//   SoftErrorWorkloadStop  offset = 223 (seconds after the batch stop)
//   HeavyOnline            containers = 18
//   LighterOnlineSkew      containers = 1, batch_factor = 4
struct AnomalyPlant {
  MachineId machine = 0;
  AnomalyKind kind = AnomalyKind::kIdle;
  std::map<std::string, double> params;
};

// Removes server-usage samples first..last (sample indices, inclusive) of one
// machine: a single metric when set, else the whole row.
struct GapPlant {
  MachineId machine = 0;
  std::optional<UsageMetric> metric;
  std::size_t first = 0;
  std::size_t last = 0;
};

struct SynthConfig {
  MachineId machine_count = 64;
  Seconds start = 0;
  Seconds end = 24 * 300;
  Seconds step = 300;
  // Machines per type, Type1..Type8, assigned to ids in that order.
  std::array<std::size_t, kWorkloadTypeCount> quotas{};
  std::vector<AnomalyPlant> plants;
  std::vector<GapPlant> gaps;
  // Standard deviation of the Gaussian usage noise, as a fraction.
  double noise = 0.02;
  std::uint64_t seed = 0;
};

struct PlantedGap {
  MachineId machine = 0;
  UsageMetric metric = UsageMetric::kCpu;
  Seconds timestamp = 0;
  double value = 0.0;  // the removed true value

  bool operator==(const PlantedGap&) const = default;
};

struct GroundTruth {
  MachineId machine_count = 0;
  std::vector<WorkloadType> labels;  // index machine - 1
  std::map<MachineId, std::vector<AnomalyKind>> anomalies;
  std::vector<PlantedGap> gaps;

  WorkloadType label_of(MachineId machine) const {
    return labels.at(static_cast<std::size_t>(machine - 1));
  }
  bool operator==(const GroundTruth&) const = default;
};

struct SynthOutput {
  TraceBundle bundle;
  GroundTruth truth;
};

// Batch (first N) and container (last N) occupancy bits every machine of
// `type` gets on an N-interval grid. Throws std::invalid_argument when the
// type cannot be drawn on N intervals (Type7 needs N >= 5, Type8 N >= 3,
// Type5 and Type6 N >= 2).
std::vector<std::uint8_t> planted_pattern(WorkloadType type, std::size_t n);

// Throws std::invalid_argument on an invalid or infeasible config.
SynthOutput generate_trace(const SynthConfig& config);

// Removes the given sample indices of `machine` (one metric, or whole rows)
// and records the removed values in `truth`. Throws std::invalid_argument
// when the machine has no usage rows or a target sample is absent.
void plant_gap(TraceBundle& bundle, GroundTruth& truth, const IntervalGrid& grid,
               MachineId machine, std::optional<UsageMetric> metric,
               std::span<const std::size_t> samples);

// Flips every bit independently with probability `rate`.
void apply_occupancy_noise(std::vector<OccupancyVector>& matrix, double rate,
                           std::uint64_t seed);

void write_ground_truth(const GroundTruth& truth,
                        const std::filesystem::path& path);
GroundTruth read_ground_truth(const std::filesystem::path& path);

// Command-line forms: "40,2,8,2,2,6,3,1"; "3:Idle,7:HeavyOnline:containers=20";
// "5:cpu:3-4,9:all:0-24". Throw std::invalid_argument on bad input.
std::array<std::size_t, kWorkloadTypeCount> parse_quotas(std::string_view text);
std::vector<AnomalyPlant> parse_plants(std::string_view text);
std::vector<GapPlant> parse_gap_plants(std::string_view text);

}  // namespace trace_insight

#endif  // TRACE_INSIGHT_SYNTH_H_
