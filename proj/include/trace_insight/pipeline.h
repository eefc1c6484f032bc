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

// The preprocess -> analyze -> report pipeline behind the command-line tool.
// Each stage reads the previous stage's files from disk and writes its own
// directory under the output dir, plus a manifest.json with input digests.

#ifndef TRACE_INSIGHT_PIPELINE_H_
#define TRACE_INSIGHT_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "trace_insight/aggregate.h"
#include "trace_insight/anomaly.h"
#include "trace_insight/classify.h"
#include "trace_insight/preprocess.h"
#include "trace_insight/similarity.h"

namespace trace_insight {

inline constexpr std::string_view kToolVersion = "1.0.0";
inline constexpr std::string_view kReportSchemaVersion = "1.0";

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A failure inside one stage; what() is prefixed with the stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& message)
      : std::runtime_error(stage + ": " + message), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct PipelineConfig {
  std::filesystem::path input_dir;
  std::filesystem::path output_dir;

  Seconds grid_start = 39600;
  Seconds grid_end = 82500;
  Seconds grid_step = 300;
  bool has_header = false;

  BoundaryPolicy boundary = BoundaryPolicy::kHold;
  double max_mem_req = 0.9;
  BatchChargeMode batch_charge = BatchChargeMode::kFaithful;

  std::size_t sample_num = 40;
  std::size_t standard_count = 4;
  // Explicit standard machines; empty means sampled ones.
  std::vector<MachineId> standards;
  double threshold = 3.0;
  bool normalized = false;
  double suitability_gap = 1.0;
  std::optional<std::uint64_t> dtw_seed;

  std::size_t k = 8;
  std::size_t max_iter = 100;
  std::size_t restarts = 10;
  LabelThresholds labels;
  std::optional<std::uint64_t> classify_seed;

  std::size_t trees = 100;
  std::size_t subsample = 256;
  FeatureMode mode = FeatureMode::kPerMachineMean;
  bool zscore = false;
  std::size_t top_n = 25;
  DiagnoseOptions diagnose;
  std::optional<std::uint64_t> anomaly_seed;
};

// Sets one key. `seed` sets all three stage seeds. Throws ConfigError on an
// unknown key or a malformed value.
void apply_setting(PipelineConfig& config, std::string_view key,
                   std::string_view value);

// Flat key=value text; '#' starts a comment. Throws ConfigError.
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig parse_config(std::string_view text);

// Every setting except the two directories, as canonical text. This is what
// manifests record, so runs into different output dirs stay comparable.
std::map<std::string, std::string> config_snapshot(const PipelineConfig& config);

// Lowercase hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

struct StageSummary {
  std::map<std::string, std::int64_t> row_counts;
  std::vector<std::string> warnings;
};

// Writes <output>/preprocess: dense_usage.csv, repair_log.csv,
// removed_container_events.csv, summary.json, manifest.json.
StageSummary cmd_preprocess(const PipelineConfig& config);

// Writes <output>/analyze. Runs preprocess first when its outputs are absent.
// Throws ConfigError when a seed is missing.
StageSummary cmd_analyze(const PipelineConfig& config);

// Writes <output>/report/report.json and the plots/ bundle. Throws
// StageError("report", "analyze stage missing") without analyze outputs.
StageSummary cmd_report(const PipelineConfig& config);

}  // namespace trace_insight

#endif  // TRACE_INSIGHT_PIPELINE_H_
