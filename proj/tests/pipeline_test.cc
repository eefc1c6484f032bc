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

#include "trace_insight/pipeline.h"

#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <tuple>

#include "json.hpp"
#include "test_util.h"
#include "trace_insight/synth.h"

namespace trace_insight {
namespace {

namespace fs = std::filesystem;
using testing::TempDir;
using testing::read_text;
using testing::write_text;

TEST(ConfigTest, ParsesKeysAndComments) {
  const auto c = parse_config(
      "# stage seeds\n"
      "seed = 11\n"
      "classify_seed=12   # overrides one stage\n"
      "grid_end = 46800\n"
      "\n"
      "standards = 16,19,28,36\n"
      "mode = per-interval\n"
      "boundary = leave\n"
      "batch_charge = duration-weighted\n"
      "normalized = true\n");
  EXPECT_EQ(c.dtw_seed, 11u);
  EXPECT_EQ(c.classify_seed, 12u);
  EXPECT_EQ(c.anomaly_seed, 11u);
  EXPECT_EQ(c.grid_end, 46800);
  EXPECT_EQ(c.standards, (std::vector<MachineId>{16, 19, 28, 36}));
  EXPECT_EQ(c.mode, FeatureMode::kPerInterval);
  EXPECT_EQ(c.boundary, BoundaryPolicy::kLeave);
  EXPECT_EQ(c.batch_charge, BatchChargeMode::kDurationWeighted);
  EXPECT_TRUE(c.normalized);
}

TEST(ConfigTest, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(parse_config("colour = blue\n"), ConfigError);
  EXPECT_THROW(parse_config("k = eight\n"), ConfigError);
  EXPECT_THROW(parse_config("mode = hourly\n"), ConfigError);
  EXPECT_THROW(parse_config("just a line\n"), ConfigError);
  PipelineConfig c;
  EXPECT_THROW(apply_setting(c, "threshold", "-"), ConfigError);
}

TEST(ConfigTest, SnapshotOmitsDirectories) {
  PipelineConfig a, b;
  apply_setting(a, "input_dir", "/x");
  apply_setting(b, "output_dir", "/y");
  EXPECT_EQ(config_snapshot(a), config_snapshot(b));
  EXPECT_FALSE(config_snapshot(a).count("input_dir"));
  apply_setting(b, "k", "5");
  EXPECT_NE(config_snapshot(a), config_snapshot(b));
}

TEST(Sha256Test, KnownDigest) {
  TempDir dir("sha");
  write_text(dir.path() / "abc", "abc");
  EXPECT_EQ(sha256_file(dir.path() / "abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

// A small synthetic trace on disk plus a config pointing at it.
struct Fixture {
  TempDir dir{"pipeline"};
  GroundTruth truth;
  PipelineConfig config;

  explicit Fixture(SynthConfig synth, bool seeded = true) {
    const auto out = generate_trace(synth);
    truth = out.truth;
    write_trace_dir(out.bundle, dir.path() / "trace");
    config.input_dir = dir.path() / "trace";
    config.output_dir = dir.path() / "out";
    config.grid_start = synth.start;
    config.grid_end = synth.end;
    config.grid_step = synth.step;
    if (seeded) apply_setting(config, "seed", "3");
  }
};

SynthConfig default_synth() {
  SynthConfig s;
  s.quotas = {40, 2, 8, 2, 2, 6, 3, 1};
  s.seed = 21;
  return s;
}

std::map<std::string, std::string> tree_bytes(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) {
      files[fs::relative(e.path(), root).generic_string()] = read_text(e.path());
    }
  }
  return files;
}

void run_all(const PipelineConfig& config) {
  cmd_preprocess(config);
  cmd_analyze(config);
  cmd_report(config);
}

TEST(PipelineTest, AnalyzeNeedsSeeds) {
  Fixture f(default_synth(), false);
  EXPECT_THROW(cmd_analyze(f.config), ConfigError);
  apply_setting(f.config, "dtw_seed", "1");
  apply_setting(f.config, "classify_seed", "1");
  EXPECT_THROW(cmd_analyze(f.config), ConfigError);
}

TEST(PipelineTest, ReportWithoutAnalyzeFails) {
  Fixture f(default_synth());
  cmd_preprocess(f.config);
  try {
    cmd_report(f.config);
    FAIL() << "report ran without analyze outputs";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "report");
    EXPECT_EQ(std::string(e.what()), "report: analyze stage missing");
  }
}

TEST(PipelineTest, MissingInputIsAPreprocessError) {
  Fixture f(default_synth());
  f.config.input_dir = f.dir.path() / "nowhere";
  try {
    cmd_preprocess(f.config);
    FAIL() << "preprocess ran without input";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "preprocess");
  }
}

TEST(PipelineTest, AnalyzeRunsPreprocessWhenNeeded) {
  Fixture f(default_synth());
  cmd_analyze(f.config);
  EXPECT_TRUE(fs::exists(f.config.output_dir / "preprocess" / "dense_usage.csv"));
  EXPECT_TRUE(fs::exists(f.config.output_dir / "analyze" / "anomaly_scores.csv"));
}

TEST(PipelineTest, RepeatedRunsAreByteIdentical) {
  Fixture f(default_synth());
  run_all(f.config);
  auto second = f.config;
  second.output_dir = f.dir.path() / "out2";
  run_all(second);
  const auto a = tree_bytes(f.config.output_dir);
  const auto b = tree_bytes(second.output_dir);
  EXPECT_GE(a.size(), 20u);
  EXPECT_EQ(a, b);
}

TEST(PipelineTest, SeedChangesSampledStandards) {
  Fixture f(default_synth());
  cmd_analyze(f.config);
  const auto one = read_text(f.config.output_dir / "analyze" / "dtw_report.json");
  apply_setting(f.config, "seed", "4");
  cmd_analyze(f.config);
  EXPECT_NE(read_text(f.config.output_dir / "analyze" / "dtw_report.json"), one);
}

TEST(PipelineTest, ReportSummarizesTheRun) {
  Fixture f(default_synth());
  run_all(f.config);
  const auto report = nlohmann::json::parse(
      read_text(f.config.output_dir / "report" / "report.json"));
  EXPECT_EQ(report["schema_version"], std::string(kReportSchemaVersion));
  EXPECT_EQ(report["machines"], 64);
  EXPECT_EQ(report["intervals"], 24);
  const auto& counts = report["classification"]["counts"];
  EXPECT_EQ(counts["Type1"], 40);
  EXPECT_EQ(counts["Type6"], 6);
  EXPECT_EQ(counts["Type8"], 1);
  EXPECT_EQ(report["anomalies"]["top"].size(), 25u);
  for (const auto& plot : report["plots"]) {
    EXPECT_TRUE(fs::exists(f.config.output_dir / "report" / plot.get<std::string>()))
        << plot;
  }
  const auto manifest = nlohmann::json::parse(
      read_text(f.config.output_dir / "report" / "manifest.json"));
  EXPECT_EQ(manifest["stage"], "report");
  for (const auto& output : manifest["outputs"]) {
    EXPECT_EQ(output["sha256"],
              sha256_file(f.config.output_dir / output["path"].get<std::string>()));
  }
}

TEST(PipelineTest, IdleMachineTopsTheRanking) {
  auto synth = default_synth();
  synth.quotas = {63, 1, 0, 0, 0, 0, 0, 0};
  synth.plants = {{64, AnomalyKind::kIdle, {}}};
  Fixture f(synth);
  run_all(f.config);
  const auto report = nlohmann::json::parse(
      read_text(f.config.output_dir / "analyze" / "anomaly_report.json"));
  EXPECT_EQ(report["top"][0]["machine"], 64);
  EXPECT_EQ(report["top"][0]["category"], "Type2");
  EXPECT_EQ(report["top"][0]["causes"], nlohmann::json::array({"NoWorkloadsScheduling"}));
}

TEST(PipelineTest, RepairLogMatchesPlantedGaps) {
  auto synth = default_synth();
  synth.gaps = {{5, UsageMetric::kCpu, 3, 4},
                {6, UsageMetric::kDisk, 10, 10},
                {11, std::nullopt, 0, 24}};
  Fixture f(synth);
  cmd_preprocess(f.config);
  std::set<std::tuple<MachineId, std::string, Seconds>> planted, repaired;
  for (const auto& g : f.truth.gaps) {
    planted.insert({g.machine, std::string(to_string(g.metric)), g.timestamp});
  }
  std::ifstream in(f.config.output_dir / "preprocess" / "repair_log.csv");
  std::string line;
  std::getline(in, line);
  ASSERT_EQ(line, "machine,metric,timestamp,method,value");
  std::map<std::string, int> methods;
  while (std::getline(in, line)) {
    const auto fields = csv::split(line);
    repaired.insert({static_cast<MachineId>(*csv::parse_int(fields[0])),
                     std::string(fields[1]), *csv::parse_int(fields[2])});
    ++methods[std::string(fields[3])];
  }
  EXPECT_EQ(planted, repaired);
  EXPECT_EQ(methods["Interpolated"], 3);
  EXPECT_EQ(methods["ZeroFilled"], 6 * 25);
  const auto summary = nlohmann::json::parse(
      read_text(f.config.output_dir / "preprocess" / "summary.json"));
  EXPECT_EQ(summary["zero_filled_machines"], nlohmann::json::array({11}));
}

TEST(PipelineTest, ExplicitStandardsAreUsed) {
  Fixture f(default_synth());
  apply_setting(f.config, "standards", "3,9");
  cmd_analyze(f.config);
  const auto dtw = nlohmann::json::parse(
      read_text(f.config.output_dir / "analyze" / "dtw_report.json"));
  EXPECT_EQ(dtw["standards"], nlohmann::json::array({3, 9}));
}

}  // namespace
}  // namespace trace_insight
