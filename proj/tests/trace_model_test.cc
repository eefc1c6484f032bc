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

#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "test_util.h"
#include "trace_insight/random.h"
#include "trace_insight/synth.h"

namespace trace_insight {
namespace {

using testing::TempDir;
using testing::read_text;
using testing::write_text;

std::vector<std::string_view> fields(const std::string& line) {
  return csv::split(line);
}

TEST(IntervalGridTest, ReferenceGridHas144Timestamps) {
  const auto grid = build_interval_grid(39600, 82500, 300);
  EXPECT_EQ(grid.timestamp_count(), 144u);
  EXPECT_EQ(grid.interval_count(), 143u);
  for (std::size_t x = 0; x < grid.interval_count(); ++x) {
    EXPECT_EQ(grid.timestamp(x + 1) - grid.timestamp(x), 300);
    EXPECT_EQ(grid.interval(x).index, x);
  }
}

TEST(IntervalGridTest, SingleInterval) {
  const auto grid = build_interval_grid(0, 300, 300);
  EXPECT_EQ(grid.timestamp_count(), 2u);
  EXPECT_EQ(grid.interval_count(), 1u);
  EXPECT_EQ(grid.interval(0), (Interval{0, 0, 300}));
}

TEST(IntervalGridTest, RejectsBadSpans) {
  EXPECT_THROW(build_interval_grid(0, 301, 300), std::invalid_argument);
  EXPECT_THROW(build_interval_grid(300, 300, 300), std::invalid_argument);
  EXPECT_THROW(build_interval_grid(0, 300, 0), std::invalid_argument);
}

TEST(IntervalGridTest, SlotLookup) {
  const auto grid = build_interval_grid(600, 1500, 300);
  EXPECT_EQ(grid.sample_slot(600), 0u);
  EXPECT_EQ(grid.sample_slot(899), 0u);
  EXPECT_EQ(grid.sample_slot(1500), 3u);
  EXPECT_EQ(grid.sample_slot(1799), 3u);
  EXPECT_FALSE(grid.sample_slot(1800));
  EXPECT_FALSE(grid.sample_slot(599));
  EXPECT_EQ(grid.interval_of(1499), 2u);
  EXPECT_FALSE(grid.interval_of(1500));
}

TEST(RowParseTest, ServerUsageConvertsPercents) {
  std::string error;
  auto r = parse_server_usage(fields("39600,7,25.5,40,60,1.5,2,3"), &error);
  ASSERT_TRUE(r) << error;
  EXPECT_EQ(r->timestamp, 39600);
  EXPECT_EQ(r->machine, 7);
  EXPECT_DOUBLE_EQ(r->cpu, 0.255);
  EXPECT_DOUBLE_EQ(r->mem, 0.40);
  EXPECT_DOUBLE_EQ(r->load15, 3.0);
}

TEST(RowParseTest, ServerUsageOutOfRangePercentIsRejected) {
  std::string error;
  EXPECT_FALSE(parse_server_usage(fields("39600,7,25,120,60,1,1,1"), &error));
  EXPECT_NE(error.find("mem"), std::string::npos);
}

TEST(RowParseTest, EmptyServerMetricIsMissing) {
  std::string error;
  auto r = parse_server_usage(fields("39600,7,,40,60,1,1,1"), &error);
  ASSERT_TRUE(r) << error;
  EXPECT_TRUE(std::isnan(r->cpu));
}

TEST(RowParseTest, TerminatedInstanceNeedsTimestamps) {
  std::string error;
  EXPECT_FALSE(parse_batch_instance(
      fields("0,100,1,1,5,Terminated,1,1,1.0,0.5,0.01,0.005"), &error));
  EXPECT_FALSE(parse_batch_instance(
      fields("200,100,1,1,5,Terminated,1,1,1.0,0.5,0.01,0.005"), &error));
  EXPECT_TRUE(parse_batch_instance(
      fields("0,0,1,1,5,Failed,1,1,1.0,0.5,0.01,0.005"), &error));
}

TEST(RowParseTest, AverageCpuMayNotExceedMax) {
  std::string error;
  EXPECT_FALSE(parse_batch_instance(
      fields("100,200,1,1,5,Terminated,1,1,1.0,1.5,0.01,0.005"), &error));
}

TEST(RowParseTest, InterruptedSpellingVariantsAccepted) {
  std::string error;
  for (const char* s : {"Interrupted", "Interupted"}) {
    auto r = parse_batch_instance(
        fields(std::string("100,200,1,1,5,") + s + ",1,1,1.0,0.5,0.01,0.005"),
        &error);
    ASSERT_TRUE(r) << s << ": " << error;
    EXPECT_EQ(r->status, BatchInstanceStatus::kInterrupted);
  }
}

TEST(RowParseTest, ContainerEventCpuSet) {
  std::string error;
  auto e = parse_container_event(fields("0,Create,12,3,4,0.05,0.01,1|2|3|4"),
                                 &error);
  ASSERT_TRUE(e) << error;
  EXPECT_EQ(e->cpu_set, (std::vector<std::int32_t>{1, 2, 3, 4}));
  EXPECT_DOUBLE_EQ(e->mem_req, 0.05);
}

TEST(RowParseTest, MachineEventTypes) {
  std::string error;
  auto e = parse_machine_event(fields("50623,689,softerror,disk full,,,"),
                               &error);
  ASSERT_TRUE(e) << error;
  EXPECT_EQ(e->type, MachineEventType::kSoftError);
  EXPECT_EQ(e->detail, "disk full");
  EXPECT_FALSE(parse_machine_event(fields("0,1,reboot,,64,1,1"), &error));
}

TEST(CsvTest, PercentTextRoundTrips) {
  Rng rng(11);
  for (int i = 0; i < 20000; ++i) {
    const int decimals = static_cast<int>(rng.index(7));
    const double scale = std::pow(10.0, decimals);
    const double pct = std::round(rng.uniform(0, 100) * scale) / scale;
    char text[64];
    std::snprintf(text, sizeof(text), "%.*f", decimals, pct);
    const double fraction = *csv::parse_double(text) / 100.0;
    const std::string back = csv::format_percent(fraction);
    EXPECT_EQ(*csv::parse_double(back), *csv::parse_double(text)) << text;
  }
}

TEST(CsvTest, ParseIntAcceptsIntegralDecimals) {
  EXPECT_EQ(csv::parse_int("39600"), 39600);
  EXPECT_EQ(csv::parse_int("39600.0"), 39600);
  EXPECT_FALSE(csv::parse_int("39600.5"));
  EXPECT_FALSE(csv::parse_int("abc"));
}

TraceBundle small_bundle(std::size_t intervals = 6) {
  SynthConfig config;
  config.machine_count = 6;
  config.end = static_cast<Seconds>(intervals) * 300;
  config.quotas = {2, 1, 1, 1, 1, 0, 0, 0};
  config.seed = 5;
  return generate_trace(config).bundle;
}

TEST(TraceDirTest, WriteThenParseIsLossless) {
  TempDir dir("roundtrip");
  const auto bundle = small_bundle();
  write_trace_dir(bundle, dir.path());
  std::vector<RowDiagnostic> diagnostics;
  const auto parsed = parse_trace_dir(dir.path(), {}, &diagnostics);
  EXPECT_TRUE(diagnostics.empty());
  EXPECT_EQ(parsed, bundle);

  // Re-serializing the parsed bundle reproduces every byte.
  TempDir again("roundtrip2");
  write_trace_dir(parsed, again.path());
  for (auto f : kAllTraceFiles) {
    EXPECT_EQ(read_text(dir.path() / default_file_name(f)),
              read_text(again.path() / default_file_name(f)));
  }
}

TEST(TraceDirTest, HeaderAndPermutedColumns) {
  TempDir dir("profile");
  const auto bundle = small_bundle();
  TraceIoOptions options;
  options.has_header = true;
  options.profile.set_columns(TraceFile::kServerUsage, {7, 6, 5, 4, 3, 2, 1, 0});
  write_trace_dir(bundle, dir.path(), options);
  const auto first_line = read_text(dir.path() / "server_usage.csv");
  EXPECT_EQ(first_line.substr(0, first_line.find('\n')).find("39600"),
            std::string::npos);
  EXPECT_EQ(parse_trace_dir(dir.path(), options), bundle);
}

TEST(TraceDirTest, SchemaProfileRejectsBadMaps) {
  auto profile = SchemaProfile::standard();
  EXPECT_THROW(profile.set_columns(TraceFile::kServerUsage, {0, 1, 2}),
               std::invalid_argument);
  EXPECT_THROW(
      profile.set_columns(TraceFile::kServerUsage, {0, 1, 2, 3, 4, 5, 6, 6}),
      std::invalid_argument);
  EXPECT_THROW(
      profile.set_columns(TraceFile::kServerUsage, {0, 1, 2, 3, 4, 5, 6, -1}),
      std::invalid_argument);
}

TEST(TraceDirTest, MissingFileIsFatal) {
  TempDir dir("missing");
  write_trace_dir(small_bundle(), dir.path());
  std::filesystem::remove(dir.path() / "batch_task.csv");
  EXPECT_THROW(parse_trace_dir(dir.path()), ParseError);
}

TEST(TraceDirTest, EmptyUsageFileParses) {
  TempDir dir("empty");
  auto bundle = small_bundle();
  bundle.server_usage.clear();
  write_trace_dir(bundle, dir.path());
  const auto parsed = parse_trace_dir(dir.path());
  EXPECT_TRUE(parsed.server_usage.empty());
  EXPECT_EQ(parsed.machine_count, 6);
}

TEST(TraceDirTest, BadRowsAreSkippedUpToTheBound) {
  TempDir dir("skip");
  const auto bundle = small_bundle(24);  // 150 usage rows
  write_trace_dir(bundle, dir.path());
  const auto path = dir.path() / "server_usage.csv";
  const std::string good = read_text(path);
  write_text(path, good + "39600,1,25,120,60,1,1,1\n");
  std::vector<RowDiagnostic> diagnostics;
  const auto parsed = parse_trace_dir(dir.path(), {}, &diagnostics);
  ASSERT_EQ(diagnostics.size(), 1u);
  EXPECT_EQ(diagnostics[0].file, TraceFile::kServerUsage);
  EXPECT_EQ(parsed.server_usage.size(), bundle.server_usage.size());

  std::string many = good;
  for (int i = 0; i < 5; ++i) many += "39600,1,25,120,60,1,1,1\n";
  write_text(path, many);
  EXPECT_THROW(parse_trace_dir(dir.path()), ParseError);
  TraceIoOptions lenient;
  lenient.max_skip_ratio = 0.5;
  EXPECT_NO_THROW(parse_trace_dir(dir.path(), lenient));
}

TEST(ValidateTest, CompleteSyntheticTraceIsClean) {
  const auto bundle = small_bundle();
  const auto grid = build_interval_grid(0, 6 * 300, 300);
  const auto report = validate_bundle(bundle, grid);
  EXPECT_TRUE(report.empty());
  EXPECT_EQ(validate_bundle(bundle, grid), report);
}

TEST(ValidateTest, FlagsEachProblemKind) {
  auto bundle = small_bundle();
  const auto grid = build_interval_grid(0, 6 * 300, 300);
  std::erase_if(bundle.server_usage,
                [](const ServerUsageRecord& r) { return r.machine == 2; });
  std::erase_if(bundle.server_usage, [](const ServerUsageRecord& r) {
    return r.machine == 3 && r.timestamp == 600;
  });
  bundle.container_events.push_back(bundle.container_events.front());
  bundle.batch_instances.push_back(
      {0, 0, 9, 9, 1, BatchInstanceStatus::kFailed, 1, 1, 0, 0, 0, 0});
  const TraceBundle before = bundle;
  const auto report = validate_bundle(bundle, grid);
  EXPECT_EQ(bundle, before);
  EXPECT_EQ(report.machines_without_usage, std::vector<MachineId>{2});
  ASSERT_EQ(report.undersampled_machines.size(), 1u);
  EXPECT_EQ(report.undersampled_machines[0],
            (std::pair<MachineId, std::size_t>{3, 6}));
  EXPECT_EQ(report.duplicated_container_instances,
            std::vector<InstanceId>{bundle.container_events.front().instance});
  EXPECT_EQ(report.zero_timestamp_batch_instances,
            std::vector<std::size_t>{bundle.batch_instances.size() - 1});
}

}  // namespace
}  // namespace trace_insight
