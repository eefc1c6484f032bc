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

#include "trace_insight/anomaly.h"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "trace_insight/random.h"

namespace trace_insight {
namespace {

MachineSeries series_of(MachineId m, std::size_t n, double cpu, int batch,
                        int containers) {
  MachineSeries s;
  s.machine = m;
  s.cpu.assign(n, cpu);
  s.mem.assign(n, cpu / 2);
  s.disk.assign(n, 0.4);
  s.batch_count.assign(n, batch);
  s.container_count.assign(n, containers);
  s.container_cpu.assign(n, 0.0);
  s.container_mem.assign(n, 0.0);
  s.batch_cpu.assign(n, 0.0);
  s.batch_mem.assign(n, 0.0);
  return s;
}

TEST(AveragePathLengthTest, KnownValues) {
  EXPECT_EQ(average_path_length(0), 0.0);
  EXPECT_EQ(average_path_length(1), 0.0);
  EXPECT_EQ(average_path_length(2), 1.0);
  EXPECT_NEAR(average_path_length(256), 10.244770920119917, 1e-9);
  // Against the exact harmonic sum, ln(m) + gamma is off by less than 1/(2m).
  for (std::size_t n : {3u, 10u, 256u, 5000u}) {
    double h = 0;
    for (std::size_t i = 1; i < n; ++i) h += 1.0 / static_cast<double>(i);
    const double m = static_cast<double>(n - 1);
    const double exact = 2 * h - 2.0 * m / static_cast<double>(n);
    EXPECT_LT(std::fabs(average_path_length(n) - exact), 1.0 / m) << n;
  }
}

TEST(FeatureMatrixTest, PerMachineMeans) {
  auto s = series_of(3, 4, 0.25, 2, 5);
  s.batch_count = {0, 2, 4, 6};
  s.cpu[1] = std::nan("");
  const auto m = build_feature_matrix({s});
  ASSERT_EQ(m.rows.size(), 1u);
  EXPECT_EQ(m.row_machine, std::vector<MachineId>{3});
  EXPECT_DOUBLE_EQ(m.rows[0][0], 0.75 / 4);  // NaN counts as 0
  EXPECT_DOUBLE_EQ(m.rows[0][3], 3.0);
  EXPECT_DOUBLE_EQ(m.rows[0][4], 5.0);
  EXPECT_EQ(m.rows[0].size(), kFeatureCount);
}

TEST(FeatureMatrixTest, ConstantCpuFeature) {
  const auto m = build_feature_matrix({series_of(1, 6, 0.25, 1, 1)});
  EXPECT_DOUBLE_EQ(m.rows[0][0], 0.25);
}

TEST(FeatureMatrixTest, ZeroFilledUsageWithBatch) {
  const auto m = build_feature_matrix({series_of(149, 6, 0.0, 12, 0)});
  EXPECT_EQ(m.rows[0][0], 0.0);
  EXPECT_EQ(m.rows[0][1], 0.0);
  EXPECT_GT(m.rows[0][3], 0.0);
}

TEST(FeatureMatrixTest, PerIntervalRowsAndZscore) {
  std::vector<MachineSeries> all = {series_of(1, 3, 0.2, 1, 1),
                                    series_of(2, 3, 0.6, 3, 1)};
  const auto m = build_feature_matrix(all, FeatureMode::kPerInterval);
  ASSERT_EQ(m.rows.size(), 6u);
  EXPECT_EQ(m.row_machine, (std::vector<MachineId>{1, 1, 1, 2, 2, 2}));
  const auto z = build_feature_matrix(all, FeatureMode::kPerMachineMean, true);
  EXPECT_NEAR(z.rows[0][0], -1.0, 1e-12);
  EXPECT_NEAR(z.rows[1][0], 1.0, 1e-12);
  EXPECT_EQ(z.rows[0][4], 0.0);  // constant column
  EXPECT_EQ(parse_feature_mode(to_string(FeatureMode::kPerInterval)),
            FeatureMode::kPerInterval);
  EXPECT_FALSE(parse_feature_mode("hourly"));
}

std::vector<std::vector<double>> cluster_with_outlier(std::uint64_t seed,
                                                      std::size_t* outlier) {
  Rng rng(seed);
  std::vector<std::vector<double>> rows;
  for (int i = 0; i < 63; ++i) {
    rows.push_back({rng.normal(0.3, 0.02), rng.normal(0.5, 0.02), rng.normal(0.4, 0.02),
                    rng.normal(40, 3), rng.normal(9, 1)});
  }
  *outlier = rng.index(64);
  rows.insert(rows.begin() + static_cast<std::ptrdiff_t>(*outlier),
              std::vector<double>{0.9, 0.1, 0.8, 90, 1});
  return rows;
}

FeatureMatrix as_matrix(const std::vector<std::vector<double>>& rows) {
  FeatureMatrix m;
  m.rows = rows;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    m.row_machine.push_back(static_cast<MachineId>(i + 1));
  }
  return m;
}

// Row whose nearest neighbour is farthest away.
std::size_t most_isolated(const std::vector<std::vector<double>>& rows) {
  std::size_t best = 0;
  double best_d = -1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    double nearest = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < rows.size(); ++j) {
      if (i == j) continue;
      double d = 0;
      for (std::size_t k = 0; k < rows[i].size(); ++k) {
        d += (rows[i][k] - rows[j][k]) * (rows[i][k] - rows[j][k]);
      }
      nearest = std::min(nearest, d);
    }
    if (nearest > best_d) {
      best_d = nearest;
      best = i;
    }
  }
  return best;
}

TEST(IsolationForestTest, FarOutlierScoresLowest) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::size_t outlier = 0;
    const auto rows = cluster_with_outlier(seed, &outlier);
    ASSERT_EQ(most_isolated(rows), outlier);
    const auto model = iforest_fit(rows, 100, 256, seed);
    const auto report = iforest_score(model, as_matrix(rows));
    EXPECT_EQ(report.ranking.front(), static_cast<MachineId>(outlier + 1));
    const auto top = rank_anomalies(report, 1);
    ASSERT_EQ(top.size(), 1u);
    EXPECT_EQ(top[0].machine, static_cast<MachineId>(outlier + 1));
    EXPECT_LT(top[0].score, 0.0);
  }
}

TEST(IsolationForestTest, ScoresStayInRange) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<std::vector<double>> rows(2 + rng.index(200));
    for (auto& r : rows) {
      r.resize(5);
      for (auto& v : r) v = rng.bernoulli(0.3) ? 0.0 : rng.uniform(-5, 5);
    }
    const auto model = iforest_fit(rows, 20, 1 + 1 + rng.index(300), trial);
    const auto report = iforest_score(model, as_matrix(rows));
    std::size_t negative = 0;
    for (const auto& s : report.scores) {
      EXPECT_GE(s.score, -0.5);
      EXPECT_LT(s.score, 0.5);
      negative += s.score < 0;
    }
    EXPECT_EQ(report.negative_count, negative);
    auto sorted = report.ranking;
    std::sort(sorted.begin(), sorted.end());
    EXPECT_EQ(sorted.size(), rows.size());
    EXPECT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
  }
}

TEST(IsolationForestTest, IdenticalRowsScoreAlike) {
  const std::vector<std::vector<double>> rows(30, {0.2, 0.3, 0.4, 5, 6});
  const auto model = iforest_fit(rows, 50, 256, 1);
  const auto report = iforest_score(model, as_matrix(rows));
  for (const auto& s : report.scores) EXPECT_EQ(s.score, report.scores[0].score);
  // Ties rank by machine id.
  for (std::size_t i = 0; i < report.ranking.size(); ++i) {
    EXPECT_EQ(report.ranking[i], static_cast<MachineId>(i + 1));
  }
}

TEST(IsolationForestTest, SubsampleClampsToRowCount) {
  std::size_t outlier;
  const auto rows = cluster_with_outlier(3, &outlier);
  const auto model = iforest_fit(rows, 10, 256, 3);
  EXPECT_EQ(model.subsample_size, 64u);
  EXPECT_EQ(model.height_limit, 6u);
  EXPECT_EQ(model.trees.size(), 10u);
  for (const auto& t : model.trees) EXPECT_EQ(t.nodes[0].size, 64u);
  const auto small = iforest_fit(rows, 10, 16, 3);
  EXPECT_EQ(small.height_limit, 4u);
  for (const auto& t : small.trees) EXPECT_EQ(t.nodes[0].size, 16u);
}

TEST(IsolationForestTest, FitErrors) {
  const std::vector<std::vector<double>> rows = {{1.0}, {2.0}};
  EXPECT_THROW(iforest_fit({}, 10, 8, 0), std::invalid_argument);
  EXPECT_THROW(iforest_fit(rows, 0, 8, 0), std::invalid_argument);
  EXPECT_THROW(iforest_fit(rows, 10, 1, 0), std::invalid_argument);
  EXPECT_THROW(iforest_fit({{1.0}, {2.0, 3.0}}, 10, 8, 0), std::invalid_argument);
}

TEST(IsolationForestTest, DeterministicForSeed) {
  std::size_t outlier;
  const auto rows = cluster_with_outlier(5, &outlier);
  const auto a = iforest_score(iforest_fit(rows, 100, 32, 9), as_matrix(rows));
  const auto b = iforest_score(iforest_fit(rows, 100, 32, 9), as_matrix(rows));
  EXPECT_EQ(a.scores, b.scores);
  EXPECT_EQ(a.ranking, b.ranking);
}

double mean_score_of_last(const std::vector<std::vector<double>>& rows) {
  double sum = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto model = iforest_fit(rows, 100, 256, seed);
    sum += anomaly_score(model, rows.back());
  }
  return sum / 20;
}

TEST(IsolationForestTest, ScoreNonIncreasingWithDistance) {
  // Degenerate cluster: every x beyond it is isolated by the first split.
  double previous = 1.0;
  for (double x : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
    std::vector<std::vector<double>> rows(40, {0.0});
    rows.push_back({x});
    const double s = mean_score_of_last(rows);
    EXPECT_LE(s, previous + 1e-12) << x;
    previous = s;
  }
  // Spread cluster on [0, 1].
  previous = 1.0;
  for (double x : {1.5, 2.0, 3.0, 5.0, 9.0, 17.0}) {
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 40; ++i) rows.push_back({i / 39.0});
    rows.push_back({x});
    const double s = mean_score_of_last(rows);
    EXPECT_LE(s, previous + 1e-12) << x;
    previous = s;
  }
}

TEST(IsolationForestTest, PerIntervalScoreIsMinimumOverRows) {
  std::vector<MachineSeries> all;
  for (MachineId m = 1; m <= 20; ++m) all.push_back(series_of(m, 6, 0.3, 10, 8));
  all[4].cpu[2] = 0.95;
  all[4].batch_count[2] = 60;
  const auto matrix = build_feature_matrix(all, FeatureMode::kPerInterval);
  const auto model = iforest_fit(matrix.rows, 100, 256, 2);
  const auto report = iforest_score(model, matrix);
  ASSERT_EQ(report.scores.size(), 20u);
  EXPECT_EQ(report.ranking.front(), 5);
  double lowest = 1;
  for (std::size_t r = 0; r < matrix.rows.size(); ++r) {
    if (matrix.row_machine[r] == 5) lowest = std::min(lowest, anomaly_score(model, matrix.rows[r]));
  }
  EXPECT_EQ(report.scores[4].score, lowest);
}

TEST(RankTest, TopNClampsToMachineCount) {
  std::size_t outlier;
  const auto rows = cluster_with_outlier(2, &outlier);
  const auto report = iforest_score(iforest_fit(rows, 50, 64, 2), as_matrix(rows));
  const auto all = rank_anomalies(report, 1000);
  ASSERT_EQ(all.size(), 64u);
  for (std::size_t i = 1; i < all.size(); ++i) {
    EXPECT_TRUE(all[i - 1].score < all[i].score ||
                (all[i - 1].score == all[i].score && all[i - 1].machine < all[i].machine));
  }
}

const IntervalGrid kGrid = build_interval_grid(39600, 39600 + 24 * 300, 300);

MachineEvent softerror(MachineId m, Seconds ts) {
  return {ts, m, MachineEventType::kSoftError, "", 0, 0, 0};
}

TEST(DiagnoseTest, SoftErrorNearBatchStop) {
  // Batch runs through interval 35, so it stops at t_36 = 50400.
  const IntervalGrid grid = build_interval_grid(39600, 39600 + 48 * 300, 300);
  auto s = series_of(689, 48, 0.2, 0, 0);
  for (std::size_t x = 0; x < 36; ++x) s.batch_count[x] = 30;
  EXPECT_EQ(batch_stop_interval(s), 36u);
  EXPECT_EQ(grid.timestamp(36), 50400);
  const auto tags = diagnose(WorkloadType::kType5, {softerror(689, 50623)}, s,
                             grid, {});
  EXPECT_EQ(tags, std::vector<CauseTag>{CauseTag::kSoftErrorWorkloadStop});
  EXPECT_TRUE(diagnose(WorkloadType::kType5, {softerror(689, 51200)}, s, grid, {}).empty());
}

TEST(DiagnoseTest, FrequentSoftErrors) {
  const auto s = series_of(7, 24, 0.2, 10, 8);
  std::vector<MachineEvent> events = {softerror(7, 40000), softerror(7, 41000),
                                      softerror(8, 42000)};
  EXPECT_TRUE(diagnose(WorkloadType::kType1, events, s, kGrid, {9, 10}).empty());
  events.push_back(softerror(7, 43000));
  EXPECT_EQ(diagnose(WorkloadType::kType1, events, s, kGrid, {9, 10}),
            std::vector<CauseTag>{CauseTag::kFrequentSoftError});
}

TEST(DiagnoseTest, TypeRules) {
  const auto s = series_of(1, 24, 0.0, 0, 0);
  EXPECT_EQ(diagnose(WorkloadType::kType2, {}, s, kGrid, {}),
            std::vector<CauseTag>{CauseTag::kNoWorkloadsScheduling});
  EXPECT_TRUE(diagnose(WorkloadType::kType2, {softerror(1, 40000)}, s, kGrid, {}).empty());
  EXPECT_EQ(diagnose(WorkloadType::kType3, {}, s, kGrid, {}),
            std::vector<CauseTag>{CauseTag::kNoOnlineServices});
  EXPECT_EQ(diagnose(WorkloadType::kType4, {}, s, kGrid, {}),
            std::vector<CauseTag>{CauseTag::kNoBatchJobs});
}

TEST(DiagnoseTest, OnlineServiceLoad) {
  const PopulationStats stats{9, 40};
  EXPECT_EQ(diagnose(WorkloadType::kType1, {}, series_of(1, 24, 0.3, 40, 18), kGrid, stats),
            std::vector<CauseTag>{CauseTag::kHeavierOnlineServices});
  EXPECT_EQ(diagnose(WorkloadType::kType1, {}, series_of(1039, 24, 0.3, 71, 1), kGrid, stats),
            std::vector<CauseTag>{CauseTag::kUnbalancedLighterOnline});
  EXPECT_TRUE(diagnose(WorkloadType::kType1, {}, series_of(1, 24, 0.3, 40, 9), kGrid, stats).empty());
  // The same profiles outside Type1 get no load tag.
  EXPECT_TRUE(diagnose(WorkloadType::kType6, {}, series_of(1, 24, 0.3, 40, 18), kGrid, stats).empty());
}

TEST(DiagnoseTest, PopulationMediansSkipIdleMachines) {
  std::vector<MachineSeries> all = {series_of(1, 4, 0.1, 0, 0), series_of(2, 4, 0.1, 10, 4),
                                    series_of(3, 4, 0.1, 20, 8), series_of(4, 4, 0.1, 30, 0)};
  const auto stats = population_stats(all);
  EXPECT_DOUBLE_EQ(stats.median_batch_count, 20.0);
  EXPECT_DOUBLE_EQ(stats.median_container_count, 6.0);
}

TEST(DiagnoseTest, OrderIndependentAndPerMachine) {
  const auto s = series_of(7, 24, 0.2, 10, 8);
  std::vector<MachineEvent> events;
  for (int i = 0; i < 3; ++i) events.push_back(softerror(7, 40000 + i));
  for (int i = 0; i < 5; ++i) events.push_back(softerror(8, 40000 + i));
  const auto a = diagnose(WorkloadType::kType1, events, s, kGrid, {9, 10});
  std::reverse(events.begin(), events.end());
  EXPECT_EQ(diagnose(WorkloadType::kType1, events, s, kGrid, {9, 10}), a);
}

}  // namespace
}  // namespace trace_insight
