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

#include "trace_insight/similarity.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

#include "trace_insight/random.h"

namespace trace_insight {
namespace {

double point_cost(const CurvePoint& a, const CurvePoint& b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    const double d = a[k] - b[k];
    sum += d * d;
  }
  return sum;
}

double median(std::vector<double> values) {
  const std::size_t n = values.size();
  std::sort(values.begin(), values.end());
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

}  // namespace

std::vector<ResourceCurve> resource_curves(
    const std::vector<MachineSeries>& series) {
  std::vector<ResourceCurve> curves;
  curves.reserve(series.size());
  for (const auto& s : series) {
    ResourceCurve c;
    c.machine = s.machine;
    c.points.resize(s.interval_count());
    for (std::size_t x = 0; x < s.interval_count(); ++x) {
      c.points[x] = {s.cpu[x], s.mem[x], s.disk[x]};
    }
    curves.push_back(std::move(c));
  }
  return curves;
}

DtwResult dtw_distance(std::span<const CurvePoint> q,
                       std::span<const CurvePoint> s,
                       const DtwOptions& options) {
  if (q.empty() || s.empty()) {
    throw std::invalid_argument("dtw needs two non-empty curves");
  }
  const std::size_t n = q.size();
  const std::size_t l = s.size();
  const std::size_t stride = l + 1;
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> dtw((n + 1) * stride, kInf);
  dtw[0] = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= l; ++j) {
      const double best =
          std::min({dtw[(i - 1) * stride + (j - 1)], dtw[(i - 1) * stride + j],
                    dtw[i * stride + (j - 1)]});
      dtw[i * stride + j] = point_cost(q[i - 1], s[j - 1]) + best;
    }
  }

  // Walk back along the optimal path; diagonal steps win ties.
  std::size_t i = n;
  std::size_t j = l;
  std::size_t k = 1;
  while (i > 1 || j > 1) {
    const double diag = (i > 1 && j > 1) ? dtw[(i - 1) * stride + (j - 1)] : kInf;
    const double up = i > 1 ? dtw[(i - 1) * stride + j] : kInf;
    const double left = j > 1 ? dtw[i * stride + (j - 1)] : kInf;
    if (diag <= up && diag <= left) {
      --i;
      --j;
    } else if (up <= left) {
      --i;
    } else {
      --j;
    }
    ++k;
  }

  DtwResult result;
  result.distance = dtw[n * stride + l];
  result.path_length = k;
  if (options.normalized) {
    result.distance = std::sqrt(result.distance) / static_cast<double>(k);
  }
  return result;
}

DtwResult dtw_distance(const ResourceCurve& q, const ResourceCurve& s,
                       const DtwOptions& options) {
  DtwResult result = dtw_distance(std::span<const CurvePoint>(q.points),
                                  std::span<const CurvePoint>(s.points),
                                  options);
  result.machine = q.machine;
  return result;
}

StandardSelection select_standard(const std::vector<ResourceCurve>& curves,
                                  std::size_t sample_num,
                                  std::size_t standard_count,
                                  std::uint64_t seed,
                                  const DtwOptions& options) {
  if (sample_num < 2) throw std::invalid_argument("sample_num must be >= 2");
  if (sample_num > curves.size()) {
    throw std::invalid_argument("sample_num exceeds the number of curves");
  }
  if (standard_count > sample_num) {
    throw std::invalid_argument("more standard curves than sampled curves");
  }
  Rng rng(seed);
  const auto picked = rng.sample(curves.size(), sample_num);

  std::vector<double> pairwise;
  pairwise.reserve(sample_num * (sample_num - 1) / 2);
  for (std::size_t a = 0; a < picked.size(); ++a) {
    for (std::size_t b = a + 1; b < picked.size(); ++b) {
      pairwise.push_back(
          dtw_distance(curves[picked[a]], curves[picked[b]], options).distance);
    }
  }

  StandardSelection selection;
  selection.standard_value = median(std::move(pairwise));
  for (auto i : picked) selection.sample.push_back(curves[i].machine);
  for (auto i : rng.sample(picked.size(), standard_count)) {
    selection.standards.push_back(selection.sample[i]);
  }
  return selection;
}

std::vector<DistanceRange> default_distance_ranges() {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  return {{0.0, 1.0}, {1.0, 2.0}, {2.0, 3.0}, {3.0, 5.0}, {5.0, kInf}};
}

DtwReport score_similarity(const std::vector<ResourceCurve>& curves,
                           const std::vector<MachineId>& standards,
                           double standard_value,
                           const SimilarityOptions& options) {
  if (standards.empty()) {
    throw std::invalid_argument("at least one standard curve is required");
  }
  std::map<MachineId, std::size_t> index;
  for (std::size_t i = 0; i < curves.size(); ++i) {
    index[curves[i].machine] = i;
  }
  std::vector<const ResourceCurve*> standard_curves;
  for (auto m : standards) {
    auto it = index.find(m);
    if (it == index.end()) {
      throw std::invalid_argument("standard machine " + std::to_string(m) +
                                  " has no resource curve");
    }
    standard_curves.push_back(&curves[it->second]);
  }

  DtwReport report;
  report.standard_value = standard_value;
  report.standards = standards;
  report.ranges = options.ranges;
  report.histogram.assign(options.ranges.size(), 0);
  report.threshold = options.threshold;

  for (const auto& curve : curves) {
    MachineSimilarity sim;
    sim.machine = curve.machine;
    double sum = 0.0;
    for (const auto* standard : standard_curves) {
      const double d = dtw_distance(curve, *standard, options.dtw).distance;
      sim.distances.push_back(d);
      sum += d;
    }
    sim.mean = sum / static_cast<double>(standard_curves.size());
    sim.abnormal = sim.mean > options.threshold;
    for (std::size_t r = 0; r < options.ranges.size(); ++r) {
      if (sim.mean >= options.ranges[r].lo && sim.mean < options.ranges[r].hi) {
        ++report.histogram[r];
        break;
      }
    }
    if (sim.abnormal) report.flagged.push_back(sim.machine);
    report.machines.push_back(std::move(sim));
  }
  std::sort(report.flagged.begin(), report.flagged.end());

  const std::size_t k = standards.size();
  std::vector<std::vector<double>> profiles(k);
  for (std::size_t s = 0; s < k; ++s) {
    for (const auto& m : report.machines) profiles[s].push_back(m.distances[s]);
    std::sort(profiles[s].begin(), profiles[s].end());
  }
  report.standard_gaps.assign(k, 0.0);
  if (k >= 2) {
    for (std::size_t s = 0; s < k; ++s) {
      double gap = 0.0;
      for (std::size_t i = 0; i < profiles[s].size(); ++i) {
        std::vector<double> column(k);
        for (std::size_t t = 0; t < k; ++t) column[t] = profiles[t][i];
        gap = std::max(gap, std::fabs(profiles[s][i] - median(column)));
      }
      report.standard_gaps[s] = gap;
      if (gap > options.suitability_gap) {
        report.unsuitable_standards.push_back(standards[s]);
      }
    }
  }
  return report;
}

}  // namespace trace_insight
