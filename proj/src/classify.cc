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

#include "trace_insight/classify.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

#include "trace_insight/random.h"

namespace trace_insight {
namespace {

using Point = std::vector<double>;

double squared_distance(const Point& a, const Point& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sum += d * d;
  }
  return sum;
}

struct Run {
  std::vector<Point> centroids;
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
  std::vector<double> history;
  std::size_t iterations = 0;
};

std::vector<Point> kmeans_plus_plus(const std::vector<Point>& points,
                                    std::size_t k, Rng& rng) {
  std::vector<Point> centers;
  centers.push_back(points[rng.index(points.size())]);
  std::vector<double> d2(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    d2[i] = squared_distance(points[i], centers[0]);
  }
  while (centers.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t chosen = 0;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double cumulative = 0.0;
      chosen = points.size() - 1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        cumulative += d2[i];
        if (d2[i] > 0.0 && target < cumulative) {
          chosen = i;
          break;
        }
      }
      while (d2[chosen] == 0.0) --chosen;  // never re-pick an existing center
    }
    centers.push_back(points[chosen]);
    for (std::size_t i = 0; i < points.size(); ++i) {
      d2[i] = std::min(d2[i], squared_distance(points[i], centers.back()));
    }
  }
  return centers;
}

Run lloyd(const std::vector<Point>& points, std::vector<Point> centroids,
          std::size_t max_iter) {
  const std::size_t n = points.size();
  const std::size_t k = centroids.size();
  const std::size_t dim = points.front().size();
  Run run;
  run.assignments.assign(n, k);  // k = unassigned
  std::vector<double> cost(n, 0.0);

  for (std::size_t iter = 0; iter < std::max<std::size_t>(max_iter, 1);
       ++iter) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t best = 0;
      double best_d = squared_distance(points[i], centroids[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = squared_distance(points[i], centroids[c]);
        if (d < best_d) {
          best_d = d;
          best = c;
        }
      }
      if (run.assignments[i] != best) changed = true;
      run.assignments[i] = best;
      cost[i] = best_d;
      inertia += best_d;
    }
    run.history.push_back(inertia);
    run.inertia = inertia;
    run.iterations = iter + 1;
    if (!changed) break;

    std::vector<Point> sums(k, Point(dim, 0.0));
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[run.assignments[i]];
      for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
      ++sizes[run.assignments[i]];
    }
    std::vector<bool> taken(n, false);
    for (std::size_t c = 0; c < k; ++c) {
      if (sizes[c] > 0) {
        for (std::size_t d = 0; d < dim; ++d) {
          centroids[c][d] = sums[c][d] / static_cast<double>(sizes[c]);
        }
        continue;
      }
      // Re-seed an empty cluster at the point farthest from its centroid.
      std::size_t far = n;
      for (std::size_t i = 0; i < n; ++i) {
        if (taken[i]) continue;
        if (far == n || cost[i] > cost[far]) far = i;
      }
      taken[far] = true;
      centroids[c] = points[far];
    }
  }
  run.centroids = std::move(centroids);
  return run;
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

}  // namespace

std::string_view to_string(WorkloadType type) {
  switch (type) {
    case WorkloadType::kType1: return "Type1";
    case WorkloadType::kType2: return "Type2";
    case WorkloadType::kType3: return "Type3";
    case WorkloadType::kType4: return "Type4";
    case WorkloadType::kType5: return "Type5";
    case WorkloadType::kType6: return "Type6";
    case WorkloadType::kType7: return "Type7";
    case WorkloadType::kType8: return "Type8";
    case WorkloadType::kUnknown: return "Unknown";
  }
  return "Unknown";
}

std::optional<WorkloadType> parse_workload_type(std::string_view text) {
  for (std::size_t i = 0; i <= kWorkloadTypeCount; ++i) {
    if (to_string(workload_type(i)) == text) return workload_type(i);
  }
  return std::nullopt;
}

std::vector<std::uint8_t> binarize(std::span<const double> values) {
  std::vector<std::uint8_t> bits(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    bits[i] = values[i] != 0.0 ? 1 : 0;
  }
  return bits;
}

OccupancyVector binarize_occupancy(const MachineSeries& series) {
  const std::size_t n = series.interval_count();
  OccupancyVector v;
  v.machine = series.machine;
  v.bits.resize(2 * n);
  for (std::size_t x = 0; x < n; ++x) {
    v.bits[x] = series.batch_count[x] > 0 ? 1 : 0;
    v.bits[n + x] = series.container_count[x] > 0 ? 1 : 0;
  }
  return v;
}

std::optional<std::size_t> CategoryModel::cluster_of(MachineId machine) const {
  auto it = std::lower_bound(machines.begin(), machines.end(), machine);
  if (it == machines.end() || *it != machine) return std::nullopt;
  return assignments[static_cast<std::size_t>(it - machines.begin())];
}

WorkloadType CategoryModel::label_of(MachineId machine) const {
  const auto c = cluster_of(machine);
  if (!c || *c >= labels.size()) return WorkloadType::kUnknown;
  return labels[*c];
}

CategoryModel kmeans_fit(const std::vector<OccupancyVector>& matrix,
                         const KMeansOptions& options) {
  if (options.k == 0) throw std::invalid_argument("k must be positive");
  std::vector<const OccupancyVector*> rows;
  for (const auto& v : matrix) rows.push_back(&v);
  std::sort(rows.begin(), rows.end(),
            [](const auto* a, const auto* b) { return a->machine < b->machine; });

  std::vector<Point> points;
  std::set<std::vector<std::uint8_t>> distinct;
  for (const auto* v : rows) {
    if (!points.empty() && v->bits.size() != points.front().size()) {
      throw std::invalid_argument("occupancy vectors differ in length");
    }
    points.emplace_back(v->bits.begin(), v->bits.end());
    distinct.insert(v->bits);
  }
  if (options.k > distinct.size()) {
    throw std::invalid_argument("k = " + std::to_string(options.k) +
                                " exceeds the " +
                                std::to_string(distinct.size()) +
                                " distinct occupancy vectors");
  }

  Run best;
  bool have_best = false;
  for (std::size_t r = 0; r < std::max<std::size_t>(options.restarts, 1);
       ++r) {
    Rng rng(derive_seed(options.seed, r));
    Run run = lloyd(points, kmeans_plus_plus(points, options.k, rng),
                    options.max_iter);
    if (!have_best || run.inertia < best.inertia) {
      best = std::move(run);
      have_best = true;
    }
  }

  CategoryModel model;
  model.k = options.k;
  model.centroids = std::move(best.centroids);
  for (const auto* v : rows) model.machines.push_back(v->machine);
  model.assignments = std::move(best.assignments);
  model.labels.assign(options.k, WorkloadType::kUnknown);
  model.inertia = best.inertia;
  model.inertia_history = std::move(best.history);
  model.iterations = best.iterations;
  return model;
}

WorkloadType label_centroid(std::span<const double> centroid,
                            const LabelThresholds& t) {
  const std::size_t n = centroid.size() / 2;
  if (n == 0) return WorkloadType::kUnknown;
  const auto batch = centroid.subspan(0, n);
  const auto containers = centroid.subspan(n, n);
  const std::size_t split = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(t.split * static_cast<double>(n))),
      1, n);
  const double c_mean = mean_of(containers);
  const double b_mean = mean_of(batch);
  const double b_early = mean_of(batch.subspan(0, split));
  const double b_late =
      split < n ? mean_of(batch.subspan(split)) : 0.0;

  if (c_mean <= t.none && b_mean <= t.none) return WorkloadType::kType2;
  if (c_mean <= t.none) {
    if (b_mean >= t.always) return WorkloadType::kType3;
    if (b_late <= t.none && b_early > t.none) return WorkloadType::kType5;
    return WorkloadType::kUnknown;
  }
  if (b_mean <= t.none) return WorkloadType::kType4;

  // Co-located: classify by the runs where batch is absent.
  std::vector<std::pair<std::size_t, std::size_t>> gaps;  // [begin, end)
  for (std::size_t x = 0; x < n;) {
    if (batch[x] >= t.present) {
      ++x;
      continue;
    }
    std::size_t y = x;
    while (y < n && batch[y] < t.present) ++y;
    gaps.emplace_back(x, y);
    x = y;
  }
  if (gaps.empty()) {
    return b_mean >= t.always ? WorkloadType::kType1 : WorkloadType::kUnknown;
  }
  if (gaps.size() == 1) {
    const auto [begin, end] = gaps.front();
    if (begin == 0 && end == n) return WorkloadType::kUnknown;
    if (end == n) return WorkloadType::kType6;
    if (begin == 0) return WorkloadType::kType8;
    if (static_cast<double>(end - begin) <
        t.short_gap * static_cast<double>(n)) {
      return WorkloadType::kType7;
    }
  }
  return WorkloadType::kUnknown;
}

CategoryModel label_clusters(CategoryModel model, const LabelThresholds& t) {
  std::vector<std::size_t> sizes(model.k, 0);
  for (auto a : model.assignments) ++sizes[a];
  model.labels.assign(model.k, WorkloadType::kUnknown);
  model.diagnostics.clear();
  for (std::size_t c = 0; c < model.k; ++c) {
    model.labels[c] = label_centroid(model.centroids[c], t);
    if (model.labels[c] == WorkloadType::kUnknown) {
      model.diagnostics.push_back("cluster " + std::to_string(c) +
                                  " matches no workload type");
    }
  }
  // Keep the mapping injective.
  for (std::size_t c = 0; c < model.k; ++c) {
    if (model.labels[c] == WorkloadType::kUnknown) continue;
    for (std::size_t d = 0; d < model.k; ++d) {
      if (d == c || model.labels[d] != model.labels[c]) continue;
      const bool d_wins =
          sizes[d] > sizes[c] || (sizes[d] == sizes[c] && d < c);
      if (d_wins) {
        model.diagnostics.push_back(
            "cluster " + std::to_string(c) + " also matches " +
            std::string(to_string(model.labels[c])) + "; kept on cluster " +
            std::to_string(d));
        model.labels[c] = WorkloadType::kUnknown;
        break;
      }
    }
  }
  return model;
}

std::vector<CategorySummary> category_report(
    const CategoryModel& model, const std::vector<MachineSeries>& series) {
  std::vector<CategorySummary> summary(kWorkloadTypeCount + 1);
  for (std::size_t i = 0; i <= kWorkloadTypeCount; ++i) {
    summary[i].type = workload_type(i);
  }
  std::map<MachineId, const MachineSeries*> by_machine;
  for (const auto& s : series) by_machine[s.machine] = &s;

  std::vector<double> cpu(summary.size(), 0.0);
  std::vector<double> mem(summary.size(), 0.0);
  std::vector<double> disk(summary.size(), 0.0);
  for (std::size_t i = 0; i < model.machines.size(); ++i) {
    const MachineId m = model.machines[i];
    const auto type = model.labels.empty()
                          ? WorkloadType::kUnknown
                          : model.labels[model.assignments[i]];
    const auto t = static_cast<std::size_t>(type);
    summary[t].machines.push_back(m);
    if (auto it = by_machine.find(m); it != by_machine.end()) {
      cpu[t] += mean_of(it->second->cpu);
      mem[t] += mean_of(it->second->mem);
      disk[t] += mean_of(it->second->disk);
    }
  }
  for (std::size_t t = 0; t < summary.size(); ++t) {
    const auto count = static_cast<double>(summary[t].machines.size());
    if (count == 0) continue;
    summary[t].mean_cpu = cpu[t] / count;
    summary[t].mean_mem = mem[t] / count;
    summary[t].mean_disk = disk[t] / count;
  }
  return summary;
}

}  // namespace trace_insight
