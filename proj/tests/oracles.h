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

// Brute-force reference computations shared by the unit tests and the
// acceptance binary. Deliberately naive: each one is checked by enumeration
// rather than by reusing library code.

#ifndef TRACE_INSIGHT_TESTS_ORACLES_H_
#define TRACE_INSIGHT_TESTS_ORACLES_H_

#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <utility>
#include <vector>

namespace trace_insight::oracle {

using Cell = std::pair<std::size_t, std::size_t>;
using Path = std::vector<Cell>;

// Every monotone warping path from (0,0) to (n-1,l-1) with unit steps.
inline void enumerate_paths(std::size_t n, std::size_t l, Path& prefix,
                            std::vector<Path>& out) {
  const auto [i, j] = prefix.back();
  if (i + 1 == n && j + 1 == l) {
    out.push_back(prefix);
    return;
  }
  const Cell steps[] = {{i + 1, j + 1}, {i + 1, j}, {i, j + 1}};
  for (const auto& c : steps) {
    if (c.first >= n || c.second >= l) continue;
    prefix.push_back(c);
    enumerate_paths(n, l, prefix, out);
    prefix.pop_back();
  }
}

inline std::vector<Path> all_paths(std::size_t n, std::size_t l) {
  std::vector<Path> out;
  Path prefix{{0, 0}};
  enumerate_paths(n, l, prefix, out);
  return out;
}

struct PathMinimum {
  double cost = std::numeric_limits<double>::infinity();
  // Lengths of every path attaining the minimum.
  std::vector<std::size_t> lengths;
};

// Minimum over `paths` of the summed squared difference of scalar series.
template <typename Series>
PathMinimum min_over_paths(const Series& q, const Series& s,
                           const std::vector<Path>& paths) {
  PathMinimum best;
  for (const auto& p : paths) {
    double cost = 0.0;
    for (const auto& [i, j] : p) {
      const double d = static_cast<double>(q[i]) - static_cast<double>(s[j]);
      cost += d * d;
    }
    if (cost < best.cost) {
      best.cost = cost;
      best.lengths.clear();
    }
    if (cost == best.cost) best.lengths.push_back(p.size());
  }
  return best;
}

inline double choose2(double n) { return n * (n - 1) / 2; }

// Adjusted Rand index from the contingency table of two labelings.
template <typename A, typename B>
double adjusted_rand(const std::vector<A>& a, const std::vector<B>& b) {
  std::map<std::pair<A, B>, double> joint;
  std::map<A, double> rows;
  std::map<B, double> cols;
  for (std::size_t i = 0; i < a.size(); ++i) {
    joint[{a[i], b[i]}] += 1;
    rows[a[i]] += 1;
    cols[b[i]] += 1;
  }
  double index = 0, sum_rows = 0, sum_cols = 0;
  for (const auto& [k, v] : joint) index += choose2(v);
  for (const auto& [k, v] : rows) sum_rows += choose2(v);
  for (const auto& [k, v] : cols) sum_cols += choose2(v);
  const double total = choose2(static_cast<double>(a.size()));
  const double expected = sum_rows * sum_cols / total;
  const double max_index = (sum_rows + sum_cols) / 2;
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

}  // namespace trace_insight::oracle

#endif  // TRACE_INSIGHT_TESTS_ORACLES_H_
