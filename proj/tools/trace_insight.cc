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

// trace-insight <synth|preprocess|analyze|report|run> [options]

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "trace_insight/pipeline.h"
#include "trace_insight/synth.h"

namespace ti = trace_insight;

namespace {

// Config-file path plus command-line overrides, applied in the order below.
struct StageArgs {
  std::string config;
  std::string input;
  std::string output;
  std::vector<std::string> set;
  std::optional<std::string> sample_num, standards, threshold, seed, k,
      max_iter, label_thresholds, trees, subsample, mode, top_n;
  bool normalized = false;
};

void add_stage_options(CLI::App* cmd, StageArgs& a) {
  cmd->add_option("--config", a.config, "flat key=value config file");
  cmd->add_option("--input", a.input, "trace directory (input_dir)");
  cmd->add_option("--output", a.output, "output directory (output_dir)");
  cmd->add_option("--set", a.set, "extra key=value overrides");
  cmd->add_option("--sample-num", a.sample_num, "DTW sample size");
  cmd->add_option("--standards", a.standards,
                  "explicit standard machines, comma separated");
  cmd->add_option("--threshold", a.threshold, "DTW abnormality threshold");
  cmd->add_option("--seed", a.seed, "seed for every randomized stage");
  cmd->add_flag("--normalized", a.normalized, "report (1/K) sqrt(dtw)");
  cmd->add_option("--k", a.k, "number of k-means clusters");
  cmd->add_option("--max-iter", a.max_iter, "k-means iteration cap");
  cmd->add_option("--label-thresholds", a.label_thresholds,
                  "always,none,split,short_gap");
  cmd->add_option("--trees", a.trees, "isolation trees");
  cmd->add_option("--subsample", a.subsample, "isolation tree subsample size");
  cmd->add_option("--mode", a.mode, "per-machine-mean or per-interval");
  cmd->add_option("--top-n", a.top_n, "ranked anomalies in the report");
}

ti::PipelineConfig resolve(const StageArgs& a) {
  ti::PipelineConfig c =
      a.config.empty() ? ti::PipelineConfig{} : ti::load_config(a.config);
  const auto set = [&](const char* key, const std::optional<std::string>& v) {
    if (v) ti::apply_setting(c, key, *v);
  };
  if (!a.input.empty()) ti::apply_setting(c, "input_dir", a.input);
  if (!a.output.empty()) ti::apply_setting(c, "output_dir", a.output);
  for (const auto& kv : a.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ti::ConfigError("--set expects key=value, got '" + kv + "'");
    }
    ti::apply_setting(c, kv.substr(0, eq), kv.substr(eq + 1));
  }
  set("sample_num", a.sample_num);
  set("standards", a.standards);
  set("threshold", a.threshold);
  set("seed", a.seed);
  set("k", a.k);
  set("max_iter", a.max_iter);
  set("trees", a.trees);
  set("subsample", a.subsample);
  set("mode", a.mode);
  set("top_n", a.top_n);
  if (a.normalized) ti::apply_setting(c, "normalized", "true");
  if (a.label_thresholds) {
    const auto parts = ti::csv::split(*a.label_thresholds, ',');
    if (parts.size() != 4) {
      throw ti::ConfigError("--label-thresholds expects always,none,split,short_gap");
    }
    const char* keys[] = {"label_always", "label_none", "label_split",
                          "label_short_gap"};
    for (std::size_t i = 0; i < 4; ++i) ti::apply_setting(c, keys[i], parts[i]);
  }
  return c;
}

void report(const std::string& stage, const ti::StageSummary& summary) {
  for (const auto& w : summary.warnings) {
    std::cerr << "[" << stage << "] warning: " << w << '\n';
  }
  std::cerr << "[" << stage << "] done";
  for (const auto& [k, v] : summary.row_counts) std::cerr << ' ' << k << '=' << v;
  std::cerr << '\n';
}

struct SynthArgs {
  int machines = 64;
  std::string quotas;
  std::string plants;
  std::string gaps;
  double noise = 0.02;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  long long grid_start = 39600;
  long long grid_step = 300;
  long long intervals = 24;
};

int run_synth(const SynthArgs& a) {
  if (!a.seed) throw ti::ConfigError("synth needs --seed");
  ti::SynthConfig config;
  config.machine_count = a.machines;
  config.start = a.grid_start;
  config.step = a.grid_step;
  config.end = a.grid_start + a.intervals * a.grid_step;
  if (a.quotas.empty()) {
    config.quotas[0] = static_cast<std::size_t>(a.machines);
  } else {
    config.quotas = ti::parse_quotas(a.quotas);
  }
  config.plants = ti::parse_plants(a.plants);
  config.gaps = ti::parse_gap_plants(a.gaps);
  config.noise = a.noise;
  config.seed = *a.seed;
  const auto out = ti::generate_trace(config);
  std::filesystem::create_directories(a.out_dir);
  ti::write_trace_dir(out.bundle, a.out_dir);
  ti::write_ground_truth(out.truth, std::filesystem::path(a.out_dir) /
                                        "ground_truth.json");
  std::cerr << "[synth] wrote " << a.out_dir << " (grid_start=" << config.start
            << " grid_end=" << config.end << " grid_step=" << config.step
            << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Co-located cluster trace analysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(ti::kToolVersion));

  SynthArgs synth;
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic trace");
  synth_cmd->add_option("--machines", synth.machines, "machine count");
  synth_cmd->add_option("--quotas", synth.quotas,
                        "machines per type, Type1..Type8 (default all Type1)");
  synth_cmd->add_option("--plants", synth.plants,
                        "anomaly plants, e.g. 3:Idle,7:HeavyOnline");
  synth_cmd->add_option("--gaps", synth.gaps,
                        "gap plants, e.g. 5:cpu:3-4,9:all:0-24");
  synth_cmd->add_option("--noise", synth.noise, "usage noise (fraction)");
  synth_cmd->add_option("--seed", synth.seed, "generator seed")->required();
  synth_cmd->add_option("--out-dir", synth.out_dir, "output directory")
      ->required();
  synth_cmd->add_option("--grid-start", synth.grid_start, "first timestamp");
  synth_cmd->add_option("--grid-step", synth.grid_step, "interval length (s)");
  synth_cmd->add_option("--intervals", synth.intervals, "interval count");

  StageArgs pre, ana, rep, all;
  auto* pre_cmd = app.add_subcommand("preprocess", "repair and filter a trace");
  add_stage_options(pre_cmd, pre);
  auto* ana_cmd = app.add_subcommand("analyze", "similarity, categories, anomalies");
  add_stage_options(ana_cmd, ana);
  auto* rep_cmd = app.add_subcommand("report", "assemble the JSON report");
  add_stage_options(rep_cmd, rep);
  auto* run_cmd = app.add_subcommand("run", "preprocess, analyze and report");
  add_stage_options(run_cmd, all);

  CLI11_PARSE(app, argc, argv);

  std::string stage = "config";
  try {
    if (*synth_cmd) {
      stage = "synth";
      return run_synth(synth);
    }
    if (*pre_cmd) {
      stage = "preprocess";
      report(stage, ti::cmd_preprocess(resolve(pre)));
    } else if (*ana_cmd) {
      stage = "analyze";
      report(stage, ti::cmd_analyze(resolve(ana)));
    } else if (*rep_cmd) {
      stage = "report";
      report(stage, ti::cmd_report(resolve(rep)));
    } else if (*run_cmd) {
      const auto config = resolve(all);
      stage = "preprocess";
      report(stage, ti::cmd_preprocess(config));
      stage = "analyze";
      report(stage, ti::cmd_analyze(config));
      stage = "report";
      report(stage, ti::cmd_report(config));
    }
  } catch (const ti::StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "[" << stage << "] error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
