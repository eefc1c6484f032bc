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

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "json.hpp"

namespace trace_insight {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

constexpr const char* kPreprocessDir = "preprocess";
constexpr const char* kAnalyzeDir = "analyze";
constexpr const char* kReportDir = "report";
constexpr std::array<const char*, 3> kPlotFiles = {
    "type_usage.csv", "score_distribution.csv", "dtw_histogram.csv"};

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " +
                    std::string(key));
}

std::int64_t to_int(std::string_view key, std::string_view value) {
  auto v = csv::parse_int(value);
  if (!v) bad_value(key, value);
  return *v;
}

std::size_t to_count(std::string_view key, std::string_view value) {
  const auto v = to_int(key, value);
  if (v < 0) bad_value(key, value);
  return static_cast<std::size_t>(v);
}

std::uint64_t to_seed(std::string_view key, std::string_view value) {
  std::uint64_t v = 0;
  const std::string s = trim(value);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    bad_value(key, value);
  }
  return v;
}

double to_real(std::string_view key, std::string_view value) {
  auto v = csv::parse_double(value);
  if (!v || !std::isfinite(*v)) bad_value(key, value);
  return *v;
}

bool to_bool(std::string_view key, std::string_view value) {
  const std::string s = trim(value);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  bad_value(key, value);
}

std::string seed_text(const std::optional<std::uint64_t>& seed) {
  return seed ? std::to_string(*seed) : std::string();
}

void write_json(const fs::path& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

ordered_json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return ordered_json::parse(in);
}

// JSON has no infinity; open-ended bounds are written as null.
ordered_json bound(double v) {
  return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(const fs::path& path) : out_(path), path_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
  }
  void row(const std::vector<std::string>& fields) {
    out_ << csv::join(fields) << '\n';
  }
  ~CsvWriter() { out_.flush(); }

 private:
  std::ofstream out_;
  fs::path path_;
};

std::string num(double v) { return csv::format_double(v); }
template <typename T>
std::string num_int(T v) {
  return std::to_string(v);
}

TraceIoOptions io_options(const PipelineConfig& config) {
  TraceIoOptions options;
  options.has_header = config.has_header;
  return options;
}

IntervalGrid grid_of(const PipelineConfig& config) {
  return build_interval_grid(config.grid_start, config.grid_end,
                             config.grid_step);
}

struct Manifest {
  std::string stage;
  std::vector<std::pair<std::string, fs::path>> inputs;
  std::vector<std::pair<std::string, fs::path>> outputs;
  std::map<std::string, std::int64_t> row_counts;
};

void write_manifest(const PipelineConfig& config, const Manifest& m,
                    const fs::path& path) {
  ordered_json j;
  j["tool"] = "trace-insight";
  j["version"] = kToolVersion;
  j["stage"] = m.stage;
  ordered_json cfg = ordered_json::object();
  for (const auto& [k, v] : config_snapshot(config)) cfg[k] = v;
  j["config"] = std::move(cfg);
  const auto files = [](const auto& list) {
    ordered_json arr = ordered_json::array();
    for (const auto& [name, p] : list) {
      arr.push_back({{"path", name}, {"sha256", sha256_file(p)}});
    }
    return arr;
  };
  j["inputs"] = files(m.inputs);
  ordered_json counts = ordered_json::object();
  for (const auto& [k, v] : m.row_counts) counts[k] = v;
  j["row_counts"] = std::move(counts);
  j["outputs"] = files(m.outputs);
  write_json(path, j);
}

void add_trace_inputs(const PipelineConfig& config, Manifest& m) {
  const auto options = io_options(config);
  for (auto f : kAllTraceFiles) {
    m.inputs.emplace_back(options.file_name(f),
                          config.input_dir / options.file_name(f));
  }
}

TraceBundle load_bundle(const PipelineConfig& config,
                        std::vector<RowDiagnostic>* diagnostics) {
  if (config.input_dir.empty()) throw ConfigError("input_dir is not set");
  return parse_trace_dir(config.input_dir, io_options(config), diagnostics);
}

void require_output(const PipelineConfig& config) {
  if (config.output_dir.empty()) throw ConfigError("output_dir is not set");
}

template <typename Fn>
StageSummary run_stage(const std::string& stage, Fn&& body) {
  try {
    return body();
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

double mean_finite(const std::vector<double>& values) {
  double sum = 0.0;
  for (double v : values) sum += std::isfinite(v) ? v : 0.0;
  return values.empty() ? 0.0 : sum / static_cast<double>(values.size());
}

}  // namespace

void apply_setting(PipelineConfig& c, std::string_view key_in,
                   std::string_view value_in) {
  const std::string key = trim(key_in);
  const std::string value = trim(value_in);
  if (key == "input_dir") {
    c.input_dir = value;
  } else if (key == "output_dir") {
    c.output_dir = value;
  } else if (key == "grid_start") {
    c.grid_start = to_int(key, value);
  } else if (key == "grid_end") {
    c.grid_end = to_int(key, value);
  } else if (key == "grid_step") {
    c.grid_step = to_int(key, value);
  } else if (key == "has_header") {
    c.has_header = to_bool(key, value);
  } else if (key == "boundary") {
    if (value == "hold") {
      c.boundary = BoundaryPolicy::kHold;
    } else if (value == "leave") {
      c.boundary = BoundaryPolicy::kLeave;
    } else {
      bad_value(key, value);
    }
  } else if (key == "max_mem_req") {
    c.max_mem_req = to_real(key, value);
  } else if (key == "batch_charge") {
    if (value == "faithful") {
      c.batch_charge = BatchChargeMode::kFaithful;
    } else if (value == "duration-weighted") {
      c.batch_charge = BatchChargeMode::kDurationWeighted;
    } else {
      bad_value(key, value);
    }
  } else if (key == "sample_num") {
    c.sample_num = to_count(key, value);
  } else if (key == "standard_count") {
    c.standard_count = to_count(key, value);
  } else if (key == "standards") {
    c.standards.clear();
    for (auto part : csv::split(value, ',')) {
      if (trim(part).empty()) continue;
      c.standards.push_back(static_cast<MachineId>(to_int(key, part)));
    }
  } else if (key == "threshold") {
    c.threshold = to_real(key, value);
  } else if (key == "normalized") {
    c.normalized = to_bool(key, value);
  } else if (key == "suitability_gap") {
    c.suitability_gap = to_real(key, value);
  } else if (key == "seed") {
    const auto s = to_seed(key, value);
    c.dtw_seed = c.classify_seed = c.anomaly_seed = s;
  } else if (key == "dtw_seed") {
    c.dtw_seed = to_seed(key, value);
  } else if (key == "classify_seed") {
    c.classify_seed = to_seed(key, value);
  } else if (key == "anomaly_seed") {
    c.anomaly_seed = to_seed(key, value);
  } else if (key == "k") {
    c.k = to_count(key, value);
  } else if (key == "max_iter") {
    c.max_iter = to_count(key, value);
  } else if (key == "restarts") {
    c.restarts = to_count(key, value);
  } else if (key == "label_always") {
    c.labels.always = to_real(key, value);
  } else if (key == "label_none") {
    c.labels.none = to_real(key, value);
  } else if (key == "label_split") {
    c.labels.split = to_real(key, value);
  } else if (key == "label_short_gap") {
    c.labels.short_gap = to_real(key, value);
  } else if (key == "label_present") {
    c.labels.present = to_real(key, value);
  } else if (key == "trees") {
    c.trees = to_count(key, value);
  } else if (key == "subsample") {
    c.subsample = to_count(key, value);
  } else if (key == "mode") {
    auto mode = parse_feature_mode(value);
    if (!mode) bad_value(key, value);
    c.mode = *mode;
  } else if (key == "zscore") {
    c.zscore = to_bool(key, value);
  } else if (key == "top_n") {
    c.top_n = to_count(key, value);
  } else if (key == "frequent_softerrors") {
    c.diagnose.frequent_softerrors = to_count(key, value);
  } else if (key == "heavier_factor") {
    c.diagnose.heavier_factor = to_real(key, value);
  } else if (key == "lighter_max_containers") {
    c.diagnose.lighter_max_containers = to_real(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

PipelineConfig parse_config(std::string_view text) {
  PipelineConfig config;
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) {
      line.resize(hash);
    }
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) +
                        ": expected key=value");
    }
    apply_setting(config, line.substr(0, eq), line.substr(eq + 1));
  }
  return config;
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  std::string text{std::istreambuf_iterator<char>(in), {}};
  return parse_config(text);
}

std::map<std::string, std::string> config_snapshot(const PipelineConfig& c) {
  std::string standards;
  for (auto m : c.standards) {
    if (!standards.empty()) standards += ',';
    standards += std::to_string(m);
  }
  return {
      {"grid_start", std::to_string(c.grid_start)},
      {"grid_end", std::to_string(c.grid_end)},
      {"grid_step", std::to_string(c.grid_step)},
      {"has_header", c.has_header ? "true" : "false"},
      {"boundary", c.boundary == BoundaryPolicy::kHold ? "hold" : "leave"},
      {"max_mem_req", num(c.max_mem_req)},
      {"batch_charge", c.batch_charge == BatchChargeMode::kFaithful
                           ? "faithful"
                           : "duration-weighted"},
      {"sample_num", std::to_string(c.sample_num)},
      {"standard_count", std::to_string(c.standard_count)},
      {"standards", standards},
      {"threshold", num(c.threshold)},
      {"normalized", c.normalized ? "true" : "false"},
      {"suitability_gap", num(c.suitability_gap)},
      {"dtw_seed", seed_text(c.dtw_seed)},
      {"k", std::to_string(c.k)},
      {"max_iter", std::to_string(c.max_iter)},
      {"restarts", std::to_string(c.restarts)},
      {"label_always", num(c.labels.always)},
      {"label_none", num(c.labels.none)},
      {"label_split", num(c.labels.split)},
      {"label_short_gap", num(c.labels.short_gap)},
      {"label_present", num(c.labels.present)},
      {"classify_seed", seed_text(c.classify_seed)},
      {"trees", std::to_string(c.trees)},
      {"subsample", std::to_string(c.subsample)},
      {"mode", std::string(to_string(c.mode))},
      {"zscore", c.zscore ? "true" : "false"},
      {"top_n", std::to_string(c.top_n)},
      {"frequent_softerrors", std::to_string(c.diagnose.frequent_softerrors)},
      {"heavier_factor", num(c.diagnose.heavier_factor)},
      {"lighter_max_containers", num(c.diagnose.lighter_max_containers)},
      {"anomaly_seed", seed_text(c.anomaly_seed)},
  };
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest.data(), &len);
  EVP_MD_CTX_free(ctx);
  static constexpr char kHex[] = "0123456789abcdef";
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex += kHex[digest[i] >> 4];
    hex += kHex[digest[i] & 0xF];
  }
  return hex;
}

StageSummary cmd_preprocess(const PipelineConfig& config) {
  return run_stage(kPreprocessDir, [&] {
    require_output(config);
    StageSummary summary;
    std::vector<RowDiagnostic> rejected;
    TraceBundle bundle = load_bundle(config, &rejected);
    const IntervalGrid grid = grid_of(config);
    for (const auto& d : rejected) {
      summary.warnings.push_back(
          std::string(default_file_name(d.file)) + ":" +
          std::to_string(d.line) + ": " + d.message);
    }

    const ValidationReport validation = validate_bundle(bundle, grid);
    const SupplementResult supplemented =
        supplement_server_usage(bundle, grid, config.boundary);
    const ContainerFilterResult filtered =
        filter_container_events(bundle.container_events, config.max_mem_req);

    const fs::path dir = config.output_dir / kPreprocessDir;
    fs::create_directories(dir);
    write_dense_usage_csv(supplemented.usage, dir / "dense_usage.csv");
    write_repair_log_csv(supplemented.repairs, dir / "repair_log.csv");
    {
      CsvWriter out(dir / "removed_container_events.csv");
      for (const auto& e : filtered.removed) out.row(format_fields(e));
    }

    std::map<std::string, std::int64_t> repairs = {
        {"Interpolated", 0}, {"ZeroFilled", 0}, {"BoundaryHeld", 0}};
    std::set<MachineId> zero_filled;
    for (const auto& r : supplemented.repairs) {
      ++repairs[std::string(to_string(r.method))];
      if (r.method == RepairMethod::kZeroFilled) zero_filled.insert(r.machine);
    }

    ordered_json s;
    s["machine_count"] = bundle.machine_count;
    s["timestamps"] = grid.timestamp_count();
    s["intervals"] = grid.interval_count();
    s["repairs"] = repairs;
    s["zero_filled_machines"] = zero_filled;
    s["machines_without_usage"] = validation.machines_without_usage;
    s["undersampled_machines"] = validation.undersampled_machines.size();
    s["duplicated_container_instances"] =
        validation.duplicated_container_instances.size();
    s["removed_container_events"] = filtered.removed.size();
    s["zero_timestamp_batch_instances"] =
        validation.zero_timestamp_batch_instances.size();
    s["rejected_rows"] = rejected.size();
    write_json(dir / "summary.json", s);

    summary.row_counts = {
        {"server_event", static_cast<std::int64_t>(bundle.events.size())},
        {"server_usage", static_cast<std::int64_t>(bundle.server_usage.size())},
        {"container_event",
         static_cast<std::int64_t>(bundle.container_events.size())},
        {"container_usage",
         static_cast<std::int64_t>(bundle.container_usage.size())},
        {"batch_task", static_cast<std::int64_t>(bundle.batch_tasks.size())},
        {"batch_instance",
         static_cast<std::int64_t>(bundle.batch_instances.size())},
        {"rejected_rows", static_cast<std::int64_t>(rejected.size())},
        {"dense_rows", static_cast<std::int64_t>(bundle.machine_count) *
                           static_cast<std::int64_t>(grid.timestamp_count())},
        {"repairs", static_cast<std::int64_t>(supplemented.repairs.size())},
        {"removed_container_events",
         static_cast<std::int64_t>(filtered.removed.size())},
    };

    Manifest m;
    m.stage = kPreprocessDir;
    add_trace_inputs(config, m);
    m.row_counts = summary.row_counts;
    for (const char* f : {"dense_usage.csv", "repair_log.csv",
                          "removed_container_events.csv", "summary.json"}) {
      m.outputs.emplace_back(std::string(kPreprocessDir) + "/" + f, dir / f);
    }
    write_manifest(config, m, dir / "manifest.json");
    return summary;
  });
}

StageSummary cmd_analyze(const PipelineConfig& config) {
  require_output(config);
  if (!config.dtw_seed || !config.classify_seed || !config.anomaly_seed) {
    throw ConfigError(
        "analyze needs explicit seeds (seed, or dtw_seed, classify_seed and "
        "anomaly_seed)");
  }
  const fs::path pre = config.output_dir / kPreprocessDir;
  StageSummary summary;
  if (!fs::exists(pre / "dense_usage.csv")) {
    summary = cmd_preprocess(config);
  }
  return run_stage(kAnalyzeDir, [&] {
    TraceBundle bundle = load_bundle(config, nullptr);
    const IntervalGrid grid = grid_of(config);
    const DenseUsage usage =
        read_dense_usage_csv(pre / "dense_usage.csv", bundle.machine_count, grid);
    bundle.container_events =
        filter_container_events(bundle.container_events, config.max_mem_req)
            .clean;

    AggregateDiagnostics diag;
    const auto container_aggs = aggregate_container_usage(bundle, grid, &diag);
    const auto batch_aggs =
        aggregate_batch_usage(bundle, grid, config.batch_charge, &diag);
    const auto series =
        build_machine_series(bundle, grid, usage, container_aggs, batch_aggs);
    if (series.empty()) throw std::runtime_error("trace has no machines");

    const fs::path dir = config.output_dir / kAnalyzeDir;
    fs::create_directories(dir / "plots");
    write_container_level_csv(container_aggs, dir / "container_level.csv");
    write_batch_level_csv(batch_aggs, dir / "batch_level.csv");
    write_server_level_csv(series, grid, dir / "server_level.csv");

    // Node similarity.
    const auto curves = resource_curves(series);
    DtwOptions dtw;
    dtw.normalized = config.normalized;
    const StandardSelection selection = select_standard(
        curves, config.sample_num, config.standard_count, *config.dtw_seed, dtw);
    SimilarityOptions sim_options;
    sim_options.threshold = config.threshold;
    sim_options.suitability_gap = config.suitability_gap;
    sim_options.dtw = dtw;
    const auto& standards =
        config.standards.empty() ? selection.standards : config.standards;
    const DtwReport dtw_report = score_similarity(
        curves, standards, selection.standard_value, sim_options);
    {
      CsvWriter out(dir / "dtw_distances.csv");
      std::vector<std::string> header = {"machine"};
      for (auto s : dtw_report.standards) header.push_back("dtw_" + std::to_string(s));
      header.insert(header.end(), {"mean", "abnormal"});
      out.row(header);
      for (const auto& m : dtw_report.machines) {
        std::vector<std::string> row = {num_int(m.machine)};
        for (double d : m.distances) row.push_back(num(d));
        row.push_back(num(m.mean));
        row.push_back(m.abnormal ? "1" : "0");
        out.row(row);
      }
    }
    {
      CsvWriter out(dir / "dtw_flagged.csv");
      out.row({"machine"});
      for (auto m : dtw_report.flagged) out.row({num_int(m)});
    }
    ordered_json dj;
    dj["standard_value"] = dtw_report.standard_value;
    dj["sample"] = selection.sample;
    dj["standards"] = dtw_report.standards;
    dj["normalized"] = config.normalized;
    dj["threshold"] = dtw_report.threshold;
    ordered_json hist = ordered_json::array();
    for (std::size_t r = 0; r < dtw_report.ranges.size(); ++r) {
      hist.push_back({{"lo", bound(dtw_report.ranges[r].lo)},
                      {"hi", bound(dtw_report.ranges[r].hi)},
                      {"count", dtw_report.histogram[r]}});
    }
    dj["histogram"] = std::move(hist);
    dj["flagged"] = dtw_report.flagged;
    dj["flagged_fraction"] = static_cast<double>(dtw_report.flagged.size()) /
                             static_cast<double>(dtw_report.machines.size());
    dj["standard_gaps"] = dtw_report.standard_gaps;
    dj["unsuitable_standards"] = dtw_report.unsuitable_standards;
    write_json(dir / "dtw_report.json", dj);
    for (auto s : dtw_report.unsuitable_standards) {
      summary.warnings.push_back("standard curve " + std::to_string(s) +
                                 " may not be suitable");
    }

    // Workload categories.
    std::vector<OccupancyVector> occupancy;
    for (const auto& s : series) occupancy.push_back(binarize_occupancy(s));
    std::set<std::vector<std::uint8_t>> distinct;
    for (const auto& v : occupancy) distinct.insert(v.bits);
    KMeansOptions km;
    km.k = std::min(config.k, distinct.size());
    if (km.k < config.k) {
      summary.warnings.push_back(
          "k lowered from " + std::to_string(config.k) + " to " +
          std::to_string(km.k) + ", the number of distinct occupancy vectors");
    }
    km.seed = *config.classify_seed;
    km.max_iter = config.max_iter;
    km.restarts = config.restarts;
    const CategoryModel model =
        label_clusters(kmeans_fit(occupancy, km), config.labels);
    const auto categories = category_report(model, series);
    {
      CsvWriter out(dir / "assignments.csv");
      out.row({"machine", "cluster", "label"});
      for (std::size_t i = 0; i < model.machines.size(); ++i) {
        out.row({num_int(model.machines[i]), num_int(model.assignments[i]),
                 std::string(to_string(model.labels[model.assignments[i]]))});
      }
    }
    ordered_json cj;
    cj["k"] = model.k;
    cj["inertia"] = model.inertia;
    cj["iterations"] = model.iterations;
    ordered_json counts = ordered_json::object();
    ordered_json types = ordered_json::array();
    for (const auto& c : categories) {
      counts[std::string(to_string(c.type))] = c.machines.size();
      types.push_back({{"type", to_string(c.type)},
                       {"count", c.machines.size()},
                       {"machines", c.machines},
                       {"mean_cpu", c.mean_cpu},
                       {"mean_mem", c.mean_mem},
                       {"mean_disk", c.mean_disk}});
    }
    cj["counts"] = std::move(counts);
    cj["types"] = std::move(types);
    ordered_json clusters = ordered_json::array();
    for (std::size_t c = 0; c < model.k; ++c) {
      clusters.push_back({{"cluster", c}, {"label", to_string(model.labels[c])}});
    }
    cj["clusters"] = std::move(clusters);
    cj["diagnostics"] = model.diagnostics;
    write_json(dir / "category_counts.json", cj);
    for (const auto& d : model.diagnostics) summary.warnings.push_back(d);

    // Anomalies.
    const FeatureMatrix features =
        build_feature_matrix(series, config.mode, config.zscore);
    const IsolationForestModel forest = iforest_fit(
        features.rows, config.trees, config.subsample, *config.anomaly_seed);
    AnomalyReport anomalies = iforest_score(forest, features);
    attach_causes(anomalies, model, bundle.events, series, grid,
                  config.diagnose);
    const auto tags_of = [&](MachineId m) {
      std::vector<std::string> tags;
      if (const auto* causes = anomalies.causes_of(m)) {
        for (auto t : *causes) tags.emplace_back(to_string(t));
      }
      return tags;
    };
    {
      CsvWriter out(dir / "anomaly_scores.csv");
      out.row({"machine", "score", "rank", "label", "tags"});
      std::map<MachineId, std::size_t> rank;
      for (std::size_t i = 0; i < anomalies.ranking.size(); ++i) {
        rank[anomalies.ranking[i]] = i + 1;
      }
      for (const auto& s : anomalies.scores) {
        std::string tags;
        for (const auto& t : tags_of(s.machine)) {
          if (!tags.empty()) tags += '|';
          tags += t;
        }
        out.row({num_int(s.machine), num(s.score), num_int(rank[s.machine]),
                 std::string(to_string(model.label_of(s.machine))), tags});
      }
    }
    ordered_json aj;
    aj["trees"] = forest.tree_count;
    aj["subsample"] = forest.subsample_size;
    aj["mode"] = to_string(config.mode);
    aj["machines"] = anomalies.scores.size();
    aj["negative_count"] = anomalies.negative_count;
    aj["top_n"] = config.top_n;
    ordered_json top = ordered_json::array();
    const auto ranked = rank_anomalies(anomalies, config.top_n);
    for (std::size_t i = 0; i < ranked.size(); ++i) {
      top.push_back({{"rank", i + 1},
                     {"machine", ranked[i].machine},
                     {"score", ranked[i].score},
                     {"category", to_string(model.label_of(ranked[i].machine))},
                     {"causes", tags_of(ranked[i].machine)}});
    }
    aj["top"] = std::move(top);
    write_json(dir / "anomaly_report.json", aj);

    // Plot data.
    {
      CsvWriter out(dir / "plots" / "type_usage.csv");
      out.row({"type", "interval", "timestamp", "machines", "cpu", "mem", "disk"});
      std::map<MachineId, const MachineSeries*> members;
      for (const auto& s : series) members[s.machine] = &s;
      for (const auto& c : categories) {
        if (c.machines.empty()) continue;
        for (std::size_t x = 0; x < grid.interval_count(); ++x) {
          std::vector<double> cpu, mem, disk;
          for (auto m : c.machines) {
            const auto* s = members.at(m);
            cpu.push_back(s->cpu[x]);
            mem.push_back(s->mem[x]);
            disk.push_back(s->disk[x]);
          }
          out.row({std::string(to_string(c.type)), num_int(x),
                   num_int(grid.timestamp(x)), num_int(c.machines.size()),
                   num(mean_finite(cpu)), num(mean_finite(mem)),
                   num(mean_finite(disk))});
        }
      }
    }
    {
      CsvWriter out(dir / "plots" / "score_distribution.csv");
      out.row({"rank", "machine", "score"});
      const auto all = rank_anomalies(anomalies, anomalies.ranking.size());
      for (std::size_t i = 0; i < all.size(); ++i) {
        out.row({num_int(i + 1), num_int(all[i].machine), num(all[i].score)});
      }
    }
    {
      CsvWriter out(dir / "plots" / "dtw_histogram.csv");
      out.row({"lo", "hi", "count"});
      for (std::size_t r = 0; r < dtw_report.ranges.size(); ++r) {
        const double hi = dtw_report.ranges[r].hi;
        out.row({num(dtw_report.ranges[r].lo), std::isfinite(hi) ? num(hi) : "inf",
                 num_int(dtw_report.histogram[r])});
      }
    }

    if (diag.unknown_instance_records > 0) {
      summary.warnings.push_back(std::to_string(diag.unknown_instance_records) +
                                 " container usage rows name unknown instances");
    }
    summary.row_counts = {
        {"machines", static_cast<std::int64_t>(series.size())},
        {"intervals", static_cast<std::int64_t>(grid.interval_count())},
        {"container_level_rows", static_cast<std::int64_t>(container_aggs.size())},
        {"batch_level_rows", static_cast<std::int64_t>(batch_aggs.size())},
        {"excluded_batch_instances",
         static_cast<std::int64_t>(diag.excluded_batch_instances)},
        {"dtw_flagged", static_cast<std::int64_t>(dtw_report.flagged.size())},
        {"anomaly_negative", static_cast<std::int64_t>(anomalies.negative_count)},
    };

    Manifest m;
    m.stage = kAnalyzeDir;
    add_trace_inputs(config, m);
    m.inputs.emplace_back(std::string(kPreprocessDir) + "/dense_usage.csv",
                          pre / "dense_usage.csv");
    m.row_counts = summary.row_counts;
    for (const char* f :
         {"container_level.csv", "batch_level.csv", "server_level.csv",
          "dtw_distances.csv", "dtw_flagged.csv", "dtw_report.json",
          "assignments.csv", "category_counts.json", "anomaly_scores.csv",
          "anomaly_report.json"}) {
      m.outputs.emplace_back(std::string(kAnalyzeDir) + "/" + f, dir / f);
    }
    for (const char* f : kPlotFiles) {
      m.outputs.emplace_back(std::string(kAnalyzeDir) + "/plots/" + f,
                             dir / "plots" / f);
    }
    write_manifest(config, m, dir / "manifest.json");
    return summary;
  });
}

StageSummary cmd_report(const PipelineConfig& config) {
  require_output(config);
  const fs::path pre = config.output_dir / kPreprocessDir;
  const fs::path ana = config.output_dir / kAnalyzeDir;
  for (const char* f :
       {"dtw_report.json", "category_counts.json", "anomaly_report.json"}) {
    if (!fs::exists(ana / f)) throw StageError(kReportDir, "analyze stage missing");
  }
  for (const char* f : kPlotFiles) {
    if (!fs::exists(ana / "plots" / f)) {
      throw StageError(kReportDir, "analyze stage missing");
    }
  }
  if (!fs::exists(pre / "summary.json")) {
    throw StageError(kReportDir, "preprocess stage missing");
  }
  return run_stage(kReportDir, [&] {
    const ordered_json pj = read_json(pre / "summary.json");
    const ordered_json dj = read_json(ana / "dtw_report.json");
    const ordered_json cj = read_json(ana / "category_counts.json");
    const ordered_json aj = read_json(ana / "anomaly_report.json");

    const fs::path dir = config.output_dir / kReportDir;
    fs::create_directories(dir / "plots");
    ordered_json plots = ordered_json::array();
    for (const char* f : kPlotFiles) {
      fs::copy_file(ana / "plots" / f, dir / "plots" / f,
                    fs::copy_options::overwrite_existing);
      plots.push_back(std::string("plots/") + f);
    }

    ordered_json r;
    r["schema_version"] = kReportSchemaVersion;
    r["tool_version"] = kToolVersion;
    r["machines"] = pj.at("machine_count");
    r["intervals"] = pj.at("intervals");
    r["preprocess"] = {
        {"repairs", pj.at("repairs")},
        {"zero_filled_machines", pj.at("zero_filled_machines")},
        {"removed_container_events", pj.at("removed_container_events")},
    };
    r["similarity"] = {
        {"standard_value", dj.at("standard_value")},
        {"standards", dj.at("standards")},
        {"threshold", dj.at("threshold")},
        {"histogram", dj.at("histogram")},
        {"flagged", dj.at("flagged")},
        {"flagged_fraction", dj.at("flagged_fraction")},
        {"unsuitable_standards", dj.at("unsuitable_standards")},
    };
    r["classification"] = {
        {"k", cj.at("k")},
        {"counts", cj.at("counts")},
        {"types", cj.at("types")},
        {"diagnostics", cj.at("diagnostics")},
    };
    r["anomalies"] = {
        {"negative_count", aj.at("negative_count")},
        {"top_n", aj.at("top_n")},
        {"top", aj.at("top")},
    };
    r["plots"] = std::move(plots);
    write_json(dir / "report.json", r);

    StageSummary summary;
    summary.row_counts = {
        {"top_anomalies", static_cast<std::int64_t>(aj.at("top").size())},
        {"flagged", static_cast<std::int64_t>(dj.at("flagged").size())},
    };
    Manifest m;
    m.stage = kReportDir;
    m.inputs = {{"preprocess/summary.json", pre / "summary.json"},
                {"analyze/dtw_report.json", ana / "dtw_report.json"},
                {"analyze/category_counts.json", ana / "category_counts.json"},
                {"analyze/anomaly_report.json", ana / "anomaly_report.json"}};
    m.row_counts = summary.row_counts;
    m.outputs.emplace_back("report/report.json", dir / "report.json");
    for (const char* f : kPlotFiles) {
      m.outputs.emplace_back(std::string("report/plots/") + f, dir / "plots" / f);
    }
    write_manifest(config, m, dir / "manifest.json");
    return summary;
  });
}

}  // namespace trace_insight
