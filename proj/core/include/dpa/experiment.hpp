#pragma once

// Runs, sweeps and figure-data export on top of the trainer.
//
// Layout under the output root:
//   <name>/metrics.csv     one row per log interval
//   <name>/summary.json    final evaluation and time averages
//   sweep_runs.csv         one row per (value, seed)
//   sweep_summary.csv      mean and std per value
// Every file is written to a temporary name and renamed into place.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dpa/config.hpp"
#include "dpa/metrics.hpp"
#include "dpa/trainer.hpp"

namespace dpa::experiment {

inline constexpr const char* kOutputRootEnv = "DPA_OUTPUT_ROOT";

// DPA_OUTPUT_ROOT if set and non-empty, else config.output_dir.
std::filesystem::path output_root(const config::RunConfig& config);

void write_atomic(const std::filesystem::path& path, const std::string& content);

// Means over all logged rows.
struct TimeAverages {
  double gap_global = 0.0;
  double gap_instance = 0.0;
  double w_gap = 0.0;
  double target_shared_acc = 0.0;
};
TimeAverages time_average(const std::vector<MetricsRow>& rows);

struct RunSpec {
  std::string name;  // directory name under the root
  double beta = 0.5;
  train::Modules modules;
  std::uint64_t seed = 0;
};

struct RunOutcome {
  RunSpec spec;
  bool ok = false;
  std::string error;
  train::EvaluationRecord eval;
  TimeAverages averages;
  std::vector<MetricsRow> rows;
};

// Trains one model and, when `dir` is non-empty, writes metrics.csv and summary.json there.
// Throws scenario::ScenarioError for bad scenarios and NumericError on divergence.
RunOutcome run_one(const config::RunConfig& config, const RunSpec& spec,
                   const std::filesystem::path& dir);

// One run per seed at the configured beta and modules.
std::vector<RunOutcome> run_all(const config::RunConfig& config, const std::filesystem::path& root);

struct SweepRow {
  std::string axis;
  std::string value;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::vector<double> metrics;  // ordered as sweep_metric_names()
};

struct SweepAggregate {
  std::string axis;
  std::string value;
  std::size_t n_ok = 0;
  std::size_t n_failed = 0;
  std::vector<double> mean;
  std::vector<double> std;  // sample standard deviation, 0 with fewer than two runs
};

const std::vector<std::string>& sweep_metric_names();

struct SweepResult {
  std::vector<SweepRow> runs;
  std::vector<SweepAggregate> aggregates;
};

// Runs every (value, seed) pair; failures are recorded and the sweep continues.
// Throws config::ConfigError when the config has no sweep axis or an empty one.
SweepResult sweep(const config::RunConfig& config, const std::filesystem::path& root);

std::string sweep_runs_csv(const std::vector<SweepRow>& rows);
std::string sweep_summary_csv(const std::vector<SweepAggregate>& aggregates);
std::vector<SweepRow> parse_sweep_runs(const CsvTable& table);
// Groups rows by (axis, value) in first-seen order; only successful runs contribute.
std::vector<SweepAggregate> aggregate(const std::vector<SweepRow>& rows);

struct Series {
  std::string label;
  std::vector<double> iteration;
  std::vector<double> gap_global;
  std::vector<double> gap_instance;
  std::vector<double> w_s;
  std::vector<double> w_t;
  std::vector<double> w_gap;
  std::vector<double> w_figure;
};

// Reads the figure columns from one metrics CSV; throws CsvError naming missing columns.
Series load_series(const std::string& label, const CsvTable& table);

// Pointwise mean of series that share the same iteration grid.
Series mean_series(const std::string& label, const std::vector<Series>& parts);

// Series per beta value from a beta sweep directory (averaged over seeds).
std::vector<Series> series_from_sweep(const std::filesystem::path& sweep_root);

// Writes gap_series.csv and weight_series.csv (long format, one block per label).
void write_figdata(const std::vector<Series>& series, const std::filesystem::path& out_dir);

}  // namespace dpa::experiment
