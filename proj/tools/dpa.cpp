// dpa: train, sweep and export figure data for the dual probabilistic
// alignment simulator.
//
// Exit codes: 0 success, 2 invalid config or input, 3 numeric failure.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dpa/config.hpp"
#include "dpa/errors.hpp"
#include "dpa/experiment.hpp"
#include "dpa/metrics.hpp"
#include "dpa/scenario.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kNumericError = 3;

namespace cfg = dpa::config;
namespace ex = dpa::experiment;
namespace fs = std::filesystem;

struct Common {
  std::string config_path;
  std::vector<std::uint64_t> seeds;
  std::string output;
  bool quiet = false;
};

cfg::RunConfig load(const Common& c) {
  auto config = cfg::load_config(c.config_path);
  if (!c.seeds.empty()) config.seeds = c.seeds;
  if (!c.output.empty()) config.output_dir = c.output;
  return config;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int cmd_run(const Common& c) {
  const auto config = load(c);
  const auto root = ex::output_root(config);
  for (const auto& o : ex::run_all(config, root)) {
    if (!c.quiet) {
      std::cout << o.spec.name << ": target_shared_acc=" << fmt(o.eval.target_shared_accuracy)
                << " source_acc=" << fmt(o.eval.source_accuracy)
                << " avg_gap_global=" << fmt(o.averages.gap_global)
                << " avg_gap_instance=" << fmt(o.averages.gap_instance) << " -> "
                << (root / o.spec.name).string() << "\n";
    }
  }
  return kOk;
}

int cmd_sweep(const Common& c) {
  const auto config = load(c);
  const auto root = ex::output_root(config);
  const auto result = ex::sweep(config, root);
  bool failed = false;
  for (const auto& r : result.runs) {
    if (!r.ok) {
      failed = true;
      std::cerr << "run " << r.axis << "=" << r.value << " seed " << r.seed
                << " failed: " << r.error << "\n";
    }
  }
  if (!c.quiet) {
    for (const auto& a : result.aggregates) {
      std::cout << a.axis << "=" << a.value << ": n=" << a.n_ok
                << " target_shared_acc=" << fmt(a.mean[0]) << " +/- " << fmt(a.std[0])
                << " avg_gap_global=" << fmt(a.mean[6]) << " avg_w_gap=" << fmt(a.mean[8]) << "\n";
    }
    std::cout << "summary: " << (root / "sweep_summary.csv").string() << "\n";
  }
  return failed ? kNumericError : kOk;
}

int cmd_export(const std::vector<std::string>& inputs, const std::string& sweep_dir,
               const std::string& out_dir, bool quiet) {
  std::vector<ex::Series> series;
  if (!sweep_dir.empty()) series = ex::series_from_sweep(sweep_dir);
  for (const auto& arg : inputs) {
    std::string label;
    std::string path = arg;
    if (const auto eq = arg.find('='); eq != std::string::npos) {
      label = arg.substr(0, eq);
      path = arg.substr(eq + 1);
    } else {
      const fs::path p(arg);
      label = p.has_parent_path() ? p.parent_path().filename().string() : p.stem().string();
    }
    series.push_back(ex::load_series(label, dpa::read_csv(path)));
  }
  if (series.empty()) {
    throw cfg::ConfigError({"export-figdata: no input (pass metrics CSVs or --sweep DIR)"});
  }
  ex::write_figdata(series, out_dir);
  if (!quiet) {
    std::cout << "wrote " << series.size() << " series to " << (fs::path(out_dir) / "gap_series.csv").string()
              << " and " << (fs::path(out_dir) / "weight_series.csv").string() << "\n";
  }
  return kOk;
}

int cmd_validate(const std::string& path, bool print) {
  const auto config = cfg::load_config(path);
  if (print) {
    std::cout << cfg::to_json(config);
  } else {
    std::cout << path << ": ok\n";
  }
  return kOk;
}

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("config", c.config_path, "Run config (JSON)")->required();
  sub->add_option("--seed", c.seeds, "Override the config's seed list (repeatable)");
  sub->add_option("--output", c.output, "Output directory (DPA_OUTPUT_ROOT still takes precedence)");
  sub->add_flag("-q,--quiet", c.quiet, "Only report errors");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dual probabilistic alignment simulator"};
  app.require_subcommand(1);

  Common run_opts;
  auto* run = app.add_subcommand("run", "Train one model per seed; write metrics and summary");
  add_common(run, run_opts);

  Common sweep_opts;
  auto* sweep = app.add_subcommand("sweep", "Run the config's sweep axis across all seeds");
  add_common(sweep, sweep_opts);

  std::vector<std::string> inputs;
  std::string sweep_dir;
  std::string out_dir = ".";
  bool export_quiet = false;
  auto* exp = app.add_subcommand("export-figdata", "Write plot-ready gap and weight series");
  exp->add_option("inputs", inputs, "Metrics CSVs, optionally as label=path");
  exp->add_option("--sweep", sweep_dir, "Beta sweep output directory (one series per value)");
  exp->add_option("--out", out_dir, "Directory for gap_series.csv and weight_series.csv");
  exp->add_flag("-q,--quiet", export_quiet, "Only report errors");

  std::string validate_path;
  bool print = false;
  auto* validate = app.add_subcommand("validate-config", "Check a config and report field errors");
  validate->add_option("config", validate_path, "Run config (JSON)")->required();
  validate->add_flag("--print", print, "Print the config with every default filled in");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cmd_run(run_opts);
    if (*sweep) return cmd_sweep(sweep_opts);
    if (*exp) return cmd_export(inputs, sweep_dir, out_dir, export_quiet);
    if (*validate) return cmd_validate(validate_path, print);
  } catch (const cfg::ConfigError& e) {
    for (const auto& d : e.diagnostics()) std::cerr << "config error: " << d << "\n";
    return kConfigError;
  } catch (const dpa::scenario::ScenarioError& e) {
    std::cerr << "config error: scenario: " << e.what() << "\n";
    return kConfigError;
  } catch (const dpa::CsvError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return kConfigError;
  } catch (const dpa::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
