#include "dpa/experiment.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include <unistd.h>

#include <json.hpp>

#include "dpa/errors.hpp"
#include "dpa/scenario.hpp"

namespace dpa::experiment {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::string out = metrics_header_line() + "\n";
  for (const auto& r : rows) out += to_csv_line(r) + "\n";
  return out;
}

std::string summary_json(const config::RunConfig& config, const RunOutcome& o) {
  json doc;
  doc["name"] = o.spec.name;
  doc["seed"] = o.spec.seed;
  doc["beta"] = o.spec.beta;
  doc["modules"] = {{"gdpa", o.spec.modules.gdpa},
                    {"idsa", o.spec.modules.idsa},
                    {"pcc", o.spec.modules.pcc}};
  doc["iterations"] = config.trainer.iterations;
  doc["evaluation"] = {{"target_shared_accuracy", o.eval.target_shared_accuracy},
                       {"source_accuracy", o.eval.source_accuracy},
                       {"global_gap", o.eval.global_gap},
                       {"instance_gap", o.eval.instance_gap},
                       {"probe_accuracy", o.eval.probe_accuracy},
                       {"alignment_score", o.eval.alignment_score},
                       {"target_shared_instances", o.eval.target_shared_instances}};
  doc["time_average"] = {{"gap_global", o.averages.gap_global},
                         {"gap_instance", o.averages.gap_instance},
                         {"w_gap", o.averages.w_gap},
                         {"target_shared_acc", o.averages.target_shared_acc}};
  return doc.dump(2) + "\n";
}

std::vector<double> outcome_metrics(const RunOutcome& o) {
  return {o.eval.target_shared_accuracy, o.eval.source_accuracy, o.eval.global_gap,
          o.eval.instance_gap,           o.eval.probe_accuracy,  o.eval.alignment_score,
          o.averages.gap_global,         o.averages.gap_instance, o.averages.w_gap};
}

std::string value_label(double beta) { return format_double(beta); }

}  // namespace

fs::path output_root(const config::RunConfig& config) {
  const char* env = std::getenv(kOutputRootEnv);
  if (env != nullptr && *env != '\0') return fs::path(env);
  return fs::path(config.output_dir);
}

void write_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

TimeAverages time_average(const std::vector<MetricsRow>& rows) {
  TimeAverages a;
  if (rows.empty()) return a;
  for (const auto& r : rows) {
    a.gap_global += r.gap_global;
    a.gap_instance += r.gap_instance;
    a.w_gap += r.w_gap;
    a.target_shared_acc += r.target_shared_acc;
  }
  const double n = static_cast<double>(rows.size());
  a.gap_global /= n;
  a.gap_instance /= n;
  a.w_gap /= n;
  a.target_shared_acc /= n;
  return a;
}

RunOutcome run_one(const config::RunConfig& config, const RunSpec& spec, const fs::path& dir) {
  const auto& s = config.scenario;
  const scenario::ScenarioOptions opts{s.dim, s.instances_per_image, s.spacing, s.global_noise,
                                       s.cluster_std};
  auto sc = scenario::make_scenario(spec.beta, s.n_union, s.shift, spec.seed, opts);
  train::TrainerConfig tc = config.trainer;
  tc.modules = spec.modules;
  tc.model_seed = spec.seed;

  RunOutcome o;
  o.spec = spec;
  train::Trainer trainer(std::move(sc), tc);
  o.rows = trainer.run();
  o.eval = trainer.evaluate(config.eval_images);
  o.averages = time_average(o.rows);
  o.ok = true;
  if (!dir.empty()) {
    write_atomic(dir / "metrics.csv", metrics_csv(o.rows));
    write_atomic(dir / "summary.json", summary_json(config, o));
  }
  return o;
}

std::vector<RunOutcome> run_all(const config::RunConfig& config, const fs::path& root) {
  std::vector<RunOutcome> out;
  for (auto seed : config.seeds) {
    RunSpec spec{"run_seed" + std::to_string(seed), config.scenario.beta, config.trainer.modules,
                 seed};
    out.push_back(run_one(config, spec, root / spec.name));
  }
  return out;
}

const std::vector<std::string>& sweep_metric_names() {
  static const std::vector<std::string> names = {
      "target_shared_acc", "source_acc",     "eval_gap_global",
      "eval_gap_instance", "probe_acc",      "alignment_score",
      "avg_gap_global",    "avg_gap_instance", "avg_w_gap"};
  return names;
}

std::string sweep_runs_csv(const std::vector<SweepRow>& rows) {
  std::string out = "axis,value,seed,status";
  for (const auto& n : sweep_metric_names()) out += "," + n;
  out += ",error\n";
  for (const auto& r : rows) {
    out += r.axis + "," + r.value + "," + std::to_string(r.seed) + "," + (r.ok ? "ok" : "failed");
    for (std::size_t k = 0; k < sweep_metric_names().size(); ++k) {
      out += ",";
      if (r.ok) out += format_double(r.metrics[k]);
    }
    std::string err = r.error;
    for (char& c : err) {
      if (c == ',' || c == '\n' || c == '\r') c = ' ';
    }
    out += "," + err + "\n";
  }
  return out;
}

std::string sweep_summary_csv(const std::vector<SweepAggregate>& aggregates) {
  std::string out = "axis,value,n_ok,n_failed";
  for (const auto& n : sweep_metric_names()) out += "," + n + "_mean," + n + "_std";
  out += "\n";
  for (const auto& a : aggregates) {
    out += a.axis + "," + a.value + "," + std::to_string(a.n_ok) + "," + std::to_string(a.n_failed);
    for (std::size_t k = 0; k < a.mean.size(); ++k) {
      out += "," + format_double(a.mean[k]) + "," + format_double(a.std[k]);
    }
    out += "\n";
  }
  return out;
}

std::vector<SweepRow> parse_sweep_runs(const CsvTable& table) {
  std::vector<std::string> cols = {"axis", "value", "seed", "status"};
  const auto& names = sweep_metric_names();
  cols.insert(cols.end(), names.begin(), names.end());
  cols.push_back("error");
  const auto idx = table.require(cols);
  std::vector<SweepRow> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& f = table.rows[r];
    SweepRow row;
    row.axis = f[idx[0]];
    row.value = f[idx[1]];
    row.seed = std::stoull(f[idx[2]]);
    row.ok = f[idx[3]] == "ok";
    row.error = f[idx.back()];
    if (row.ok) {
      for (std::size_t k = 0; k < names.size(); ++k) {
        const auto& cell = f[idx[4 + k]];
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
        if (ec != std::errc() || ptr != cell.data() + cell.size()) {
          throw CsvError("line " + std::to_string(r + 2) + ": '" + cell + "' is not a number");
        }
        row.metrics.push_back(v);
      }
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<SweepAggregate> aggregate(const std::vector<SweepRow>& rows) {
  std::vector<SweepAggregate> out;
  const std::size_t m = sweep_metric_names().size();
  std::vector<std::vector<std::vector<double>>> samples;
  for (const auto& r : rows) {
    std::size_t g = 0;
    while (g < out.size() && !(out[g].axis == r.axis && out[g].value == r.value)) ++g;
    if (g == out.size()) {
      out.push_back({r.axis, r.value, 0, 0, {}, {}});
      samples.emplace_back(m);
    }
    if (!r.ok) {
      ++out[g].n_failed;
      continue;
    }
    ++out[g].n_ok;
    for (std::size_t k = 0; k < m; ++k) samples[g][k].push_back(r.metrics[k]);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    out[g].mean.assign(m, 0.0);
    out[g].std.assign(m, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const auto& v = samples[g][k];
      if (v.empty()) continue;
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double ss = 0.0;
      for (double x : v) ss += (x - mean) * (x - mean);
      out[g].mean[k] = mean;
      out[g].std[k] = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
    }
  }
  return out;
}

SweepResult sweep(const config::RunConfig& config, const fs::path& root) {
  struct Point {
    std::string axis, value;
    double beta;
    train::Modules modules;
  };
  std::vector<Point> points;
  const auto& sw = config.sweep;
  if (sw.axis == config::SweepAxis::kBeta) {
    for (double b : sw.betas) points.push_back({"beta", value_label(b), b, config.trainer.modules});
  } else if (sw.axis == config::SweepAxis::kAblation) {
    for (auto a : sw.ablations) {
      points.push_back({"ablation", config::ablation_name(a), config.scenario.beta,
                        config::modules_for(a)});
    }
  } else {
    throw config::ConfigError({"sweep.axis: no sweep axis configured"});
  }
  if (points.empty()) throw config::ConfigError({"sweep.values: sweep axis is empty"});

  std::vector<SweepRow> rows;
  for (const auto& p : points) {
    for (auto seed : config.seeds) {
      RunSpec spec{p.axis + "_" + p.value + "_seed" + std::to_string(seed), p.beta, p.modules, seed};
      SweepRow row{p.axis, p.value, seed, false, {}, {}};
      try {
        const auto o = run_one(config, spec, root / spec.name);
        row.ok = true;
        row.metrics = outcome_metrics(o);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }

  const std::string runs_text = sweep_runs_csv(rows);
  write_atomic(root / "sweep_runs.csv", runs_text);
  // Aggregates are recomputed from the written table so they match it exactly.
  std::istringstream in(runs_text);
  SweepResult result;
  result.runs = parse_sweep_runs(parse_csv(in, "sweep_runs.csv"));
  result.aggregates = aggregate(result.runs);
  write_atomic(root / "sweep_summary.csv", sweep_summary_csv(result.aggregates));
  return result;
}

Series load_series(const std::string& label, const CsvTable& table) {
  const auto idx = table.require(
      {"iteration", "gap_global", "gap_instance", "w_s", "w_t", "w_gap", "w_figure"});
  Series s;
  s.label = label;
  s.iteration = table.numeric_column(idx[0]);
  s.gap_global = table.numeric_column(idx[1]);
  s.gap_instance = table.numeric_column(idx[2]);
  s.w_s = table.numeric_column(idx[3]);
  s.w_t = table.numeric_column(idx[4]);
  s.w_gap = table.numeric_column(idx[5]);
  s.w_figure = table.numeric_column(idx[6]);
  return s;
}

Series mean_series(const std::string& label, const std::vector<Series>& parts) {
  if (parts.empty()) throw std::invalid_argument("mean_series: no input series");
  Series out = parts.front();
  out.label = label;
  for (std::size_t p = 1; p < parts.size(); ++p) {
    if (parts[p].iteration != out.iteration) {
      throw std::invalid_argument("mean_series: series '" + parts[p].label +
                                  "' uses a different iteration grid");
    }
    auto add = [](std::vector<double>& into, const std::vector<double>& v) {
      for (std::size_t i = 0; i < into.size(); ++i) into[i] += v[i];
    };
    add(out.gap_global, parts[p].gap_global);
    add(out.gap_instance, parts[p].gap_instance);
    add(out.w_s, parts[p].w_s);
    add(out.w_t, parts[p].w_t);
    add(out.w_gap, parts[p].w_gap);
    add(out.w_figure, parts[p].w_figure);
  }
  const double n = static_cast<double>(parts.size());
  for (auto* v : {&out.gap_global, &out.gap_instance, &out.w_s, &out.w_t, &out.w_gap, &out.w_figure}) {
    for (double& x : *v) x /= n;
  }
  return out;
}

std::vector<Series> series_from_sweep(const fs::path& sweep_root) {
  const auto rows = parse_sweep_runs(read_csv((sweep_root / "sweep_runs.csv").string()));
  std::vector<std::string> order;
  std::map<std::string, std::vector<Series>> groups;
  for (const auto& r : rows) {
    if (!r.ok) continue;
    const std::string name = r.axis + "_" + r.value + "_seed" + std::to_string(r.seed);
    const std::string label = r.axis + "=" + r.value;
    if (!groups.count(label)) order.push_back(label);
    groups[label].push_back(load_series(label, read_csv((sweep_root / name / "metrics.csv").string())));
  }
  std::vector<Series> out;
  for (const auto& label : order) out.push_back(mean_series(label, groups[label]));
  return out;
}

void write_figdata(const std::vector<Series>& series, const fs::path& out_dir) {
  std::string gaps = "series,iteration,gap_global,gap_instance\n";
  std::string weights = "series,iteration,w_s,w_t,w_gap,w_figure\n";
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.iteration.size(); ++i) {
      gaps += s.label + "," + format_double(s.iteration[i]) + "," + format_double(s.gap_global[i]) +
              "," + format_double(s.gap_instance[i]) + "\n";
      weights += s.label + "," + format_double(s.iteration[i]) + "," + format_double(s.w_s[i]) +
                 "," + format_double(s.w_t[i]) + "," + format_double(s.w_gap[i]) + "," +
                 format_double(s.w_figure[i]) + "\n";
    }
  }
  write_atomic(out_dir / "gap_series.csv", gaps);
  write_atomic(out_dir / "weight_series.csv", weights);
}

}  // namespace dpa::experiment
