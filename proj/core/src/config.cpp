#include "dpa/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace dpa::config {

namespace {

using json = nlohmann::ordered_json;

std::string join(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += (out.empty() ? "" : "\n") + l;
  return out;
}

// Walks one JSON object, collecting diagnostics instead of stopping at the first.
class Reader {
 public:
  Reader(const json& node, std::string path, std::vector<std::string>& diags,
         std::initializer_list<const char*> known)
      : node_(node), path_(std::move(path)), diags_(diags) {
    if (!node_.is_object()) {
      diags_.push_back(where() + "expected an object");
      ok_ = false;
      return;
    }
    const std::set<std::string> names(known.begin(), known.end());
    for (const auto& [key, value] : node_.items()) {
      if (!names.count(key)) diags_.push_back(field(key) + ": unknown key");
    }
  }

  bool has(const char* key) const { return ok_ && node_.contains(key); }
  const json& at(const char* key) const { return node_.at(key); }
  std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void read(const char* key, double& out) {
    if (!has(key)) return;
    const auto& v = node_.at(key);
    if (!v.is_number()) return fail(key, "expected a number");
    out = v.get<double>();
  }

  void read(const char* key, std::size_t& out) {
    if (!has(key)) return;
    const auto& v = node_.at(key);
    if (!v.is_number_unsigned()) return fail(key, "expected a non-negative integer");
    out = v.get<std::size_t>();
  }

  void read(const char* key, std::uint64_t& out, int) {
    std::size_t tmp = out;
    read(key, tmp);
    out = tmp;
  }

  void read(const char* key, bool& out) {
    if (!has(key)) return;
    const auto& v = node_.at(key);
    if (!v.is_boolean()) return fail(key, "expected true or false");
    out = v.get<bool>();
  }

  void read(const char* key, std::string& out) {
    if (!has(key)) return;
    const auto& v = node_.at(key);
    if (!v.is_string()) return fail(key, "expected a string");
    out = v.get<std::string>();
  }

  void fail(const std::string& key, const std::string& msg) { diags_.push_back(field(key) + ": " + msg); }

 private:
  std::string where() const { return path_.empty() ? "config: " : path_ + ": "; }

  const json& node_;
  std::string path_;
  std::vector<std::string>& diags_;
  bool ok_ = true;
};

void read_scenario(const json& node, ScenarioSpec& s, std::vector<std::string>& diags) {
  Reader r(node, "scenario", diags,
           {"beta", "n_union", "dim", "instances_per_image", "shift", "spacing", "global_noise",
            "cluster_std"});
  r.read("beta", s.beta);
  r.read("n_union", s.n_union);
  r.read("dim", s.dim);
  r.read("instances_per_image", s.instances_per_image);
  r.read("shift", s.shift);
  r.read("spacing", s.spacing);
  r.read("global_noise", s.global_noise);
  r.read("cluster_std", s.cluster_std);
}

void read_trainer(const json& node, train::TrainerConfig& t, std::vector<std::string>& diags) {
  Reader r(node, "trainer", diags,
           {"iterations", "lr_decay_at", "lr", "lr_after_decay", "momentum", "weight_decay",
            "radius_lr", "discriminator_lr_scale", "gamma", "delta", "alpha", "epoch_iterations",
            "grl_lambda", "z_mode", "z_fixed", "literal_global_loss", "literal_instance_loss",
            "joint_histogram", "images_per_domain", "feature_dim", "embed_dim", "hidden_dim",
            "log_every"});
  r.read("iterations", t.iterations);
  r.read("lr_decay_at", t.lr_decay_at);
  r.read("lr", t.lr);
  r.read("lr_after_decay", t.lr_after_decay);
  r.read("momentum", t.momentum);
  r.read("weight_decay", t.weight_decay);
  r.read("radius_lr", t.radius_lr);
  r.read("discriminator_lr_scale", t.discriminator_lr_scale);
  r.read("gamma", t.gamma);
  r.read("delta", t.delta);
  r.read("alpha", t.alpha);
  r.read("epoch_iterations", t.epoch_iterations);
  r.read("grl_lambda", t.grl_lambda);
  std::string mode;
  r.read("z_mode", mode);
  if (mode == "batch_mean") {
    t.z.mode = gdpa::ZMode::kBatchMean;
  } else if (mode == "fixed") {
    t.z.mode = gdpa::ZMode::kFixed;
  } else if (!mode.empty()) {
    r.fail("z_mode", "expected \"batch_mean\" or \"fixed\", got \"" + mode + "\"");
  }
  r.read("z_fixed", t.z.fixed);
  r.read("literal_global_loss", t.literal_global_loss);
  r.read("literal_instance_loss", t.literal_instance_loss);
  r.read("joint_histogram", t.joint_histogram);
  r.read("images_per_domain", t.images_per_domain);
  r.read("feature_dim", t.feature_dim);
  r.read("embed_dim", t.embed_dim);
  r.read("hidden_dim", t.hidden_dim);
  r.read("log_every", t.log_every);
}

void read_sweep(const json& node, SweepSpec& s, std::vector<std::string>& diags) {
  Reader r(node, "sweep", diags, {"axis", "values"});
  std::string axis = "none";
  r.read("axis", axis);
  if (axis == "none") {
    s.axis = SweepAxis::kNone;
  } else if (axis == "beta") {
    s.axis = SweepAxis::kBeta;
  } else if (axis == "ablation") {
    s.axis = SweepAxis::kAblation;
  } else {
    r.fail("axis", "expected \"none\", \"beta\" or \"ablation\", got \"" + axis + "\"");
    return;
  }
  if (!r.has("values")) return;
  const auto& values = r.at("values");
  if (!values.is_array()) return r.fail("values", "expected an array");
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto& v = values[i];
    const std::string key = "values[" + std::to_string(i) + "]";
    if (s.axis == SweepAxis::kBeta) {
      if (!v.is_number()) {
        r.fail(key, "expected a number");
      } else {
        s.betas.push_back(v.get<double>());
      }
    } else if (s.axis == SweepAxis::kAblation) {
      if (!v.is_string()) {
        r.fail(key, "expected an ablation name");
        continue;
      }
      try {
        s.ablations.push_back(parse_ablation(v.get<std::string>()));
      } catch (const ConfigError& e) {
        r.fail(key, e.diagnostics().front());
      }
    } else {
      r.fail("values", "axis \"none\" takes no values");
      break;
    }
  }
}

}  // namespace

ConfigError::ConfigError(std::vector<std::string> diagnostics)
    : std::invalid_argument(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}

std::string ablation_name(Ablation a) {
  switch (a) {
    case Ablation::kFull: return "full";
    case Ablation::kNoGdpa: return "no-GDPA";
    case Ablation::kNoIdsa: return "no-IDSA";
    case Ablation::kNoPcc: return "no-PCC";
    case Ablation::kBaseline: return "baseline";
  }
  return "full";
}

Ablation parse_ablation(const std::string& name) {
  for (auto a : {Ablation::kFull, Ablation::kNoGdpa, Ablation::kNoIdsa, Ablation::kNoPcc,
                 Ablation::kBaseline}) {
    if (ablation_name(a) == name) return a;
  }
  throw ConfigError({"unknown ablation \"" + name +
                     "\" (expected full, no-GDPA, no-IDSA, no-PCC or baseline)"});
}

train::Modules modules_for(Ablation a) {
  switch (a) {
    case Ablation::kFull: return {true, true, true};
    case Ablation::kNoGdpa: return {false, true, true};
    case Ablation::kNoIdsa: return {true, false, true};
    case Ablation::kNoPcc: return {true, true, false};
    case Ablation::kBaseline: return {false, false, false};
  }
  return {};
}

RunConfig parse_config(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError({std::string("config: not valid JSON: ") + e.what()});
  }
  RunConfig cfg;
  std::vector<std::string> diags;
  Reader root(doc, "", diags,
              {"schema", "version", "scenario", "seeds", "trainer", "modules", "sweep", "output"});
  if (!doc.is_object()) throw ConfigError(diags);

  if (doc.contains("schema") && doc["schema"] != kSchema) {
    root.fail("schema", std::string("expected \"") + kSchema + "\"");
  }
  if (doc.contains("version") && doc["version"] != kVersion) {
    root.fail("version", "unsupported version " + doc["version"].dump() + " (expected " +
                             std::to_string(kVersion) + ")");
  }
  if (doc.contains("scenario")) read_scenario(doc["scenario"], cfg.scenario, diags);
  if (doc.contains("trainer")) read_trainer(doc["trainer"], cfg.trainer, diags);
  if (doc.contains("modules")) {
    Reader r(doc["modules"], "modules", diags, {"gdpa", "idsa", "pcc"});
    r.read("gdpa", cfg.trainer.modules.gdpa);
    r.read("idsa", cfg.trainer.modules.idsa);
    r.read("pcc", cfg.trainer.modules.pcc);
  }
  if (doc.contains("seeds")) {
    const auto& seeds = doc["seeds"];
    cfg.seeds.clear();
    if (!seeds.is_array()) {
      root.fail("seeds", "expected an array of non-negative integers");
    } else {
      for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (!seeds[i].is_number_unsigned()) {
          root.fail("seeds[" + std::to_string(i) + "]", "expected a non-negative integer");
        } else {
          cfg.seeds.push_back(seeds[i].get<std::uint64_t>());
        }
      }
    }
  }
  if (doc.contains("sweep")) read_sweep(doc["sweep"], cfg.sweep, diags);
  if (doc.contains("output")) {
    Reader r(doc["output"], "output", diags, {"dir", "eval_images"});
    r.read("dir", cfg.output_dir);
    r.read("eval_images", cfg.eval_images);
  }
  if (diags.empty()) diags = validate(cfg);
  if (!diags.empty()) throw ConfigError(diags);
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError({"config: cannot open " + path});
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::vector<std::string> validate(const RunConfig& c) {
  std::vector<std::string> d;
  auto need = [&](bool ok, const std::string& field, const std::string& msg) {
    if (!ok) d.push_back(field + ": " + msg);
  };
  const auto& s = c.scenario;
  need(s.beta > 0.0 && s.beta <= 1.0, "scenario.beta", "must lie in (0, 1]");
  need(s.n_union >= 1, "scenario.n_union", "must be >= 1");
  need(s.dim >= 1, "scenario.dim", "must be >= 1");
  need(s.n_union <= s.dim, "scenario.n_union", "must not exceed scenario.dim");
  need(s.instances_per_image >= 2, "scenario.instances_per_image", "must be >= 2");
  need(s.shift >= 0.0, "scenario.shift", "must be >= 0");
  need(s.spacing > 0.0, "scenario.spacing", "must be > 0");
  need(s.global_noise >= 0.0, "scenario.global_noise", "must be >= 0");
  need(s.cluster_std > 0.0, "scenario.cluster_std", "must be > 0");

  auto check_beta = [&](double beta, const std::string& field) {
    if (!(beta > 0.0 && beta <= 1.0) || s.n_union == 0) return;
    try {
      scenario::shared_count_for(beta, s.n_union);
    } catch (const scenario::ScenarioError& e) {
      d.push_back(field + ": " + e.what());
    }
  };
  if (c.sweep.axis != SweepAxis::kBeta) check_beta(s.beta, "scenario.beta");

  const auto& t = c.trainer;
  need(t.iterations >= 1, "trainer.iterations", "must be >= 1");
  need(t.lr > 0.0, "trainer.lr", "must be > 0");
  need(t.lr_after_decay > 0.0, "trainer.lr_after_decay", "must be > 0");
  need(t.momentum >= 0.0 && t.momentum < 1.0, "trainer.momentum", "must lie in [0, 1)");
  need(t.weight_decay >= 0.0, "trainer.weight_decay", "must be >= 0");
  need(t.radius_lr > 0.0, "trainer.radius_lr", "must be > 0");
  need(t.discriminator_lr_scale > 0.0, "trainer.discriminator_lr_scale", "must be > 0");
  need(t.gamma >= 0.0, "trainer.gamma", "must be >= 0");
  need(t.delta > 0.0, "trainer.delta", "must be > 0");
  need(t.alpha >= 0.0, "trainer.alpha", "must be >= 0");
  need(t.grl_lambda >= 0.0, "trainer.grl_lambda", "must be >= 0");
  need(t.z.fixed > 0.0 && t.z.fixed < 1.0, "trainer.z_fixed", "must lie in (0, 1)");
  need(t.images_per_domain >= 1, "trainer.images_per_domain", "must be >= 1");
  need(t.feature_dim >= 1, "trainer.feature_dim", "must be >= 1");
  need(t.embed_dim >= 1, "trainer.embed_dim", "must be >= 1");
  need(t.hidden_dim >= 1, "trainer.hidden_dim", "must be >= 1");
  need(t.log_every >= 1, "trainer.log_every", "must be >= 1");

  need(!c.seeds.empty(), "seeds", "must list at least one seed");
  need(!c.output_dir.empty(), "output.dir", "must not be empty");
  need(c.eval_images >= 1, "output.eval_images", "must be >= 1");

  if (c.sweep.axis == SweepAxis::kBeta) {
    need(!c.sweep.betas.empty(), "sweep.values", "beta sweep needs at least one value");
    for (std::size_t i = 0; i < c.sweep.betas.size(); ++i) {
      const std::string field = "sweep.values[" + std::to_string(i) + "]";
      const double b = c.sweep.betas[i];
      need(b > 0.0 && b <= 1.0, field, "must lie in (0, 1]");
      check_beta(b, field);
    }
  } else if (c.sweep.axis == SweepAxis::kAblation) {
    need(!c.sweep.ablations.empty(), "sweep.values", "ablation sweep needs at least one value");
  }
  return d;
}

std::string to_json(const RunConfig& c) {
  json doc;
  doc["schema"] = kSchema;
  doc["version"] = kVersion;
  const auto& s = c.scenario;
  doc["scenario"] = {{"beta", s.beta},
                     {"n_union", s.n_union},
                     {"dim", s.dim},
                     {"instances_per_image", s.instances_per_image},
                     {"shift", s.shift},
                     {"spacing", s.spacing},
                     {"global_noise", s.global_noise},
                     {"cluster_std", s.cluster_std}};
  doc["seeds"] = c.seeds;
  const auto& t = c.trainer;
  doc["trainer"] = {{"iterations", t.iterations},
                    {"lr_decay_at", t.lr_decay_at},
                    {"lr", t.lr},
                    {"lr_after_decay", t.lr_after_decay},
                    {"momentum", t.momentum},
                    {"weight_decay", t.weight_decay},
                    {"radius_lr", t.radius_lr},
                    {"discriminator_lr_scale", t.discriminator_lr_scale},
                    {"gamma", t.gamma},
                    {"delta", t.delta},
                    {"alpha", t.alpha},
                    {"epoch_iterations", t.epoch_iterations},
                    {"grl_lambda", t.grl_lambda},
                    {"z_mode", t.z.mode == gdpa::ZMode::kFixed ? "fixed" : "batch_mean"},
                    {"z_fixed", t.z.fixed},
                    {"literal_global_loss", t.literal_global_loss},
                    {"literal_instance_loss", t.literal_instance_loss},
                    {"joint_histogram", t.joint_histogram},
                    {"images_per_domain", t.images_per_domain},
                    {"feature_dim", t.feature_dim},
                    {"embed_dim", t.embed_dim},
                    {"hidden_dim", t.hidden_dim},
                    {"log_every", t.log_every}};
  doc["modules"] = {{"gdpa", t.modules.gdpa}, {"idsa", t.modules.idsa}, {"pcc", t.modules.pcc}};
  json sweep;
  switch (c.sweep.axis) {
    case SweepAxis::kNone:
      sweep["axis"] = "none";
      break;
    case SweepAxis::kBeta:
      sweep["axis"] = "beta";
      sweep["values"] = c.sweep.betas;
      break;
    case SweepAxis::kAblation: {
      sweep["axis"] = "ablation";
      json values = json::array();
      for (auto a : c.sweep.ablations) values.push_back(ablation_name(a));
      sweep["values"] = values;
      break;
    }
  }
  doc["sweep"] = sweep;
  doc["output"] = {{"dir", c.output_dir}, {"eval_images", c.eval_images}};
  return doc.dump(2) + "\n";
}

}  // namespace dpa::config
