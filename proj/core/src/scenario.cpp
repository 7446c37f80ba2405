#include "dpa/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "dpa/random.hpp"

namespace dpa::scenario {

namespace {

constexpr double kRatioTolerance = 1e-9;

bool realizable(std::size_t k, std::size_t n) {
  // Both domains need at least one class.
  return k >= 1 || n - k >= 2;
}

std::string ratio_str(std::size_t k, std::size_t n) {
  std::ostringstream os;
  os << k << "/" << n << " (" << static_cast<double>(k) / static_cast<double>(n) << ")";
  return os.str();
}

// Stream keys: one stream per (call, domain, image).
std::uint64_t stream_key(std::uint64_t call, Domain d, std::size_t image) {
  return (call << 21) ^ (static_cast<std::uint64_t>(index(d)) << 20) ^ image;
}

PseudoImage draw_image(const Scenario& sc, Domain d, CounterStream& rng) {
  const auto& classes = sc.classes(d);
  const std::size_t cls = classes[rng.below(classes.size())];
  const auto& mu = sc.mean(d, cls);
  const std::size_t m = sc.instances_per_image;
  PseudoImage img;
  img.domain = d;
  img.instances = ad::Tensor(m, sc.dim);
  img.labels.assign(m, cls);
  img.global = ad::Tensor(1, sc.dim);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t c = 0; c < sc.dim; ++c) {
      const double v = rng.normal(mu[c], sc.cluster_std);
      img.instances(i, c) = v;
      img.global(0, c) += v / static_cast<double>(m);
    }
  }
  for (std::size_t c = 0; c < sc.dim; ++c) img.global(0, c) += rng.normal(0.0, sc.global_noise);
  return img;
}

DomainView stack(const std::vector<PseudoImage>& images, std::size_t dim) {
  DomainView v;
  std::size_t rows = 0;
  for (const auto& img : images) rows += img.instances.rows();
  v.instances = ad::Tensor(rows, dim);
  v.globals = ad::Tensor(images.size(), dim);
  std::size_t r = 0;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    for (std::size_t k = 0; k < img.instances.rows(); ++k, ++r) {
      std::copy_n(img.instances.row_span(k).begin(), dim, v.instances.row_span(r).begin());
      v.image_of_instance.push_back(i);
    }
    std::copy_n(img.global.row_span(0).begin(), dim, v.globals.row_span(i).begin());
  }
  return v;
}

std::vector<std::size_t> flat_labels(const std::vector<PseudoImage>& images) {
  std::vector<std::size_t> out;
  for (const auto& img : images) out.insert(out.end(), img.labels.begin(), img.labels.end());
  return out;
}

}  // namespace

double Scenario::beta() const {
  std::vector<std::size_t> inter, uni;
  std::set_intersection(classes_s.begin(), classes_s.end(), classes_t.begin(), classes_t.end(),
                        std::back_inserter(inter));
  std::set_union(classes_s.begin(), classes_s.end(), classes_t.begin(), classes_t.end(),
                 std::back_inserter(uni));
  return uni.empty() ? 0.0 : static_cast<double>(inter.size()) / static_cast<double>(uni.size());
}

std::vector<std::size_t> Scenario::shared_classes() const {
  std::vector<std::size_t> inter;
  std::set_intersection(classes_s.begin(), classes_s.end(), classes_t.begin(), classes_t.end(),
                        std::back_inserter(inter));
  return inter;
}

bool Scenario::has_class(Domain d, std::size_t cls) const {
  const auto& c = classes(d);
  return std::binary_search(c.begin(), c.end(), cls);
}

const std::vector<double>& Scenario::mean(Domain d, std::size_t cls) const {
  const auto& means = d == Domain::kSource ? means_s : means_t;
  if (cls >= means.size() || means[cls].empty()) {
    throw ScenarioError("scenario: class " + std::to_string(cls) + " is absent from the " +
                        domain_name(d) + " domain");
  }
  return means[cls];
}

std::size_t shared_count_for(double beta, std::size_t n_union) {
  if (n_union < 1) throw ScenarioError("scenario: n_union must be at least 1");
  if (!(beta >= 0.0 && beta <= 1.0)) throw ScenarioError("scenario: beta must lie in [0, 1]");
  const double n = static_cast<double>(n_union);
  std::optional<std::size_t> below, above;
  for (std::size_t k = 0; k <= n_union; ++k) {
    if (!realizable(k, n_union)) continue;
    const double r = static_cast<double>(k) / n;
    if (std::abs(r - beta) <= kRatioTolerance) return k;
    if (r < beta) below = k;
    if (r > beta && !above) above = k;
  }
  std::string msg = "scenario: beta=" + std::to_string(beta) + " is not realizable with n_union=" +
                    std::to_string(n_union) + "; nearest realizable ratios:";
  if (below) msg += " " + ratio_str(*below, n_union);
  if (above) msg += " " + ratio_str(*above, n_union);
  throw ScenarioError(msg);
}

Scenario make_scenario(double beta, std::size_t n_union, double shift, std::uint64_t seed,
                       const ScenarioOptions& options) {
  const std::size_t k = shared_count_for(beta, n_union);
  if (n_union > options.dim) {
    throw ScenarioError("scenario: n_union (" + std::to_string(n_union) +
                        ") must not exceed dim (" + std::to_string(options.dim) + ")");
  }
  if (options.instances_per_image == 0) {
    throw ScenarioError("scenario: instances_per_image must be positive");
  }
  Scenario sc;
  sc.dim = options.dim;
  sc.instances_per_image = options.instances_per_image;
  sc.n_union = n_union;
  sc.n_shared = k;
  sc.shift = shift;
  sc.spacing = options.spacing;
  sc.global_noise = options.global_noise;
  sc.cluster_std = options.cluster_std;
  sc.seed = seed;
  sc.means_s.resize(n_union);
  sc.means_t.resize(n_union);

  // Orthogonal axes scaled so every pair of class means is `spacing` apart.
  const double radius = options.spacing / std::sqrt(2.0);
  auto axis_mean = [&](std::size_t cls) {
    std::vector<double> mu(sc.dim, 0.0);
    mu[cls] = radius;
    return mu;
  };

  CounterStream rng(seed, ~0ULL);
  sc.shift_vector.assign(sc.dim, 0.0);
  double norm = 0.0;
  while (norm == 0.0) {
    for (double& v : sc.shift_vector) v = rng.normal();
    norm = 0.0;
    for (double v : sc.shift_vector) norm += v * v;
    norm = std::sqrt(norm);
  }
  for (double& v : sc.shift_vector) v *= shift / norm;

  for (std::size_t c = 0; c < k; ++c) {
    sc.classes_s.push_back(c);
    sc.classes_t.push_back(c);
    sc.means_s[c] = axis_mean(c);
    sc.means_t[c] = axis_mean(c);
    for (std::size_t j = 0; j < sc.dim; ++j) sc.means_t[c][j] += sc.shift_vector[j];
  }
  for (std::size_t c = k; c < n_union; ++c) {
    if ((c - k) % 2 == 0) {
      sc.classes_s.push_back(c);
      sc.means_s[c] = axis_mean(c);
    } else {
      sc.classes_t.push_back(c);
      sc.means_t[c] = axis_mean(c);
    }
  }
  return sc;
}

std::string to_json(const Scenario& sc) {
  nlohmann::ordered_json j;
  j["schema"] = "dpa.scenario";
  j["version"] = kSchemaVersion;
  j["dim"] = sc.dim;
  j["instances_per_image"] = sc.instances_per_image;
  j["n_union"] = sc.n_union;
  j["n_shared"] = sc.n_shared;
  j["shift"] = sc.shift;
  j["spacing"] = sc.spacing;
  j["global_noise"] = sc.global_noise;
  j["cluster_std"] = sc.cluster_std;
  j["seed"] = sc.seed;
  j["classes_source"] = sc.classes_s;
  j["classes_target"] = sc.classes_t;
  nlohmann::ordered_json ms = nlohmann::ordered_json::object();
  nlohmann::ordered_json mt = nlohmann::ordered_json::object();
  for (std::size_t c : sc.classes_s) ms[std::to_string(c)] = sc.means_s[c];
  for (std::size_t c : sc.classes_t) mt[std::to_string(c)] = sc.means_t[c];
  j["means_source"] = ms;
  j["means_target"] = mt;
  j["shift_vector"] = sc.shift_vector;
  return j.dump(2);
}

Scenario from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(std::string("scenario document: ") + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != "dpa.scenario") {
      throw ScenarioError("scenario document: unexpected schema");
    }
    if (j.at("version").get<int>() != kSchemaVersion) {
      throw ScenarioError("scenario document: unsupported version " +
                          std::to_string(j.at("version").get<int>()));
    }
    Scenario sc;
    sc.dim = j.at("dim").get<std::size_t>();
    sc.instances_per_image = j.at("instances_per_image").get<std::size_t>();
    sc.n_union = j.at("n_union").get<std::size_t>();
    sc.n_shared = j.at("n_shared").get<std::size_t>();
    sc.shift = j.at("shift").get<double>();
    sc.spacing = j.at("spacing").get<double>();
    sc.global_noise = j.at("global_noise").get<double>();
    sc.cluster_std = j.at("cluster_std").get<double>();
    sc.seed = j.at("seed").get<std::uint64_t>();
    sc.classes_s = j.at("classes_source").get<std::vector<std::size_t>>();
    sc.classes_t = j.at("classes_target").get<std::vector<std::size_t>>();
    sc.shift_vector = j.at("shift_vector").get<std::vector<double>>();
    sc.means_s.resize(sc.n_union);
    sc.means_t.resize(sc.n_union);
    auto read_means = [&](const char* key, const std::vector<std::size_t>& classes,
                          std::vector<std::vector<double>>& out) {
      for (std::size_t c : classes) {
        if (c >= sc.n_union) throw ScenarioError("scenario document: class id out of range");
        out[c] = j.at(key).at(std::to_string(c)).get<std::vector<double>>();
        if (out[c].size() != sc.dim) throw ScenarioError("scenario document: mean has wrong dim");
      }
    };
    read_means("means_source", sc.classes_s, sc.means_s);
    read_means("means_target", sc.classes_t, sc.means_t);
    if (sc.shift_vector.size() != sc.dim) {
      throw ScenarioError("scenario document: shift_vector has wrong dim");
    }
    if (sc.classes_s.empty() || sc.classes_t.empty()) {
      throw ScenarioError("scenario document: both domains need at least one class");
    }
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("scenario document: ") + e.what());
  }
}

LabeledBatch sample_batch(const Scenario& sc, std::size_t images_per_domain,
                          std::uint64_t call_index) {
  LabeledBatch batch;
  for (Domain d : {Domain::kSource, Domain::kTarget}) {
    auto& out = d == Domain::kSource ? batch.source : batch.target;
    out.reserve(images_per_domain);
    for (std::size_t i = 0; i < images_per_domain; ++i) {
      CounterStream rng(sc.seed, stream_key(call_index, d, i));
      out.push_back(draw_image(sc, d, rng));
    }
  }
  return batch;
}

TrainingBatch training_view(const LabeledBatch& batch) {
  const std::size_t dim =
      batch.source.empty() ? 0 : batch.source.front().instances.cols();
  return {stack(batch.source, dim), stack(batch.target, dim), flat_labels(batch.source)};
}

EvaluationLabels evaluation_labels(const LabeledBatch& batch) {
  return {flat_labels(batch.source), flat_labels(batch.target)};
}

}  // namespace dpa::scenario
