#pragma once

// Synthetic universal domain adaptation benchmark.
//
// Classes are isotropic unit-variance Gaussian clusters. Shared classes
// exist in both domains; their target copies are translated by a constant
// shift vector. Private classes live in exactly one domain. A pseudo-image
// is m instances drawn from one class cluster plus a global feature equal to
// the instance mean with small isotropic noise.

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpa/domain.hpp"
#include "dpa/tensor.hpp"

namespace dpa::scenario {

inline constexpr int kSchemaVersion = 1;

class ScenarioError : public std::invalid_argument {
 public:
  explicit ScenarioError(const std::string& what) : std::invalid_argument(what) {}
};

struct ScenarioOptions {
  std::size_t dim = 16;
  std::size_t instances_per_image = 8;
  double spacing = 4.0;       // distance between any two class means
  double global_noise = 0.05;  // std of the noise added to global features
  double cluster_std = 1.0;
};

struct Scenario {
  std::size_t dim = 0;
  std::size_t instances_per_image = 0;
  std::size_t n_union = 0;
  std::size_t n_shared = 0;
  double shift = 0.0;
  double spacing = 0.0;
  double global_noise = 0.0;
  double cluster_std = 1.0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> classes_s;  // ascending class ids
  std::vector<std::size_t> classes_t;
  std::vector<std::vector<double>> means_s;  // indexed by class id; empty if absent
  std::vector<std::vector<double>> means_t;
  std::vector<double> shift_vector;          // norm == shift

  // |Cs ∩ Ct| / |Cs ∪ Ct| recomputed from the class sets.
  double beta() const;
  std::vector<std::size_t> shared_classes() const;
  const std::vector<std::size_t>& classes(Domain d) const {
    return d == Domain::kSource ? classes_s : classes_t;
  }
  const std::vector<double>& mean(Domain d, std::size_t cls) const;
  bool has_class(Domain d, std::size_t cls) const;
};

// Shared-class count k realizing beta = k / n_union exactly; throws
// ScenarioError naming the nearest realizable ratios otherwise.
std::size_t shared_count_for(double beta, std::size_t n_union);

// Shared classes take ids [0, k); private ids alternate source, target, ...
Scenario make_scenario(double beta, std::size_t n_union, double shift, std::uint64_t seed,
                       const ScenarioOptions& options = {});

std::string to_json(const Scenario& sc);
// Validates schema and version; throws ScenarioError.
Scenario from_json(const std::string& text);

struct PseudoImage {
  ad::Tensor instances;  // m x dim
  std::vector<std::size_t> labels;
  Domain domain = Domain::kSource;
  ad::Tensor global;  // 1 x dim
};

struct LabeledBatch {
  std::vector<PseudoImage> source;
  std::vector<PseudoImage> target;
};

// Deterministic in (scenario seed, call index, images_per_domain).
LabeledBatch sample_batch(const Scenario& sc, std::size_t images_per_domain,
                          std::uint64_t call_index);

// Stacked features for one domain; labels are only carried for the source.
struct DomainView {
  ad::Tensor instances;  // (images * m) x dim
  ad::Tensor globals;    // images x dim
  std::vector<std::size_t> image_of_instance;
};

// What the trainer may see: target class labels are absent.
struct TrainingBatch {
  DomainView source;
  DomainView target;
  std::vector<std::size_t> source_labels;  // per source instance
};

// Evaluation-side labels for a batch (instance order matches DomainView).
struct EvaluationLabels {
  std::vector<std::size_t> source;
  std::vector<std::size_t> target;
};

TrainingBatch training_view(const LabeledBatch& batch);
EvaluationLabels evaluation_labels(const LabeledBatch& batch);

}  // namespace dpa::scenario
