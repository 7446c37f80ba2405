#pragma once

// Two-optimizer adversarial training loop.
//
// Each step builds one tape holding
//   total = L_det + L_global + L_instance + alpha * L_pcc
// where L_det is source cross-entropy, and separately the boundary loss on
// the learnable radius. SGD updates the model from `total`; Adam updates the
// radius from the boundary loss only. Discriminators see features through a
// gradient reversal layer.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dpa/autodiff.hpp"
#include "dpa/gdpa.hpp"
#include "dpa/idsa.hpp"
#include "dpa/metrics.hpp"
#include "dpa/model.hpp"
#include "dpa/optim.hpp"
#include "dpa/pcc.hpp"
#include "dpa/scenario.hpp"

namespace dpa::train {

struct Modules {
  bool gdpa = true;
  bool idsa = true;
  bool pcc = true;
  bool operator==(const Modules&) const = default;
};

struct TrainerConfig {
  std::size_t iterations = 5000;
  std::size_t lr_decay_at = 2500;
  double lr = 1e-3;
  double lr_after_decay = 1e-4;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double radius_lr = 0.1;
  double discriminator_lr_scale = 10.0;  // multiplies lr for discriminator parameters
  double gamma = 2.0;
  double delta = idsa::kDefaultDelta;
  double alpha = 0.1;
  std::size_t epoch_iterations = 500;  // alpha is 0 during the first epoch
  double grl_lambda = 1.0;
  gdpa::ZConfig z;
  bool literal_global_loss = false;
  bool literal_instance_loss = false;
  bool joint_histogram = false;  // one histogram over both domains
  Modules modules;
  std::size_t images_per_domain = 4;
  std::size_t feature_dim = 16;
  std::size_t embed_dim = 8;
  std::size_t hidden_dim = 8;
  std::size_t log_every = 100;
  std::uint64_t model_seed = 0;
  bool operator==(const TrainerConfig&) const = default;
};

double alpha_at(const TrainerConfig& config, std::size_t iteration);
double lr_at(const TrainerConfig& config, std::size_t iteration);

// Test and diagnostic hooks: force the alignment weights.
struct StepOverrides {
  std::optional<double> global_weight;    // both w_s and w_t
  std::optional<double> instance_weight;  // every instance
};

// Everything one step puts on the tape, exposed for inspection.
struct StepGraph {
  model::BoundModel model;
  ad::Var radius_raw;  // 1 x 2 parameter
  ad::Var total;
  ad::Var det;
  ad::Var global;
  ad::Var instance;
  ad::Var pcc;
  ad::Var bound;
  double alpha = 0.0;
  MetricsRow row;  // per-step metrics (iteration set by caller)
  EventLog events;
  // Batch means of the global embeddings, applied to the memory bank after the step.
  std::vector<double> embed_mean_s;
  std::vector<double> embed_mean_t;
};

struct EvaluationRecord {
  double target_shared_accuracy = 0.0;
  double source_accuracy = 0.0;
  double global_gap = 0.0;
  double instance_gap = 0.0;
  double probe_accuracy = 0.0;
  double alignment_score = 0.0;  // 1 - probe accuracy
  std::size_t target_shared_instances = 0;
};

class Trainer {
 public:
  Trainer(scenario::Scenario scenario, TrainerConfig config);

  // Builds the step's graph on `tape`. Initializes empty memory-bank rows
  // from this batch but performs no parameter update.
  StepGraph build_step(ad::Tape& tape, const scenario::TrainingBatch& batch,
                       std::size_t iteration, const scenario::EvaluationLabels* eval = nullptr,
                       const StepOverrides& overrides = {});

  // Forward, backward, SGD on the model, Adam on the radius, memory-bank update.
  MetricsRow train_step(const scenario::TrainingBatch& batch, std::size_t iteration,
                        const scenario::EvaluationLabels* eval = nullptr,
                        const StepOverrides& overrides = {});

  using RowCallback = std::function<void(const MetricsRow&)>;
  // Runs config.iterations steps and returns one averaged row per log interval.
  std::vector<MetricsRow> run(const RowCallback& on_row = {});

  EvaluationRecord evaluate(const scenario::LabeledBatch& holdout) const;
  EvaluationRecord evaluate(std::size_t images_per_domain = 64) const;

  const model::ModelParams& params() const { return params_; }
  model::ModelParams& params() { return params_; }
  const gdpa::LearnableRadius& radius() const { return radius_; }
  const gdpa::MemoryBank& bank() const { return bank_; }
  const TrainerConfig& config() const { return config_; }
  const scenario::Scenario& scenario() const { return scenario_; }

  // Holdout batches are drawn from call indices disjoint from training.
  static constexpr std::uint64_t kHoldoutCallBase = 1ULL << 40;

 private:
  scenario::Scenario scenario_;
  TrainerConfig config_;
  model::ModelParams params_;
  gdpa::LearnableRadius radius_;
  gdpa::MemoryBank bank_;
  optim::Sgd sgd_;
  optim::Adam adam_;
};

// Accuracy restricted to samples whose true label is in `classes`.
double class_subset_accuracy(const std::vector<std::size_t>& preds,
                             const std::vector<std::size_t>& labels,
                             const std::vector<std::size_t>& classes);

// Logistic-regression domain probe: fit on even-indexed rows, score on odd.
double domain_probe_accuracy(const ad::Tensor& source_features, const ad::Tensor& target_features,
                             std::size_t epochs = 300);

}  // namespace dpa::train
