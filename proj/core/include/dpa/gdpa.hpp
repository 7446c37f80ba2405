#pragma once

// Global-level domain-private alignment.
//
// Global embeddings are compared against a per-domain memory-bank centroid;
// samples beyond a learnable radius are treated as domain-private outliers
// and only those enter the adversarial focal loss. The two domain terms are
// reweighted by Gaussian CDFs fitted to the batch's domain probabilities.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "dpa/autodiff.hpp"
#include "dpa/domain.hpp"
#include "dpa/events.hpp"

namespace dpa::gdpa {

// Per-domain centroid of global embeddings, updated with a cosine-similarity
// momentum: pi = cos(mean, C); C <- pi * C + (1 - pi) * mean.
class MemoryBank {
 public:
  explicit MemoryBank(std::size_t dim);

  std::size_t dim() const { return dim_; }
  bool initialized(Domain d) const { return initialized_[index(d)]; }
  // Throws std::logic_error when the row has never been written.
  std::span<const double> centroid(Domain d) const;

  struct Update {
    bool applied = false;
    bool first = false;  // row was initialized with the batch mean
    double pi = 0.0;
  };

  // A zero-norm batch mean leaves the bank untouched and records an event.
  Update update(Domain d, std::span<const double> batch_mean, EventLog* log = nullptr);

 private:
  std::size_t dim_;
  std::array<std::vector<double>, 2> rows_;
  std::array<bool, 2> initialized_{false, false};
};

// Raw boundary parameters; the effective radius is softplus(raw) > 0.
struct LearnableRadius {
  std::array<double, 2> raw{0.0, 0.0};

  double radius(Domain d) const;
};

struct GlobalSplit {
  std::vector<std::size_t> pos;  // distance <= d
  std::vector<std::size_t> neg;  // distance > d
};

// Euclidean distance from each row of features to centroid.
std::vector<double> centroid_distances(const ad::Tensor& features,
                                       std::span<const double> centroid);

GlobalSplit global_sample(std::span<const double> distances, double d);

// Throws std::logic_error if the domain's centroid is uninitialized.
GlobalSplit global_sample(const ad::Tensor& features, const MemoryBank& bank, Domain domain,
                          double d);

// (1/n) sum_i [neg_i (d - dist_i) + (1 - neg_i)(dist_i - d)]. Distances are
// constants; only d carries gradient, d L / d d = (|neg| - |pos|) / n.
ad::Var boundary_loss(std::span<const double> distances, const GlobalSplit& split,
                      const ad::Var& d);

enum class ZMode { kBatchMean, kFixed };

struct ZConfig {
  ZMode mode = ZMode::kBatchMean;
  double fixed = 0.5;
  bool operator==(const ZConfig&) const = default;
};

struct GdpaWeights {
  double w_s = 0.5;
  double w_t = 0.5;
  double phi_s = 0.0;
  double phi_t = 0.0;
  double z = 0.5;
  bool fallback = false;
  // (phi_s / (1 - phi_t)) / (phi_s + 1 - phi_t), logged for plotting only.
  double figure_weight = 0.0;
};

inline constexpr double kWeightDenominatorFloor = 1e-12;

// w_s = phi_s / (phi_s + 1 - phi_t), w_t = 1 - w_s.
GdpaWeights gdpa_weights(std::span<const double> probs_s, std::span<const double> probs_t,
                         const ZConfig& z = {}, EventLog* log = nullptr);

struct FocalOptions {
  double gamma = 2.0;
  // Use p^gamma * (1 - log p) for the target term instead of -p^gamma log(1 - p).
  bool literal_target_term = false;
};

// Weighted adversarial focal loss over the negative (outlier) samples only.
// probs_* are n x 1 discriminator outputs; neg_* select rows. Returns a
// zero constant and records an event when both negative sets are empty.
ad::Var gdpa_loss(const ad::Var& probs_s, std::span<const std::size_t> neg_s,
                  const ad::Var& probs_t, std::span<const std::size_t> neg_t, double w_s,
                  double w_t, const FocalOptions& options = {}, EventLog* log = nullptr);

}  // namespace dpa::gdpa
