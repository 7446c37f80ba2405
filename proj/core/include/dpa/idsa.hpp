#pragma once

// Instance-level domain-shared alignment.
//
// Per-instance gradient norms eta = |p - y_d| are binned with width
// psi = min((eta_max - eta_min) * eta_std, delta). The run of consecutive
// nonzero bins around the mode is kept as domain-shared; low-frequency bins
// outside it are rejected. Kept instances share one weight that peaks when
// the discriminator is maximally confused (mean eta = 0.5).

#include <cstddef>
#include <span>
#include <vector>

#include "dpa/autodiff.hpp"
#include "dpa/domain.hpp"
#include "dpa/events.hpp"

namespace dpa::idsa {

inline constexpr double kPsiFloor = 1e-6;
inline constexpr double kDefaultDelta = 0.1;

double grad_norm(double p, Domain y);
std::vector<double> grad_norms(std::span<const double> probs, Domain y);

struct EtaStats {
  double min = 0.0;
  double max = 0.0;
  double mean = 0.0;
  double std = 0.0;  // population
};

struct GradNormHistogram {
  double psi = 0.0;
  std::vector<std::size_t> freqs;
  std::vector<std::size_t> bin_of_sample;
  EtaStats stats;
  // All etas (nearly) equal: psi fell back to delta and everything sits in bin 0.
  bool degenerate = false;
};

GradNormHistogram build_histogram(std::span<const double> etas, double delta = kDefaultDelta);

struct InstanceSplit {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  // Out-of-run samples whose bin frequency is not below tau_omega.
  std::vector<std::size_t> excluded;
  std::size_t run_first = 0;  // inclusive bin range of the kept run
  std::size_t run_last = 0;
  std::size_t tau_omega = 0;
};

// Run selection: among maximal runs of nonzero bins, the one holding the
// most frequent bin; ties go to the lowest starting bin.
InstanceSplit instance_sample(const GradNormHistogram& hist);

struct InstanceWeights {
  std::vector<double> per_sample;
  double shared = 0.0;    // weight given to every positive sample
  double eta_mean = 0.0;  // over positives
  bool skipped = false;
};

// Positives get 1 - |eta_mean - 0.5| / 0.5, everything else 0.
InstanceWeights instance_weight(const InstanceSplit& split, std::span<const double> etas,
                                EventLog* log = nullptr);

struct LossOptions {
  // Apply both printed terms, (1 - p) log p + p (1 - log p), to every sample.
  bool literal_terms = false;
};

// -(1/n) sum_i W_i [(1 - y_i)(1 - p_i) log p_i + y_i p_i log(1 - p_i)].
// probs is n x 1; weights and labels have n entries.
ad::Var idsa_loss(const ad::Var& probs, std::span<const double> weights,
                  std::span<const Domain> labels, const LossOptions& options = {});

}  // namespace dpa::idsa
