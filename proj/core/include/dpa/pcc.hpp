#pragma once

// Private class constraint: matches, across domains, how instances of
// domain-private categories spread around their centroid in feature space
// versus domain-probability space.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dpa/autodiff.hpp"
#include "dpa/events.hpp"

namespace dpa::pcc {

struct PrivateSet {
  std::vector<std::size_t> categories;  // symmetric difference, ascending
  std::vector<std::size_t> private_s;   // predicted only in the source batch
  std::vector<std::size_t> private_t;   // predicted only in the target batch
  std::vector<std::size_t> members_s;   // source sample indices in private_s
  std::vector<std::size_t> members_t;
};

PrivateSet private_categories(std::span<const std::size_t> preds_s,
                              std::span<const std::size_t> preds_t);

struct ConsistencyScore {
  ad::Var epsilon;  // 1x1, |epsilon| <= 1/n
  std::size_t n = 0;

  double value() const { return epsilon.item(); }
};

// features: n x c instance features, probs: n x 1 domain probabilities, both
// restricted to one domain's private samples. With G_i = ||x_i - mean x|| and
// g_i = |p_i - mean p|, epsilon = (1/n) cos(G, g). Returns nullopt (and
// records an event) when n < 2 or either profile has zero norm.
std::optional<ConsistencyScore> consistency(const ad::Var& features, const ad::Var& probs,
                                            EventLog* log = nullptr);

// (eps_s - eps_t)^2 with the source side detached. Zero constant when either
// side is undefined.
ad::Var pcc_loss(ad::Tape& tape, const std::optional<ConsistencyScore>& eps_s,
                 const std::optional<ConsistencyScore>& eps_t, EventLog* log = nullptr);

}  // namespace dpa::pcc
