#include "dpa/pcc.hpp"

#include <algorithm>
#include <iterator>
#include <string>

namespace dpa::pcc {

namespace {

std::vector<std::size_t> unique_sorted(std::span<const std::size_t> v) {
  std::vector<std::size_t> out(v.begin(), v.end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<std::size_t> members(std::span<const std::size_t> preds,
                                 const std::vector<std::size_t>& cats) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (std::binary_search(cats.begin(), cats.end(), preds[i])) out.push_back(i);
  }
  return out;
}

constexpr double kProfileFloor = 1e-12;

}  // namespace

PrivateSet private_categories(std::span<const std::size_t> preds_s,
                              std::span<const std::size_t> preds_t) {
  const auto s = unique_sorted(preds_s);
  const auto t = unique_sorted(preds_t);
  PrivateSet out;
  std::set_difference(s.begin(), s.end(), t.begin(), t.end(), std::back_inserter(out.private_s));
  std::set_difference(t.begin(), t.end(), s.begin(), s.end(), std::back_inserter(out.private_t));
  std::set_union(out.private_s.begin(), out.private_s.end(), out.private_t.begin(),
                 out.private_t.end(), std::back_inserter(out.categories));
  out.members_s = members(preds_s, out.private_s);
  out.members_t = members(preds_t, out.private_t);
  return out;
}

std::optional<ConsistencyScore> consistency(const ad::Var& features, const ad::Var& probs,
                                            EventLog* log) {
  const std::size_t n = features.value().rows();
  if (probs.value().rows() != n || probs.value().cols() != 1) {
    throw ad::ShapeError("consistency", features.shape(), probs.shape());
  }
  if (n < 2) {
    record(log, EventKind::kPccUndefined, "n=" + std::to_string(n));
    return std::nullopt;
  }
  const ad::Var centered = ad::add_row(features, -ad::mean_rows(features));
  const ad::Var feat_profile = ad::l2_norm_rows(centered);
  const ad::Var prob_profile = ad::abs(probs - ad::mean(probs));

  const ad::Var feat_norm = ad::sqrt(ad::sum(feat_profile * feat_profile));
  const ad::Var prob_norm = ad::sqrt(ad::sum(prob_profile * prob_profile));
  if (feat_norm.item() < kProfileFloor || prob_norm.item() < kProfileFloor) {
    record(log, EventKind::kPccUndefined, "zero-norm profile");
    return std::nullopt;
  }
  const ad::Var cosine = ad::sum(feat_profile * prob_profile) / (feat_norm * prob_norm);
  return ConsistencyScore{cosine * (1.0 / static_cast<double>(n)), n};
}

ad::Var pcc_loss(ad::Tape& tape, const std::optional<ConsistencyScore>& eps_s,
                 const std::optional<ConsistencyScore>& eps_t, EventLog* log) {
  if (!eps_s || !eps_t) {
    record(log, EventKind::kPccUndefined, "missing side");
    return tape.constant(0.0);
  }
  const ad::Var diff = ad::detach(eps_s->epsilon) - eps_t->epsilon;
  return diff * diff;
}

}  // namespace dpa::pcc
