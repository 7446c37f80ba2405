#include "dpa/gdpa.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "dpa/gaussmath.hpp"

namespace dpa::gdpa {

namespace {

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

MemoryBank::MemoryBank(std::size_t dim) : dim_(dim) {
  rows_[0].assign(dim, 0.0);
  rows_[1].assign(dim, 0.0);
}

std::span<const double> MemoryBank::centroid(Domain d) const {
  if (!initialized(d)) {
    throw std::logic_error(std::string("memory bank: ") + domain_name(d) +
                           " centroid is uninitialized; call update() with a batch mean first");
  }
  return rows_[index(d)];
}

MemoryBank::Update MemoryBank::update(Domain d, std::span<const double> batch_mean,
                                      EventLog* log) {
  if (batch_mean.size() != dim_) {
    throw ad::ShapeError("memory bank update: expected " + std::to_string(dim_) +
                         " values, got " + std::to_string(batch_mean.size()));
  }
  const double mean_norm = norm(batch_mean);
  if (mean_norm == 0.0 || !std::isfinite(mean_norm)) {
    record(log, EventKind::kZeroNormBatchMean, domain_name(d));
    return {};
  }
  auto& row = rows_[index(d)];
  if (!initialized_[index(d)]) {
    row.assign(batch_mean.begin(), batch_mean.end());
    initialized_[index(d)] = true;
    return {true, true, 0.0};
  }
  const double row_norm = norm(row);
  double dot = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) dot += row[i] * batch_mean[i];
  // A collapsed centroid has no direction; treat it as orthogonal.
  const double pi = row_norm == 0.0 ? 0.0 : dot / (mean_norm * row_norm);
  for (std::size_t i = 0; i < dim_; ++i) row[i] = row[i] * pi + batch_mean[i] * (1.0 - pi);
  return {true, false, pi};
}

double LearnableRadius::radius(Domain d) const {
  const double x = raw[index(d)];
  // Softplus underflows below about -745; floor so d stays strictly positive.
  return std::max(std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))),
                  std::numeric_limits<double>::min());
}

std::vector<double> centroid_distances(const ad::Tensor& features,
                                       std::span<const double> centroid) {
  if (features.cols() != centroid.size()) {
    throw ad::ShapeError("centroid_distances", features.shape(), ad::Shape{1, centroid.size()});
  }
  std::vector<double> out(features.rows());
  for (std::size_t r = 0; r < features.rows(); ++r) {
    double s = 0.0;
    const auto row = features.row_span(r);
    for (std::size_t c = 0; c < row.size(); ++c) s += (row[c] - centroid[c]) * (row[c] - centroid[c]);
    out[r] = std::sqrt(s);
  }
  return out;
}

GlobalSplit global_sample(std::span<const double> distances, double d) {
  if (!(d > 0.0)) throw std::invalid_argument("global_sample: radius must be positive");
  GlobalSplit split;
  for (std::size_t i = 0; i < distances.size(); ++i) {
    (distances[i] > d ? split.neg : split.pos).push_back(i);
  }
  return split;
}

GlobalSplit global_sample(const ad::Tensor& features, const MemoryBank& bank, Domain domain,
                          double d) {
  return global_sample(centroid_distances(features, bank.centroid(domain)), d);
}

ad::Var boundary_loss(std::span<const double> distances, const GlobalSplit& split,
                      const ad::Var& d) {
  const std::size_t n = distances.size();
  if (n == 0 || split.pos.size() + split.neg.size() != n) {
    throw std::invalid_argument("boundary_loss: split does not cover the distances");
  }
  // Each sample contributes sign_i * (d - dist_i), sign = +1 negative, -1 positive.
  double sign_sum = 0.0;
  double offset = 0.0;
  for (std::size_t i : split.neg) {
    sign_sum += 1.0;
    offset += distances[i];
  }
  for (std::size_t i : split.pos) {
    sign_sum -= 1.0;
    offset -= distances[i];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  return d * (sign_sum * inv_n) - offset * inv_n;
}

GdpaWeights gdpa_weights(std::span<const double> probs_s, std::span<const double> probs_t,
                         const ZConfig& z, EventLog* log) {
  if (probs_s.empty() || probs_t.empty()) {
    throw std::invalid_argument("gdpa_weights: both probability lists must be nonempty");
  }
  GdpaWeights w;
  const auto stats_s = gauss::fit_gauss(probs_s);
  const auto stats_t = gauss::fit_gauss(probs_t);
  if (z.mode == ZMode::kFixed) {
    w.z = z.fixed;
  } else {
    double s = 0.0;
    for (double p : probs_s) s += p;
    for (double p : probs_t) s += p;
    w.z = s / static_cast<double>(probs_s.size() + probs_t.size());
  }
  w.phi_s = gauss::cdf(w.z, stats_s);
  w.phi_t = gauss::cdf(w.z, stats_t);
  const double tail_t = 1.0 - w.phi_t;
  const double denom = w.phi_s + tail_t;
  w.figure_weight = (w.phi_s / std::max(tail_t, kWeightDenominatorFloor)) /
                    std::max(denom, kWeightDenominatorFloor);
  if (denom < kWeightDenominatorFloor) {
    w.fallback = true;
    record(log, EventKind::kWeightFallback);
    return w;
  }
  w.w_s = w.phi_s / denom;
  w.w_t = 1.0 - w.w_s;
  return w;
}

ad::Var gdpa_loss(const ad::Var& probs_s, std::span<const std::size_t> neg_s,
                  const ad::Var& probs_t, std::span<const std::size_t> neg_t, double w_s,
                  double w_t, const FocalOptions& options, EventLog* log) {
  ad::Tape& tape = *probs_s.tape();
  const std::size_t n_neg = neg_s.size() + neg_t.size();
  if (n_neg == 0) {
    record(log, EventKind::kEmptyGlobalNegative);
    return tape.constant(0.0);
  }
  const double gamma = options.gamma;
  ad::Var total = tape.constant(0.0);
  if (!neg_s.empty()) {
    const ad::Var p = ad::select_rows(probs_s, neg_s);
    total = total + w_s * ad::sum(ad::pow(1.0 - p, gamma) * ad::log_prob(p));
  }
  if (!neg_t.empty()) {
    const ad::Var p = ad::select_rows(probs_t, neg_t);
    const ad::Var tail = options.literal_target_term ? 1.0 - ad::log_prob(p) : ad::log1m(p);
    total = total + w_t * ad::sum(ad::pow(p, gamma) * tail);
  }
  return total * (-1.0 / static_cast<double>(n_neg));
}

}  // namespace dpa::gdpa
