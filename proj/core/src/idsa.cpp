#include "dpa/idsa.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpa::idsa {

double grad_norm(double p, Domain y) { return std::abs(p - label(y)); }

std::vector<double> grad_norms(std::span<const double> probs, Domain y) {
  std::vector<double> out(probs.size());
  std::transform(probs.begin(), probs.end(), out.begin(),
                 [y](double p) { return grad_norm(p, y); });
  return out;
}

GradNormHistogram build_histogram(std::span<const double> etas, double delta) {
  if (etas.empty()) throw std::invalid_argument("build_histogram: empty sample");
  if (!(delta > 0.0)) throw std::invalid_argument("build_histogram: delta must be positive");

  GradNormHistogram h;
  const auto [lo, hi] = std::minmax_element(etas.begin(), etas.end());
  const double n = static_cast<double>(etas.size());
  double mean = 0.0;
  for (double e : etas) mean += e;
  mean /= n;
  double ss = 0.0;
  for (double e : etas) ss += (e - mean) * (e - mean);
  h.stats = {*lo, *hi, mean, std::sqrt(ss / n)};

  h.psi = std::min((h.stats.max - h.stats.min) * h.stats.std, delta);
  h.bin_of_sample.assign(etas.size(), 0);
  if (h.psi < kPsiFloor) {
    h.psi = delta;
    h.degenerate = true;
    h.freqs = {etas.size()};
    return h;
  }
  for (std::size_t i = 0; i < etas.size(); ++i) {
    h.bin_of_sample[i] = static_cast<std::size_t>(std::floor(std::max(etas[i], 0.0) / h.psi));
  }
  const std::size_t bins = *std::max_element(h.bin_of_sample.begin(), h.bin_of_sample.end()) + 1;
  h.freqs.assign(bins, 0);
  for (std::size_t b : h.bin_of_sample) ++h.freqs[b];
  return h;
}

InstanceSplit instance_sample(const GradNormHistogram& hist) {
  const auto& f = hist.freqs;
  InstanceSplit split;
  if (f.empty()) return split;

  const std::size_t peak = *std::max_element(f.begin(), f.end());
  bool found = false;
  for (std::size_t b = 0; b < f.size() && !found;) {
    if (f[b] == 0) {
      ++b;
      continue;
    }
    std::size_t e = b;
    bool has_peak = false;
    while (e < f.size() && f[e] > 0) {
      has_peak = has_peak || f[e] == peak;
      ++e;
    }
    if (has_peak) {
      split.run_first = b;
      split.run_last = e - 1;
      found = true;
    }
    b = e;
  }
  split.tau_omega = std::min(f[split.run_first], f[split.run_last]);

  for (std::size_t i = 0; i < hist.bin_of_sample.size(); ++i) {
    const std::size_t b = hist.bin_of_sample[i];
    if (b >= split.run_first && b <= split.run_last) {
      split.pos.push_back(i);
    } else if (f[b] < split.tau_omega) {
      split.neg.push_back(i);
    } else {
      split.excluded.push_back(i);
    }
  }
  return split;
}

InstanceWeights instance_weight(const InstanceSplit& split, std::span<const double> etas,
                                EventLog* log) {
  InstanceWeights w;
  w.per_sample.assign(etas.size(), 0.0);
  if (split.pos.empty()) {
    w.skipped = true;
    record(log, EventKind::kEmptyInstancePositive);
    return w;
  }
  double s = 0.0;
  for (std::size_t i : split.pos) s += etas[i];
  w.eta_mean = s / static_cast<double>(split.pos.size());
  w.shared = std::clamp(1.0 - std::abs(w.eta_mean - 0.5) / 0.5, 0.0, 1.0);
  for (std::size_t i : split.pos) w.per_sample[i] = w.shared;
  return w;
}

ad::Var idsa_loss(const ad::Var& probs, std::span<const double> weights,
                  std::span<const Domain> labels, const LossOptions& options) {
  const std::size_t n = probs.value().rows();
  if (probs.value().cols() != 1 || weights.size() != n || labels.size() != n || n == 0) {
    throw ad::ShapeError("idsa_loss", probs.shape(), ad::Shape{weights.size(), labels.size()});
  }
  ad::Tape& tape = *probs.tape();
  const double scale = -1.0 / static_cast<double>(n);
  if (options.literal_terms) {
    const ad::Var w = tape.constant(ad::Tensor::column({weights.begin(), weights.end()}));
    const ad::Var per = (1.0 - probs) * ad::log_prob(probs) + probs * (1.0 - ad::log_prob(probs));
    return ad::sum(w * per) * scale;
  }
  std::vector<double> src(n), tgt(n);
  for (std::size_t i = 0; i < n; ++i) {
    (labels[i] == Domain::kSource ? src : tgt)[i] = weights[i];
  }
  const ad::Var ws = tape.constant(ad::Tensor::column(std::move(src)));
  const ad::Var wt = tape.constant(ad::Tensor::column(std::move(tgt)));
  const ad::Var per = ws * (1.0 - probs) * ad::log_prob(probs) + wt * probs * ad::log1m(probs);
  return ad::sum(per) * scale;
}

}  // namespace dpa::idsa
