#include "dpa/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dpa/errors.hpp"

namespace dpa::train {

namespace {

std::vector<double> column_mean(const ad::Tensor& x) {
  std::vector<double> m(x.cols(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t c = 0; c < x.cols(); ++c) m[c] += x(r, c);
  }
  for (double& v : m) v /= static_cast<double>(x.rows());
  return m;
}

double mean_of(std::span<const double> v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

std::vector<std::size_t> iota_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

ad::Tensor sigmoid_of(const ad::Tensor& x) {
  ad::Tensor out = x;
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  return out;
}

ad::Tensor tanh_of(const ad::Tensor& x) {
  ad::Tensor out = x;
  for (double& v : out.values()) v = std::tanh(v);
  return out;
}

// Weights for one group of etas (a domain, or both when the histogram is joint).
idsa::InstanceWeights instance_weights_for(std::span<const double> etas, double delta,
                                           EventLog* log, std::size_t& neg, std::size_t& excluded) {
  const auto hist = idsa::build_histogram(etas, delta);
  const auto split = idsa::instance_sample(hist);
  neg += split.neg.size();
  excluded += split.excluded.size();
  return idsa::instance_weight(split, etas, log);
}

}  // namespace

double alpha_at(const TrainerConfig& config, std::size_t iteration) {
  return iteration < config.epoch_iterations ? 0.0 : config.alpha;
}

double lr_at(const TrainerConfig& config, std::size_t iteration) {
  return iteration < config.lr_decay_at ? config.lr : config.lr_after_decay;
}

Trainer::Trainer(scenario::Scenario scenario, TrainerConfig config)
    : scenario_(std::move(scenario)),
      config_(config),
      params_(model::ModelParams::init({scenario_.dim, config_.feature_dim, config_.embed_dim,
                                        config_.hidden_dim, scenario_.n_union},
                                       config_.model_seed)),
      bank_(config_.embed_dim),
      sgd_({config_.lr, config_.momentum, config_.weight_decay}),
      adam_(2, {config_.radius_lr}) {}

StepGraph Trainer::build_step(ad::Tape& tape, const scenario::TrainingBatch& batch,
                              std::size_t iteration, const scenario::EvaluationLabels* eval,
                              const StepOverrides& overrides) {
  StepGraph g;
  EventLog* log = &g.events;
  MetricsRow& row = g.row;
  row.iteration = iteration;
  g.model = model::BoundModel::bind(tape, params_);
  const auto& m = g.model;
  g.radius_raw = tape.parameter(ad::Tensor::column({radius_.raw[0], radius_.raw[1]}));

  const double lambda = config_.grl_lambda;
  const ad::Var feat_s = m.extractor(tape.constant(batch.source.instances));
  const ad::Var feat_t = m.extractor(tape.constant(batch.target.instances));
  const ad::Var glob_s = m.extractor(tape.constant(batch.source.globals));
  const ad::Var glob_t = m.extractor(tape.constant(batch.target.globals));

  // Supervised source task.
  const ad::Var logits_s = m.classifier(feat_s);
  g.det = ad::softmax_cross_entropy(logits_s, batch.source_labels);

  // Global level.
  const ad::Var emb_s = m.global_embedding(ad::grl(glob_s, lambda));
  const ad::Var emb_t = m.global_embedding(ad::grl(glob_t, lambda));
  const ad::Var pg_s = m.global_prob(emb_s);
  const ad::Var pg_t = m.global_prob(emb_t);
  g.embed_mean_s = column_mean(emb_s.value());
  g.embed_mean_t = column_mean(emb_t.value());
  if (!bank_.initialized(Domain::kSource)) bank_.update(Domain::kSource, g.embed_mean_s, log);
  if (!bank_.initialized(Domain::kTarget)) bank_.update(Domain::kTarget, g.embed_mean_t, log);

  const std::size_t n_glob = pg_s.value().rows() + pg_t.value().rows();
  gdpa::GlobalSplit split_s{iota_indices(pg_s.value().rows()), {}};
  gdpa::GlobalSplit split_t{iota_indices(pg_t.value().rows()), {}};
  g.bound = tape.constant(0.0);
  row.radius_s = radius_.radius(Domain::kSource);
  row.radius_t = radius_.radius(Domain::kTarget);
  if (bank_.initialized(Domain::kSource) && bank_.initialized(Domain::kTarget)) {
    const auto dist_s = gdpa::centroid_distances(emb_s.value(), bank_.centroid(Domain::kSource));
    const auto dist_t = gdpa::centroid_distances(emb_t.value(), bank_.centroid(Domain::kTarget));
    split_s = gdpa::global_sample(dist_s, row.radius_s);
    split_t = gdpa::global_sample(dist_t, row.radius_t);
    const std::size_t first[] = {0};
    const std::size_t second[] = {1};
    const ad::Var d_s = ad::softplus(ad::select_rows(g.radius_raw, first));
    const ad::Var d_t = ad::softplus(ad::select_rows(g.radius_raw, second));
    g.bound = gdpa::boundary_loss(dist_s, split_s, d_s) + gdpa::boundary_loss(dist_t, split_t, d_t);
  }

  const auto weights = gdpa::gdpa_weights(pg_s.value().values(), pg_t.value().values(), config_.z,
                                          config_.modules.gdpa ? log : nullptr);
  const gdpa::FocalOptions focal{config_.gamma, config_.literal_global_loss};
  double w_s = 0.5;
  double w_t = 0.5;
  if (config_.modules.gdpa) {
    w_s = weights.w_s;
    w_t = weights.w_t;
  }
  if (overrides.global_weight) w_s = w_t = *overrides.global_weight;
  if (config_.modules.gdpa) {
    g.global = gdpa::gdpa_loss(pg_s, split_s.neg, pg_t, split_t.neg, w_s, w_t, focal, log);
  } else {
    const auto all_s = iota_indices(pg_s.value().rows());
    const auto all_t = iota_indices(pg_t.value().rows());
    g.global = gdpa::gdpa_loss(pg_s, all_s, pg_t, all_t, w_s, w_t, focal, log);
  }

  // Instance level.
  const ad::Var pi_s = m.instance_prob(ad::grl(feat_s, lambda));
  const ad::Var pi_t = m.instance_prob(ad::grl(feat_t, lambda));
  const std::size_t n_s = pi_s.value().rows();
  const std::size_t n_t = pi_t.value().rows();
  const auto eta_s = idsa::grad_norms(pi_s.value().values(), Domain::kSource);
  const auto eta_t = idsa::grad_norms(pi_t.value().values(), Domain::kTarget);
  std::vector<double> inst_w(n_s + n_t, 1.0);
  std::size_t inst_neg = 0;
  std::size_t inst_excluded = 0;
  if (config_.modules.idsa) {
    if (config_.joint_histogram) {
      std::vector<double> etas = eta_s;
      etas.insert(etas.end(), eta_t.begin(), eta_t.end());
      const auto w = instance_weights_for(etas, config_.delta, log, inst_neg, inst_excluded);
      inst_w = w.per_sample;
      row.inst_weight_s = row.inst_weight_t = w.shared;
    } else {
      const auto ws = instance_weights_for(eta_s, config_.delta, log, inst_neg, inst_excluded);
      const auto wt = instance_weights_for(eta_t, config_.delta, log, inst_neg, inst_excluded);
      std::copy(ws.per_sample.begin(), ws.per_sample.end(), inst_w.begin());
      std::copy(wt.per_sample.begin(), wt.per_sample.end(), inst_w.begin() + static_cast<long>(n_s));
      row.inst_weight_s = ws.shared;
      row.inst_weight_t = wt.shared;
    }
  } else {
    row.inst_weight_s = row.inst_weight_t = 1.0;
  }
  if (overrides.instance_weight) {
    std::fill(inst_w.begin(), inst_w.end(), *overrides.instance_weight);
    row.inst_weight_s = row.inst_weight_t = *overrides.instance_weight;
  }
  std::vector<Domain> inst_labels(n_s, Domain::kSource);
  inst_labels.resize(n_s + n_t, Domain::kTarget);
  g.instance = idsa::idsa_loss(ad::concat_rows(pi_s, pi_t), inst_w, inst_labels,
                               {config_.literal_instance_loss});

  // Private class constraint.
  const auto preds_s = model::argmax_rows(logits_s.value());
  const auto preds_t = model::argmax_rows(model::apply(params_.classifier, feat_t.value()));
  g.alpha = config_.modules.pcc ? alpha_at(config_, iteration) : 0.0;
  if (config_.modules.pcc) {
    const auto priv = pcc::private_categories(preds_s, preds_t);
    const auto eps_s = pcc::consistency(ad::select_rows(feat_s, priv.members_s),
                                        ad::select_rows(pi_s, priv.members_s), log);
    const auto eps_t = pcc::consistency(ad::select_rows(feat_t, priv.members_t),
                                        ad::select_rows(pi_t, priv.members_t), log);
    g.pcc = pcc::pcc_loss(tape, eps_s, eps_t, log);
    if (eps_s && eps_t) {
      row.eps_s = eps_s->value();
      row.eps_t = eps_t->value();
    }
  } else {
    g.pcc = tape.constant(0.0);
  }

  g.total = g.det + g.global + g.instance + g.pcc * g.alpha;

  // Metrics.
  row.p_global_s = mean_of(pg_s.value().values());
  row.p_global_t = mean_of(pg_t.value().values());
  row.gap_global = std::abs(row.p_global_s - row.p_global_t);
  row.p_instance_s = mean_of(pi_s.value().values());
  row.p_instance_t = mean_of(pi_t.value().values());
  row.gap_instance = std::abs(row.p_instance_s - row.p_instance_t);
  row.w_s = w_s;
  row.w_t = w_t;
  row.w_gap = std::abs(w_s - w_t);
  row.w_figure = weights.figure_weight;
  row.neg_frac_global =
      static_cast<double>(split_s.neg.size() + split_t.neg.size()) / static_cast<double>(n_glob);
  row.neg_frac_instance = static_cast<double>(inst_neg) / static_cast<double>(n_s + n_t);
  row.excluded_frac_instance = static_cast<double>(inst_excluded) / static_cast<double>(n_s + n_t);
  row.loss_det = g.det.item();
  row.loss_global = g.global.item();
  row.loss_instance = g.instance.item();
  row.alpha = g.alpha;
  row.loss_pcc = g.pcc.item() * g.alpha;
  row.loss_total = g.total.item();
  row.loss_bound = g.bound.item();
  if (eval != nullptr) {
    row.target_shared_acc = class_subset_accuracy(preds_t, eval->target, scenario_.shared_classes());
  }
  return g;
}

MetricsRow Trainer::train_step(const scenario::TrainingBatch& batch, std::size_t iteration,
                               const scenario::EvaluationLabels* eval,
                               const StepOverrides& overrides) {
  ad::Tape tape;
  StepGraph g = build_step(tape, batch, iteration, eval, overrides);

  const auto grads = tape.backward(g.total);
  std::vector<ad::Tensor> model_grads;
  for (const auto& v : g.model.vars()) model_grads.push_back(grads.of(v));
  // Discriminator tensors sit between the extractor and the classifier in parameter order.
  for (std::size_t i = 2; i + 2 < model_grads.size(); ++i) {
    for (double& x : model_grads[i].values()) x *= config_.discriminator_lr_scale;
  }
  const auto tensors = params_.tensors();
  sgd_.step(tensors, model_grads, lr_at(config_, iteration), &g.events);

  const auto radius_grads = tape.backward(g.bound).of(g.radius_raw);
  adam_.step(radius_.raw, radius_grads.values(), &g.events);

  bank_.update(Domain::kSource, g.embed_mean_s, &g.events);
  bank_.update(Domain::kTarget, g.embed_mean_t, &g.events);

  if (!params_.all_finite()) {
    throw NumericError("train_step: model parameters became non-finite at iteration " +
                       std::to_string(iteration));
  }
  g.row.flags = g.events.flags();
  return g.row;
}

std::vector<MetricsRow> Trainer::run(const RowCallback& on_row) {
  std::vector<MetricsRow> rows;
  MetricsAccumulator acc;
  const std::size_t every = std::max<std::size_t>(config_.log_every, 1);
  for (std::size_t it = 0; it < config_.iterations; ++it) {
    const auto batch = scenario::sample_batch(scenario_, config_.images_per_domain, it);
    const auto view = scenario::training_view(batch);
    const auto labels = scenario::evaluation_labels(batch);
    acc.add(train_step(view, it, &labels));
    if ((it + 1) % every == 0 || it + 1 == config_.iterations) {
      rows.push_back(acc.mean(it + 1));
      if (on_row) on_row(rows.back());
      acc.reset();
    }
  }
  return rows;
}

EvaluationRecord Trainer::evaluate(const scenario::LabeledBatch& holdout) const {
  const auto view = scenario::training_view(holdout);
  const auto labels = scenario::evaluation_labels(holdout);
  const auto shared = scenario_.shared_classes();
  EvaluationRecord rec;

  const ad::Tensor feat_s = model::apply(params_.extractor, view.source.instances);
  const ad::Tensor feat_t = model::apply(params_.extractor, view.target.instances);
  const auto preds_s = model::argmax_rows(model::apply(params_.classifier, feat_s));
  const auto preds_t = model::argmax_rows(model::apply(params_.classifier, feat_t));
  rec.target_shared_accuracy = class_subset_accuracy(preds_t, labels.target, shared);
  rec.source_accuracy = class_subset_accuracy(preds_s, labels.source, scenario_.classes_s);
  rec.target_shared_instances = static_cast<std::size_t>(std::count_if(
      labels.target.begin(), labels.target.end(),
      [&](std::size_t c) { return std::binary_search(shared.begin(), shared.end(), c); }));

  auto global_prob = [&](const ad::Tensor& globals) {
    const auto f = model::apply(params_.extractor, globals);
    const auto e = tanh_of(model::apply(params_.global_encoder, f));
    return sigmoid_of(model::apply(params_.global_head, e));
  };
  auto instance_prob = [&](const ad::Tensor& f) {
    const auto h = tanh_of(model::apply(params_.instance_hidden, f));
    return sigmoid_of(model::apply(params_.instance_head, h));
  };
  rec.global_gap = std::abs(mean_of(global_prob(view.source.globals).values()) -
                            mean_of(global_prob(view.target.globals).values()));
  rec.instance_gap =
      std::abs(mean_of(instance_prob(feat_s).values()) - mean_of(instance_prob(feat_t).values()));

  auto shared_rows = [&](const ad::Tensor& f, const std::vector<std::size_t>& lab) {
    std::vector<double> data;
    std::size_t n = 0;
    for (std::size_t r = 0; r < f.rows(); ++r) {
      if (!std::binary_search(shared.begin(), shared.end(), lab[r])) continue;
      data.insert(data.end(), f.row_span(r).begin(), f.row_span(r).end());
      ++n;
    }
    return ad::Tensor(n, f.cols(), std::move(data));
  };
  const auto probe_s = shared_rows(feat_s, labels.source);
  const auto probe_t = shared_rows(feat_t, labels.target);
  rec.probe_accuracy = (probe_s.rows() >= 2 && probe_t.rows() >= 2)
                           ? domain_probe_accuracy(probe_s, probe_t)
                           : 0.5;
  rec.alignment_score = 1.0 - rec.probe_accuracy;
  return rec;
}

EvaluationRecord Trainer::evaluate(std::size_t images_per_domain) const {
  return evaluate(scenario::sample_batch(scenario_, images_per_domain, kHoldoutCallBase));
}

double class_subset_accuracy(const std::vector<std::size_t>& preds,
                             const std::vector<std::size_t>& labels,
                             const std::vector<std::size_t>& classes) {
  std::size_t hit = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (std::find(classes.begin(), classes.end(), labels[i]) == classes.end()) continue;
    ++total;
    if (preds[i] == labels[i]) ++hit;
  }
  return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
}

double domain_probe_accuracy(const ad::Tensor& source_features, const ad::Tensor& target_features,
                             std::size_t epochs) {
  const std::size_t dim = source_features.cols();
  struct Sample {
    std::span<const double> x;
    double y;
  };
  std::vector<Sample> fit, test;
  for (std::size_t r = 0; r < source_features.rows(); ++r) {
    (r % 2 == 0 ? fit : test).push_back({source_features.row_span(r), 0.0});
  }
  for (std::size_t r = 0; r < target_features.rows(); ++r) {
    (r % 2 == 0 ? fit : test).push_back({target_features.row_span(r), 1.0});
  }

  // Standardize with fit-set statistics.
  std::vector<double> mu(dim, 0.0), sd(dim, 0.0);
  for (const auto& s : fit) {
    for (std::size_t c = 0; c < dim; ++c) mu[c] += s.x[c];
  }
  for (double& v : mu) v /= static_cast<double>(fit.size());
  for (const auto& s : fit) {
    for (std::size_t c = 0; c < dim; ++c) sd[c] += (s.x[c] - mu[c]) * (s.x[c] - mu[c]);
  }
  for (double& v : sd) v = std::sqrt(v / static_cast<double>(fit.size())) + 1e-12;

  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  constexpr double kLr = 0.5;
  constexpr double kL2 = 1e-3;
  std::vector<double> gw(dim);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::fill(gw.begin(), gw.end(), 0.0);
    double gb = 0.0;
    for (const auto& s : fit) {
      double z = b;
      for (std::size_t c = 0; c < dim; ++c) z += w[c] * (s.x[c] - mu[c]) / sd[c];
      const double err = 1.0 / (1.0 + std::exp(-z)) - s.y;
      for (std::size_t c = 0; c < dim; ++c) gw[c] += err * (s.x[c] - mu[c]) / sd[c];
      gb += err;
    }
    const double inv = 1.0 / static_cast<double>(fit.size());
    for (std::size_t c = 0; c < dim; ++c) w[c] -= kLr * (gw[c] * inv + kL2 * w[c]);
    b -= kLr * gb * inv;
  }

  std::size_t correct = 0;
  for (const auto& s : test) {
    double z = b;
    for (std::size_t c = 0; c < dim; ++c) z += w[c] * (s.x[c] - mu[c]) / sd[c];
    if ((z > 0.0 ? 1.0 : 0.0) == s.y) ++correct;
  }
  return test.empty() ? 0.5 : static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace dpa::train
