#include "dpa/model.hpp"

#include <algorithm>
#include <cmath>

#include "dpa/random.hpp"

namespace dpa::model {

namespace {

Linear make_linear(std::size_t in, std::size_t out, CounterStream& rng) {
  Linear l{ad::Tensor(in, out), ad::Tensor(1, out)};
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (double& w : l.weight.values()) w = rng.normal(0.0, scale);
  return l;
}

BoundLinear bind_linear(ad::Tape& tape, const Linear& l) {
  return {tape.parameter(l.weight), tape.parameter(l.bias)};
}

}  // namespace

ModelParams ModelParams::init(const ModelShape& shape, std::uint64_t seed) {
  ModelParams p;
  CounterStream rng(seed, 0x6d6f64656cULL);
  p.extractor = make_linear(shape.input_dim, shape.feature_dim, rng);
  p.global_encoder = make_linear(shape.feature_dim, shape.embed_dim, rng);
  p.global_head = make_linear(shape.embed_dim, 1, rng);
  p.instance_hidden = make_linear(shape.feature_dim, shape.hidden_dim, rng);
  p.instance_head = make_linear(shape.hidden_dim, 1, rng);
  p.classifier = make_linear(shape.feature_dim, shape.n_classes, rng);
  return p;
}

std::vector<ad::Tensor*> ModelParams::tensors() {
  return {&extractor.weight,       &extractor.bias,       &global_encoder.weight,
          &global_encoder.bias,    &global_head.weight,   &global_head.bias,
          &instance_hidden.weight, &instance_hidden.bias, &instance_head.weight,
          &instance_head.bias,     &classifier.weight,    &classifier.bias};
}

std::vector<const ad::Tensor*> ModelParams::tensors() const {
  auto mut = const_cast<ModelParams*>(this)->tensors();
  return {mut.begin(), mut.end()};
}

bool ModelParams::all_finite() const {
  const auto ts = tensors();
  return std::all_of(ts.begin(), ts.end(), [](const ad::Tensor* t) { return t->all_finite(); });
}

BoundModel BoundModel::bind(ad::Tape& tape, const ModelParams& params) {
  return {bind_linear(tape, params.extractor),       bind_linear(tape, params.global_encoder),
          bind_linear(tape, params.global_head),     bind_linear(tape, params.instance_hidden),
          bind_linear(tape, params.instance_head),   bind_linear(tape, params.classifier)};
}

std::vector<ad::Var> BoundModel::vars() const {
  return {extractor.weight,       extractor.bias,       global_encoder.weight,
          global_encoder.bias,    global_head.weight,   global_head.bias,
          instance_hidden.weight, instance_hidden.bias, instance_head.weight,
          instance_head.bias,     classifier.weight,    classifier.bias};
}

ad::Tensor apply(const Linear& layer, const ad::Tensor& x) {
  if (x.cols() != layer.weight.rows()) throw ad::ShapeError("linear", x.shape(), layer.weight.shape());
  ad::Tensor out(x.rows(), layer.weight.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) = layer.bias(0, j);
    for (std::size_t p = 0; p < x.cols(); ++p) {
      const double xv = x(i, p);
      for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += xv * layer.weight(p, j);
    }
  }
  return out;
}

std::vector<std::size_t> argmax_rows(const ad::Tensor& logits) {
  std::vector<std::size_t> out(logits.rows());
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const auto row = logits.row_span(r);
    out[r] = static_cast<std::size_t>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

}  // namespace dpa::model
