#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "dpa/autodiff.hpp"

namespace dpa::model {

struct Linear {
  ad::Tensor weight;  // in x out
  ad::Tensor bias;    // 1 x out
};

struct ModelShape {
  std::size_t input_dim = 16;
  std::size_t feature_dim = 16;  // extractor output
  std::size_t embed_dim = 8;     // global discriminator encoder output
  std::size_t hidden_dim = 8;    // instance discriminator hidden width
  std::size_t n_classes = 8;
};

// Feature extractor, the two domain discriminators and the source classifier.
struct ModelParams {
  Linear extractor;
  Linear global_encoder;
  Linear global_head;
  Linear instance_hidden;
  Linear instance_head;
  Linear classifier;

  static ModelParams init(const ModelShape& shape, std::uint64_t seed);

  // Fixed order: extractor, global encoder/head, instance hidden/head, classifier;
  // weight before bias within each layer.
  std::vector<ad::Tensor*> tensors();
  std::vector<const ad::Tensor*> tensors() const;
  bool all_finite() const;
};

// ModelParams registered on one tape.
struct BoundLinear {
  ad::Var weight;
  ad::Var bias;

  ad::Var operator()(const ad::Var& x) const { return ad::add_row(ad::matmul(x, weight), bias); }
};

struct BoundModel {
  BoundLinear extractor;
  BoundLinear global_encoder;
  BoundLinear global_head;
  BoundLinear instance_hidden;
  BoundLinear instance_head;
  BoundLinear classifier;

  static BoundModel bind(ad::Tape& tape, const ModelParams& params);
  // Same order as ModelParams::tensors().
  std::vector<ad::Var> vars() const;

  // Embedding x_e of the global discriminator (input already reversed).
  ad::Var global_embedding(const ad::Var& reversed) const {
    return ad::tanh(global_encoder(reversed));
  }
  ad::Var global_prob(const ad::Var& embedding) const {
    return ad::sigmoid(global_head(embedding));
  }
  ad::Var instance_prob(const ad::Var& reversed) const {
    return ad::sigmoid(instance_head(ad::tanh(instance_hidden(reversed))));
  }
};

// Plain (tape-free) forward helpers for evaluation.
ad::Tensor apply(const Linear& layer, const ad::Tensor& x);
std::vector<std::size_t> argmax_rows(const ad::Tensor& logits);

}  // namespace dpa::model
