#pragma once

// Input encoder: backbone MLP, per-concept positive/negative embeddings and
// per-concept source probabilities.

#include "hcmr/autodiff.hpp"
#include "hcmr/config.hpp"
#include "hcmr/nn.hpp"

#include <vector>

namespace hcmr {

struct EncoderParams {
  nn::Mlp backbone;        // input -> ... -> size_latent, ReLU after every layer
  nn::Linear embed;        // size_latent -> 2 * n_C * size_c_emb, leaky ReLU
  ad::Var head_weight;     // (2 * n_C * size_c_emb) x n_C, block-diagonal by mask
  ad::Var head_bias;       // 1 x n_C
  int n_concepts = 0;
  int size_c_emb = 0;

  static EncoderParams init(const ModelConfig& config, nn::Rng& rng);
  int input_dim() const { return static_cast<int>(backbone.layers.front().in_features()); }
  void collect(std::vector<nn::NamedParameter>& out);
};

struct EncoderOutput {
  std::vector<double> source_probs;  // n_C
  // n_C x size_c_emb each.
  ad::Matrix pos_emb;
  ad::Matrix neg_emb;

  // All positive embeddings followed by all negative embeddings.
  std::vector<double> embedding() const;
};

// Batched differentiable form. Row b holds example b.
struct EncoderBatch {
  ad::Var probs;    // B x n_C
  ad::Var pos_emb;  // B x (n_C * size_c_emb), concept-major
  ad::Var neg_emb;  // B x (n_C * size_c_emb)
};

EncoderBatch encode_batch(const ad::Var& x, const EncoderParams& params);
EncoderOutput encode(const std::vector<double>& x, const EncoderParams& params);

// Constant (n_C) x (n_C * size_c_emb) matrix with ones on concept j's columns.
ad::Matrix concept_expansion(int n_concepts, int size_c_emb);

}  // namespace hcmr
