#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace hcmr {

// Architecture and likelihood hyperparameters. Defaults follow the synthetic
// XOR setup (n_rules = 10, beta = 0.1, size_latent = 128, size_c_emb = 3).
struct ModelConfig {
  int n_concepts = 7;          // tasks are modelled as additional concepts
  int n_rules = 10;            // rules per concept
  int input_dim = 4;
  int size_rule_emb = 1000;
  int size_c_emb = 3;
  int size_latent = 128;
  std::vector<int> backbone_hidden{64, 64};
  double beta = 0.1;           // prototypicality weight
  double st_temperature = 1.0; // surrogate temperature of the priority step
  int mc_samples = 1;          // role samples per training step

  // Throws ArgumentError on invalid values. With `universal` set, also
  // requires n_rules >= 2 (needed for the universal-classifier guarantee).
  void validate(bool universal = false) const;

  // Elements of the (n_C, n_R, n_C, 3) role tensor.
  std::int64_t role_tensor_elements() const {
    return static_cast<std::int64_t>(n_concepts) * n_rules * n_concepts * 3;
  }
};

struct TrainConfig {
  double lr = 1e-3;
  double weight_decay = 1e-2;
  int batch_size = 256;
  int epochs = 100;
  int validate_every = 1;  // epochs between validation passes
  std::uint64_t seed = 0;
  // Parameter groups ("encoder", "selector", "memory") excluded from updates.
  std::vector<std::string> frozen_groups;
  // Smooth surrogates in the forward pass instead of straight-through
  // estimates (see GradientMode).
  bool relaxed_gradients = false;
  // Label flip probability of the likelihood; keeps failing examples
  // informative when a deterministic rule gives their label probability 0.
  double label_noise = 0.0;

  void validate() const;
};

}  // namespace hcmr
