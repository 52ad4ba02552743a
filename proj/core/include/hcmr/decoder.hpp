#pragma once

// Rule selection and symbolic rule evaluation.

#include "hcmr/autodiff.hpp"
#include "hcmr/config.hpp"
#include "hcmr/encoder.hpp"
#include "hcmr/nn.hpp"
#include "hcmr/rule_memory.hpp"

#include <vector>

namespace hcmr {

// One shared network emitting selection logits for every concept; concept i
// reads columns [i * n_R, (i + 1) * n_R) of the output layer.
struct SelectorParams {
  nn::Linear hidden;  // (2 * n_C * size_c_emb + n_C) -> size_latent, ReLU
  nn::Linear out;     // size_latent -> n_C * n_R
  int n_concepts = 0;
  int n_rules = 0;
  int size_c_emb = 0;

  static SelectorParams init(const ModelConfig& config, nn::Rng& rng);
  void collect(std::vector<nn::NamedParameter>& out);
};

// Selector input for concept i: embeddings of non-parents zeroed; for each
// parent the negative embedding is zeroed when its value is 1 and the positive
// one when it is 0; followed by the parent-masked value bits.
// values: B x n_C; parent_mask: 1 x n_C (0/1).
ad::Var selector_input(const EncoderBatch& enc, const ad::Var& values, const ad::Matrix& parent_mask);

// B x n_R selection distribution of concept i.
ad::Var select_rules_batch(int i, const EncoderBatch& enc, const ad::Var& values,
                           const ad::Matrix& parent_mask, const SelectorParams& params);

// B x n_R truth values of concept i's rules (rows of `rules_i`, n_R x n_C each).
ad::Var evaluate_rules_batch(const ad::Var& values, const RoleVars& rules_i);

// Single-example API over hard rules.
std::vector<double> select_rule_distribution(int i, const EncoderOutput& out, const std::vector<bool>& c_hat,
                                             const SymbolicRuleSet& rules, const SelectorParams& params);
bool evaluate_rule(const std::vector<Role>& rule, const std::vector<bool>& c_hat);
double predict_nonsource_concept(int i, const EncoderOutput& out, const std::vector<bool>& c_hat,
                                 const SymbolicRuleSet& rules, const SelectorParams& params);

// Row of parent indicators of concept i.
ad::Matrix parent_mask_row(const SymbolicRuleSet& rules, int i);

}  // namespace hcmr
