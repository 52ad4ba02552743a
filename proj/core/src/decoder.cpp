#include "hcmr/decoder.hpp"

#include "hcmr/error.hpp"

namespace hcmr {

SelectorParams SelectorParams::init(const ModelConfig& config, nn::Rng& rng) {
  SelectorParams p;
  p.n_concepts = config.n_concepts;
  p.n_rules = config.n_rules;
  p.size_c_emb = config.size_c_emb;
  const Eigen::Index in = 2 * static_cast<Eigen::Index>(config.n_concepts) * config.size_c_emb + config.n_concepts;
  p.hidden = nn::Linear(in, config.size_latent, rng);
  p.out = nn::Linear(config.size_latent, static_cast<Eigen::Index>(config.n_concepts) * config.n_rules, rng);
  return p;
}

void SelectorParams::collect(std::vector<nn::NamedParameter>& out) {
  hidden.collect("selector", "hidden", out);
  this->out.collect("selector", "out", out);
}

ad::Var selector_input(const EncoderBatch& enc, const ad::Var& values, const ad::Matrix& parent_mask) {
  const Eigen::Index n = parent_mask.cols();
  const int e = static_cast<int>(enc.pos_emb.cols() / n);
  ad::Var mask = ad::constant(parent_mask);
  ad::Var on = ad::mul(values, mask);
  ad::Var off = ad::mul(ad::one_minus(values), mask);
  ad::Var expand = ad::constant(concept_expansion(static_cast<int>(n), e));
  ad::Var pos = ad::mul(enc.pos_emb, ad::matmul(on, expand));
  ad::Var neg = ad::mul(enc.neg_emb, ad::matmul(off, expand));
  return ad::concat_cols({pos, neg, on});
}

ad::Var select_rules_batch(int i, const EncoderBatch& enc, const ad::Var& values, const ad::Matrix& parent_mask,
                           const SelectorParams& params) {
  ad::Var h = ad::relu(params.hidden.forward(selector_input(enc, values, parent_mask)));
  const Eigen::Index start = static_cast<Eigen::Index>(i) * params.n_rules;
  ad::Var logits = ad::add(ad::matmul(h, ad::slice_cols(params.out.weight, start, params.n_rules)),
                           ad::slice_cols(params.out.bias, start, params.n_rules));
  return ad::softmax_rows(logits);
}

ad::Var evaluate_rules_batch(const ad::Var& values, const RoleVars& rules_i) {
  return ad::literal_product(values, rules_i.pos, rules_i.neg, rules_i.irr, 1.0);
}

ad::Matrix parent_mask_row(const SymbolicRuleSet& rules, int i) {
  ad::Matrix m(1, rules.n_concepts());
  for (int j = 0; j < rules.n_concepts(); ++j) m(0, j) = rules.parent(i, j) ? 1.0 : 0.0;
  return m;
}

namespace {

EncoderBatch single_batch(const EncoderOutput& out) {
  const auto n = out.pos_emb.rows();
  const auto e = out.pos_emb.cols();
  ad::Matrix pos(1, n * e);
  ad::Matrix neg(1, n * e);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index d = 0; d < e; ++d) {
      pos(0, j * e + d) = out.pos_emb(j, d);
      neg(0, j * e + d) = out.neg_emb(j, d);
    }
  }
  ad::Matrix probs(1, n);
  for (Eigen::Index j = 0; j < n; ++j) probs(0, j) = out.source_probs[static_cast<std::size_t>(j)];
  return EncoderBatch{ad::constant(probs), ad::constant(pos), ad::constant(neg)};
}

ad::Matrix value_row(const std::vector<bool>& c_hat) {
  ad::Matrix v(1, static_cast<Eigen::Index>(c_hat.size()));
  for (std::size_t j = 0; j < c_hat.size(); ++j) v(0, static_cast<Eigen::Index>(j)) = c_hat[j] ? 1.0 : 0.0;
  return v;
}

}  // namespace

std::vector<double> select_rule_distribution(int i, const EncoderOutput& out, const std::vector<bool>& c_hat,
                                             const SymbolicRuleSet& rules, const SelectorParams& params) {
  if (i < 0 || i >= rules.n_concepts()) throw ArgumentError("concept index out of range");
  if (rules.source(i)) throw ContractError("rule selection requested for source concept C" + std::to_string(i));
  if (static_cast<int>(c_hat.size()) != rules.n_concepts()) throw ShapeError("concept vector length mismatch");
  ad::Var s = select_rules_batch(i, single_batch(out), ad::constant(value_row(c_hat)), parent_mask_row(rules, i),
                                 params);
  return std::vector<double>(s.value().data(), s.value().data() + s.cols());
}

bool evaluate_rule(const std::vector<Role>& rule, const std::vector<bool>& c_hat) {
  for (std::size_t j = 0; j < rule.size(); ++j) {
    if (rule[j] == Role::Positive && !c_hat[j]) return false;
    if (rule[j] == Role::Negative && c_hat[j]) return false;
  }
  return true;
}

double predict_nonsource_concept(int i, const EncoderOutput& out, const std::vector<bool>& c_hat,
                                 const SymbolicRuleSet& rules, const SelectorParams& params) {
  const auto s = select_rule_distribution(i, out, c_hat, rules, params);
  double p = 0.0;
  for (int k = 0; k < rules.n_rules(); ++k) {
    if (evaluate_rule(rules.rule(i, k), c_hat)) p += s[static_cast<std::size_t>(k)];
  }
  return p;
}

}  // namespace hcmr
