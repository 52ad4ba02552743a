#include "hcmr/model.hpp"

#include "hcmr/error.hpp"

namespace hcmr {

ModelParameters ModelParameters::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  nn::Rng rng(seed);
  ModelParameters p;
  p.config = config;
  p.encoder = EncoderParams::init(config, rng);
  p.selector = SelectorParams::init(config, rng);
  p.memory = RuleMemoryParams::init(config, rng);
  return p;
}

std::vector<nn::NamedParameter> ModelParameters::parameters() {
  std::vector<nn::NamedParameter> out;
  encoder.collect(out);
  selector.collect(out);
  memory.collect(out);
  return out;
}

ModelParameters ModelParameters::clone() const {
  ModelParameters c = *this;
  for (auto& p : c.parameters()) *p.var = ad::Var::parameter(p.var->value());
  return c;
}

bool ModelParameters::all_finite() const {
  auto& self = const_cast<ModelParameters&>(*this);
  for (auto& p : self.parameters()) {
    if (!p.var->value().allFinite()) return false;
  }
  return true;
}

FrozenModel FrozenModel::from_rules(const ModelConfig& config, EncoderParams encoder, SelectorParams selector,
                                    SymbolicRuleSet rules, std::vector<bool> pinned) {
  if (rules.n_concepts() != config.n_concepts || rules.n_rules() != config.n_rules) {
    throw ShapeError("rule set dimensions differ from the model configuration");
  }
  if (pinned.empty()) pinned.assign(static_cast<std::size_t>(config.n_concepts), false);
  if (static_cast<int>(pinned.size()) != config.n_concepts) throw ShapeError("pinned flag count mismatch");
  FrozenModel m;
  // Inference never needs gradients; constants keep evaluation graph-free.
  std::vector<nn::NamedParameter> ps;
  encoder.collect(ps);
  selector.collect(ps);
  for (auto& p : ps) *p.var = ad::constant(p.var->value());
  m.config = config;
  m.encoder = std::move(encoder);
  m.selector = std::move(selector);
  m.graph = derive_graph(rules);
  m.rules = std::move(rules);
  m.pinned = std::move(pinned);
  for (int i = 0; i < config.n_concepts; ++i) {
    if (m.rules.source(i)) m.pinned[static_cast<std::size_t>(i)] = false;
  }
  return m;
}

FrozenModel freeze(const ModelParameters& params, const ConstraintSet* constraints) {
  const int n = params.config.n_concepts;
  std::vector<double> raw(params.memory.priorities.value().data(), params.memory.priorities.value().data() + n);
  const RoleTensor adjusted = adjust_roles(decode_unadjusted_roles(params.memory), raw, constraints);
  std::vector<bool> pinned(static_cast<std::size_t>(n), false);
  if (constraints) {
    for (int i = 0; i < n; ++i) pinned[static_cast<std::size_t>(i)] = constraints->pinned(i);
  }
  FrozenModel m = FrozenModel::from_rules(params.config, params.encoder, params.selector,
                                          hard_rules(adjusted), std::move(pinned));
  m.priorities = constraints ? constraints->effective_priorities(raw) : raw;
  return m;
}

}  // namespace hcmr
