#pragma once

#include "hcmr/config.hpp"
#include "hcmr/constraints.hpp"
#include "hcmr/decoder.hpp"
#include "hcmr/encoder.hpp"
#include "hcmr/rule_memory.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace hcmr {

struct ModelParameters {
  ModelConfig config;
  EncoderParams encoder;
  SelectorParams selector;
  RuleMemoryParams memory;

  static ModelParameters init(const ModelConfig& config, std::uint64_t seed);

  // Groups: "encoder", "selector", "memory".
  std::vector<nn::NamedParameter> parameters();
  // Deep copy; the copy shares no storage with this object.
  ModelParameters clone() const;
  bool all_finite() const;
};

// Inference-time snapshot: hard rules, the graph they induce and the neural
// parts needed for selection.
struct FrozenModel {
  ModelConfig config;
  EncoderParams encoder;
  SelectorParams selector;
  SymbolicRuleSet rules;
  ConceptGraph graph;
  std::vector<bool> pinned;        // disjunctive prediction instead of selection
  std::vector<double> priorities;  // effective priorities

  static FrozenModel from_rules(const ModelConfig& config, EncoderParams encoder, SelectorParams selector,
                                SymbolicRuleSet rules, std::vector<bool> pinned = {});
};

// Hard rules of argmax(adjust_roles(decode(memory))).
FrozenModel freeze(const ModelParameters& params, const ConstraintSet* constraints = nullptr);

}  // namespace hcmr
