#pragma once

// Concept-intervention policies and accuracy-versus-budget curves.

#include "hcmr/datasets.hpp"
#include "hcmr/inference.hpp"
#include "hcmr/training.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace hcmr {

enum class PolicyKind { GraphSourcesFirst, GraphSinksFirst, Uncertainty, Random };

struct InterventionPolicy {
  PolicyKind kind = PolicyKind::GraphSourcesFirst;
  std::uint64_t seed = 0;
};

std::string policy_name(PolicyKind kind);
// Accepts graph_sources_first, graph_sinks_first, uncertainty, random.
PolicyKind parse_policy(std::string_view name);

// Order in which concepts of one example are intervened on.
//   graph_sources_first: ascending depth, ties by index
//   graph_sinks_first:   ascending height, ties by index
//   uncertainty:         ascending |p - 0.5|, ties by index
//   random:              shuffle seeded by (policy.seed, example_index)
std::vector<int> make_order(const InterventionPolicy& policy, const ConceptGraph& graph,
                            const std::vector<double>& probs, std::uint64_t example_index);

struct CurvePoint {
  int budget = 0;
  double accuracy = 0.0;  // intervened concepts count as correct
  double delta = 0.0;     // accuracy change on non-intervened concepts
};

struct InterventionCurve {
  std::string policy;
  std::vector<CurvePoint> points;
};

// Any predictor mapping inputs (and per-example interventions) to hard
// concept values and probabilities.
using BatchPredictor =
    std::function<BatchPrediction(const ad::Matrix& x, const std::vector<InterventionAssignment>* interventions)>;

InterventionCurve evaluate_interventions(const BatchPredictor& predict, const ConceptGraph& graph,
                                         const Dataset& data, const InterventionPolicy& policy,
                                         const std::vector<int>& budgets);

InterventionCurve evaluate_interventions(const FrozenModel& model, const Dataset& data,
                                         const InterventionPolicy& policy, const std::vector<int>& budgets);

BatchPredictor model_predictor(const FrozenModel& model);
BatchPredictor baseline_predictor(const BaselineModel& model);

// "policy,budget,accuracy,delta" with a header row.
std::string curve_csv(const std::vector<InterventionCurve>& curves);

}  // namespace hcmr
