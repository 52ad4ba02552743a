#pragma once

// Hierarchical MAP inference, exact marginals and local explanations.

#include "hcmr/model.hpp"

#include <map>
#include <string>
#include <utility>
#include <vector>

namespace hcmr {

// Concept index -> ground-truth value.
using InterventionAssignment = std::map<int, bool>;

struct ConceptTrace {
  int concept_index = 0;
  bool is_source = false;
  bool intervened = false;
  bool pinned = false;
  double probability = 0.0;
  bool value = false;
  // Non-sources only.
  int selected_rule = -1;
  std::string rule_text;
  std::vector<double> selection;
  std::vector<std::pair<int, bool>> parent_values;
};

struct PredictionTrace {
  std::vector<ConceptTrace> concepts;  // indexed by concept
  std::vector<int> order;              // evaluation order

  std::vector<double> probabilities() const;
  std::vector<bool> values() const;
};

// Threshold used everywhere: strictly above one half means True.
inline bool hard_value(double p) { return p > 0.5; }

PredictionTrace infer_map(const std::vector<double>& x, const FrozenModel& model,
                          const InterventionAssignment& interventions = {});

struct BatchPrediction {
  ad::Matrix probs;   // B x n_C
  ad::Matrix values;  // B x n_C, 0/1
};

// Row b of `interventions` (if given) applies to example b.
BatchPrediction infer_map_batch(const ad::Matrix& x, const FrozenModel& model,
                                const std::vector<InterventionAssignment>* interventions = nullptr);

// Exact p(C_i = 1 | x) by enumerating ancestor assignments. Throws
// TractabilityError when a concept has more than max_width ancestors.
std::vector<double> infer_exact(const std::vector<double>& x, const FrozenModel& model, int max_width = 20);

// One line per concept in evaluation order:
//   C1 := True via encoder (p=0.93)
//   C3 := True via rule C3 <- !C1 (C1=False)
//   C0 := False (intervened)
std::string explain(const PredictionTrace& trace);

// JSON document mirroring PredictionTrace.
std::string trace_to_json(const PredictionTrace& trace);

}  // namespace hcmr
