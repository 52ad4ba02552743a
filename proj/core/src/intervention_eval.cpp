#include "hcmr/intervention_eval.hpp"

#include "hcmr/error.hpp"
#include "hcmr/rule_io.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

namespace hcmr {

std::string policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::GraphSourcesFirst: return "graph_sources_first";
    case PolicyKind::GraphSinksFirst: return "graph_sinks_first";
    case PolicyKind::Uncertainty: return "uncertainty";
    case PolicyKind::Random: return "random";
  }
  return "unknown";
}

PolicyKind parse_policy(std::string_view name) {
  for (auto k : {PolicyKind::GraphSourcesFirst, PolicyKind::GraphSinksFirst, PolicyKind::Uncertainty,
                 PolicyKind::Random}) {
    if (name == policy_name(k)) return k;
  }
  throw ArgumentError("unknown intervention policy '" + std::string(name) + "'");
}

std::vector<int> make_order(const InterventionPolicy& policy, const ConceptGraph& graph,
                            const std::vector<double>& probs, std::uint64_t example_index) {
  const int n = graph.n_concepts;
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  auto by_key = [&](const std::vector<double>& key) {
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return key[static_cast<std::size_t>(a)] < key[static_cast<std::size_t>(b)];
    });
  };
  switch (policy.kind) {
    case PolicyKind::GraphSourcesFirst: {
      const auto d = graph.depths();
      by_key(std::vector<double>(d.begin(), d.end()));
      break;
    }
    case PolicyKind::GraphSinksFirst: {
      const auto h = graph.heights();
      by_key(std::vector<double>(h.begin(), h.end()));
      break;
    }
    case PolicyKind::Uncertainty: {
      if (static_cast<int>(probs.size()) != n) throw ShapeError("uncertainty policy needs one probability per concept");
      std::vector<double> key(probs.size());
      for (std::size_t i = 0; i < probs.size(); ++i) key[i] = std::abs(probs[i] - 0.5);
      by_key(key);
      break;
    }
    case PolicyKind::Random: {
      std::seed_seq seq{static_cast<std::uint32_t>(policy.seed), static_cast<std::uint32_t>(policy.seed >> 32),
                        static_cast<std::uint32_t>(example_index), static_cast<std::uint32_t>(example_index >> 32)};
      std::mt19937_64 rng(seq);
      std::shuffle(order.begin(), order.end(), rng);
      break;
    }
  }
  return order;
}

InterventionCurve evaluate_interventions(const BatchPredictor& predict, const ConceptGraph& graph,
                                         const Dataset& data, const InterventionPolicy& policy,
                                         const std::vector<int>& budgets) {
  const int n = data.n_concepts();
  if (graph.n_concepts != n) throw ShapeError("graph and dataset disagree on the concept count");
  const Eigen::Index rows = data.size();
  const BatchPrediction before = predict(data.inputs, nullptr);

  std::vector<std::vector<int>> orders(static_cast<std::size_t>(rows));
  for (Eigen::Index r = 0; r < rows; ++r) {
    std::vector<double> p(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = before.probs(r, i);
    std::vector<int> full = make_order(policy, graph, p, static_cast<std::uint64_t>(r));
    // Only observed labels can be revealed.
    std::erase_if(full, [&](int c) { return data.observed(r, c) == 0.0; });
    orders[static_cast<std::size_t>(r)] = std::move(full);
  }

  InterventionCurve curve;
  curve.policy = policy_name(policy.kind);
  for (int budget : budgets) {
    if (budget < 0 || budget > n) throw ArgumentError("budget " + std::to_string(budget) + " outside [0, n_C]");
    std::vector<InterventionAssignment> ivs(static_cast<std::size_t>(rows));
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& ord = orders[static_cast<std::size_t>(r)];
      const std::size_t take = std::min(ord.size(), static_cast<std::size_t>(budget));
      for (std::size_t m = 0; m < take; ++m) ivs[static_cast<std::size_t>(r)][ord[m]] = data.labels(r, ord[m]) != 0.0;
    }
    const BatchPrediction after = budget == 0 ? before : predict(data.inputs, &ivs);

    double correct = 0.0;
    double total = 0.0;
    double rest_before = 0.0;
    double rest_after = 0.0;
    double rest_total = 0.0;
    for (Eigen::Index r = 0; r < rows; ++r) {
      const auto& iv = ivs[static_cast<std::size_t>(r)];
      for (int c = 0; c < n; ++c) {
        if (data.observed(r, c) == 0.0) continue;
        const bool ok_after = after.values(r, c) == data.labels(r, c);
        total += 1.0;
        if (iv.count(c)) {
          correct += 1.0;
          continue;
        }
        correct += ok_after ? 1.0 : 0.0;
        rest_total += 1.0;
        rest_after += ok_after ? 1.0 : 0.0;
        rest_before += before.values(r, c) == data.labels(r, c) ? 1.0 : 0.0;
      }
    }
    CurvePoint pt;
    pt.budget = budget;
    pt.accuracy = total > 0.0 ? correct / total : 0.0;
    pt.delta = rest_total > 0.0 ? (rest_after - rest_before) / rest_total : 0.0;
    curve.points.push_back(pt);
  }
  return curve;
}

BatchPredictor model_predictor(const FrozenModel& model) {
  return [&model](const ad::Matrix& x, const std::vector<InterventionAssignment>* ivs) {
    return infer_map_batch(x, model, ivs);
  };
}

BatchPredictor baseline_predictor(const BaselineModel& model) {
  return [&model](const ad::Matrix& x, const std::vector<InterventionAssignment>* ivs) {
    BatchPrediction out;
    out.probs = model.predict_proba(x);
    out.values = model.predict(x, ivs);
    if (ivs) {
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        for (const auto& [c, v] : (*ivs)[static_cast<std::size_t>(r)]) out.probs(r, c) = v ? 1.0 : 0.0;
      }
    }
    return out;
  };
}

InterventionCurve evaluate_interventions(const FrozenModel& model, const Dataset& data,
                                         const InterventionPolicy& policy, const std::vector<int>& budgets) {
  return evaluate_interventions(model_predictor(model), model.graph, data, policy, budgets);
}

std::string curve_csv(const std::vector<InterventionCurve>& curves) {
  std::ostringstream os;
  os << "policy,budget,accuracy,delta\n";
  for (const auto& c : curves) {
    for (const auto& p : c.points) {
      os << c.policy << ',' << p.budget << ',' << format_double(p.accuracy) << ',' << format_double(p.delta) << '\n';
    }
  }
  return os.str();
}

}  // namespace hcmr
