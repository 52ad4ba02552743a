#include "hcmr/inference.hpp"

#include "hcmr/error.hpp"
#include "hcmr/rule_io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>
#include <sstream>

namespace hcmr {

namespace {

struct ConceptRecord {
  ad::Matrix selection;  // B x n_R (empty for sources and pinned concepts)
  ad::Matrix literals;   // B x n_R (empty for sources)
};

void check_interventions(const InterventionAssignment& iv, int n) {
  for (const auto& [c, v] : iv) {
    (void)v;
    if (c < 0 || c >= n) throw ArgumentError("intervention on invalid concept index " + std::to_string(c));
  }
}

ad::Matrix disjunction(const ad::Matrix& lits) {
  ad::Matrix p(lits.rows(), 1);
  for (Eigen::Index b = 0; b < lits.rows(); ++b) {
    double none = 1.0;
    for (Eigen::Index k = 0; k < lits.cols(); ++k) none *= 1.0 - lits(b, k);
    p(b, 0) = 1.0 - none;
  }
  return p;
}

// Conditional p(C_i = 1 | values of its parents, x) for every row of `values`.
ad::Matrix conditional(int i, const FrozenModel& model, const EncoderBatch& enc, const ad::Matrix& values,
                       const RoleVars& indicators, ConceptRecord* record) {
  const RoleVars rules_i = indicators.rules_of(i);
  ad::Var v = ad::constant(values);
  ad::Matrix lits = evaluate_rules_batch(v, rules_i).value();
  ad::Matrix p;
  if (model.pinned[static_cast<std::size_t>(i)]) {
    p = disjunction(lits);
  } else {
    ad::Matrix s = select_rules_batch(i, enc, v, parent_mask_row(model.rules, i), model.selector).value();
    p = (s.array() * lits.array()).rowwise().sum().matrix();
    if (record) record->selection = std::move(s);
  }
  if (record) record->literals = std::move(lits);
  return p;
}

BatchPrediction run_map(const ad::Matrix& x, const FrozenModel& model,
                        const std::vector<InterventionAssignment>* interventions,
                        std::vector<ConceptRecord>* records) {
  const int n = model.config.n_concepts;
  const Eigen::Index batch = x.rows();
  if (interventions) {
    if (static_cast<Eigen::Index>(interventions->size()) != batch) {
      throw ArgumentError("one intervention assignment per example is required");
    }
    for (const auto& iv : *interventions) check_interventions(iv, n);
  }
  const EncoderBatch enc = encode_batch(ad::constant(x), model.encoder);
  const RoleVars indicators = model.rules.indicator_vars();
  BatchPrediction out{ad::Matrix::Zero(batch, n), ad::Matrix::Zero(batch, n)};
  if (records) records->assign(static_cast<std::size_t>(n), ConceptRecord{});

  for (int i : model.graph.topo_order) {
    ad::Matrix p;
    if (model.rules.source(i)) {
      p = enc.probs.value().col(i);
    } else {
      p = conditional(i, model, enc, out.values, indicators,
                      records ? &(*records)[static_cast<std::size_t>(i)] : nullptr);
    }
    for (Eigen::Index b = 0; b < batch; ++b) {
      double pb = p(b, 0);
      if (interventions) {
        const auto& iv = (*interventions)[static_cast<std::size_t>(b)];
        if (auto it = iv.find(i); it != iv.end()) pb = it->second ? 1.0 : 0.0;
      }
      out.probs(b, i) = pb;
      out.values(b, i) = hard_value(pb) ? 1.0 : 0.0;
    }
  }
  return out;
}

std::string format_prob(double p) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", p);
  return buf;
}

const char* bool_text(bool v) { return v ? "True" : "False"; }

}  // namespace

std::vector<double> PredictionTrace::probabilities() const {
  std::vector<double> p;
  for (const auto& c : concepts) p.push_back(c.probability);
  return p;
}

std::vector<bool> PredictionTrace::values() const {
  std::vector<bool> v;
  for (const auto& c : concepts) v.push_back(c.value);
  return v;
}

BatchPrediction infer_map_batch(const ad::Matrix& x, const FrozenModel& model,
                                const std::vector<InterventionAssignment>* interventions) {
  return run_map(x, model, interventions, nullptr);
}

PredictionTrace infer_map(const std::vector<double>& x, const FrozenModel& model,
                          const InterventionAssignment& interventions) {
  const int n = model.config.n_concepts;
  ad::Matrix row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t d = 0; d < x.size(); ++d) row(0, static_cast<Eigen::Index>(d)) = x[d];
  std::vector<InterventionAssignment> ivs{interventions};
  std::vector<ConceptRecord> records;
  const BatchPrediction pred = run_map(row, model, &ivs, &records);

  PredictionTrace trace;
  trace.order = model.graph.topo_order;
  trace.concepts.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    auto& c = trace.concepts[static_cast<std::size_t>(i)];
    c.concept_index = i;
    c.is_source = model.rules.source(i);
    c.intervened = interventions.count(i) > 0;
    c.pinned = model.pinned[static_cast<std::size_t>(i)];
    c.probability = pred.probs(0, i);
    c.value = pred.values(0, i) != 0.0;
    if (c.is_source) continue;
    for (int j : model.rules.parents(i)) c.parent_values.emplace_back(j, pred.values(0, j) != 0.0);
    const auto& rec = records[static_cast<std::size_t>(i)];
    if (rec.selection.size() != 0) {
      c.selection.assign(rec.selection.data(), rec.selection.data() + rec.selection.cols());
    }
    // The rule credited for the value: the most probable rule whose truth
    // value agrees with the prediction.
    int best = -1;
    for (int k = 0; k < model.config.n_rules; ++k) {
      if ((rec.literals(0, k) > 0.5) != c.value) continue;
      const double score = c.selection.empty() ? 0.0 : c.selection[static_cast<std::size_t>(k)];
      if (best < 0 || score > (c.selection.empty() ? 0.0 : c.selection[static_cast<std::size_t>(best)])) best = k;
    }
    if (best < 0) best = 0;
    c.selected_rule = best;
    c.rule_text = rule_text(model.rules, i, best);
  }
  return trace;
}

std::vector<double> infer_exact(const std::vector<double>& x, const FrozenModel& model, int max_width) {
  const int n = model.config.n_concepts;
  ad::Matrix row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t d = 0; d < x.size(); ++d) row(0, static_cast<Eigen::Index>(d)) = x[d];
  const EncoderBatch enc1 = encode_batch(ad::constant(row), model.encoder);
  const RoleVars indicators = model.rules.indicator_vars();

  std::vector<double> result(static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    if (model.rules.source(i)) {
      result[static_cast<std::size_t>(i)] = enc1.probs.value()(0, i);
      continue;
    }
    const std::vector<int> anc = model.graph.ancestors(i);
    if (static_cast<int>(anc.size()) > max_width) {
      throw TractabilityError("concept C" + std::to_string(i) + " has " + std::to_string(anc.size()) +
                              " ancestors, above the limit of " + std::to_string(max_width));
    }
    const Eigen::Index rows = Eigen::Index{1} << anc.size();
    ad::Matrix values = ad::Matrix::Zero(rows, n);
    for (Eigen::Index a = 0; a < rows; ++a) {
      for (std::size_t m = 0; m < anc.size(); ++m) {
        values(a, anc[m]) = ((a >> m) & 1) ? 1.0 : 0.0;
      }
    }
    EncoderBatch enc{ad::constant(enc1.probs.value().replicate(rows, 1)),
                     ad::constant(enc1.pos_emb.value().replicate(rows, 1)),
                     ad::constant(enc1.neg_emb.value().replicate(rows, 1))};
    // Joint weight of each ancestor assignment.
    Eigen::VectorXd weight = Eigen::VectorXd::Ones(rows);
    for (int a : anc) {
      const ad::Matrix pa = model.rules.source(a) ? ad::Matrix(enc.probs.value().col(a))
                                                  : conditional(a, model, enc, values, indicators, nullptr);
      for (Eigen::Index r = 0; r < rows; ++r) {
        weight(r) *= values(r, a) != 0.0 ? pa(r, 0) : 1.0 - pa(r, 0);
      }
    }
    const ad::Matrix pi = conditional(i, model, enc, values, indicators, nullptr);
    result[static_cast<std::size_t>(i)] = weight.dot(pi.col(0));
  }
  return result;
}

std::string explain(const PredictionTrace& trace) {
  std::ostringstream os;
  for (int i : trace.order) {
    const auto& c = trace.concepts[static_cast<std::size_t>(i)];
    os << concept_name(i) << " := " << bool_text(c.value);
    if (c.intervened) {
      os << " (intervened)\n";
      continue;
    }
    if (c.is_source) {
      os << " via encoder (p=" << format_prob(c.probability) << ")\n";
      continue;
    }
    os << " via rule " << c.rule_text;
    // Values of the concepts mentioned in the credited rule.
    std::vector<std::string> parts;
    const auto arrow = c.rule_text.find("<- ");
    const std::string body = arrow == std::string::npos ? std::string() : c.rule_text.substr(arrow + 3);
    for (const auto& [j, v] : c.parent_values) {
      const std::string name = concept_name(j);
      for (std::size_t pos = body.find(name); pos != std::string::npos; pos = body.find(name, pos + 1)) {
        const std::size_t end = pos + name.size();
        if (end == body.size() || body[end] == ' ') {
          parts.push_back(name + "=" + bool_text(v));
          break;
        }
      }
    }
    if (!parts.empty()) {
      os << " (";
      for (std::size_t m = 0; m < parts.size(); ++m) os << (m ? ", " : "") << parts[m];
      os << ')';
    }
    os << '\n';
  }
  return os.str();
}

std::string trace_to_json(const PredictionTrace& trace) {
  nlohmann::json doc;
  doc["order"] = trace.order;
  doc["concepts"] = nlohmann::json::array();
  for (const auto& c : trace.concepts) {
    nlohmann::json j;
    j["concept"] = c.concept_index;
    j["is_source"] = c.is_source;
    j["intervened"] = c.intervened;
    j["pinned"] = c.pinned;
    j["probability"] = c.probability;
    j["value"] = c.value;
    if (!c.is_source) {
      j["selected_rule"] = c.selected_rule;
      j["rule"] = c.rule_text;
      j["selection"] = c.selection;
      nlohmann::json parents = nlohmann::json::array();
      for (const auto& [p, v] : c.parent_values) parents.push_back({{"concept", p}, {"value", v}});
      j["parent_values"] = parents;
    }
    doc["concepts"].push_back(j);
  }
  return doc.dump(2);
}

}  // namespace hcmr
