#include "hcmr/rule_memory.hpp"

#include "hcmr/constraints.hpp"
#include "hcmr/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <string>

namespace hcmr {

namespace {

thread_local std::int64_t g_role_workload = 0;

ad::Matrix expand_rows(int n_concepts, int n_rules) {
  // (n_C n_R) x n_C selector: row i * n_R + k picks row i.
  ad::Matrix e = ad::Matrix::Zero(static_cast<Eigen::Index>(n_concepts) * n_rules, n_concepts);
  for (int i = 0; i < n_concepts; ++i) {
    for (int k = 0; k < n_rules; ++k) e(static_cast<Eigen::Index>(i) * n_rules + k, i) = 1.0;
  }
  return e;
}

}  // namespace

std::int64_t role_workload() { return g_role_workload; }
void reset_role_workload() { g_role_workload = 0; }

char role_symbol(Role r) {
  switch (r) {
    case Role::Positive:
      return 'P';
    case Role::Negative:
      return 'N';
    case Role::Irrelevant:
      return 'I';
  }
  return '?';
}

RoleTensor::RoleTensor(int n_c, int n_r)
    : n_concepts(n_c), n_rules(n_r), probs(static_cast<std::size_t>(n_c) * n_r * n_c * 3, 0.0) {
  for (std::size_t s = 2; s < probs.size(); s += 3) probs[s] = 1.0;
}

void RoleTensor::set_deterministic(int i, int k, int j, Role r) {
  for (Role q : {Role::Positive, Role::Negative, Role::Irrelevant}) at(i, k, j, q) = q == r ? 1.0 : 0.0;
}

RoleVars RoleVars::from_tensor(const RoleTensor& t) {
  const Eigen::Index rows = static_cast<Eigen::Index>(t.n_concepts) * t.n_rules;
  ad::Matrix p(rows, t.n_concepts), n(rows, t.n_concepts), z(rows, t.n_concepts);
  for (int i = 0; i < t.n_concepts; ++i) {
    for (int k = 0; k < t.n_rules; ++k) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * t.n_rules + k;
      for (int j = 0; j < t.n_concepts; ++j) {
        p(r, j) = t.at(i, k, j, Role::Positive);
        n(r, j) = t.at(i, k, j, Role::Negative);
        z(r, j) = t.at(i, k, j, Role::Irrelevant);
      }
    }
  }
  return RoleVars{t.n_concepts, t.n_rules, ad::constant(std::move(p)), ad::constant(std::move(n)),
                  ad::constant(std::move(z))};
}

RoleTensor RoleVars::to_tensor() const {
  RoleTensor t(n_concepts, n_rules);
  for (int i = 0; i < n_concepts; ++i) {
    for (int k = 0; k < n_rules; ++k) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * n_rules + k;
      for (int j = 0; j < n_concepts; ++j) {
        t.at(i, k, j, Role::Positive) = pos.value()(r, j);
        t.at(i, k, j, Role::Negative) = neg.value()(r, j);
        t.at(i, k, j, Role::Irrelevant) = irr.value()(r, j);
      }
    }
  }
  return t;
}

RoleVars RoleVars::rules_of(int i) const {
  const Eigen::Index start = static_cast<Eigen::Index>(i) * n_rules;
  return RoleVars{n_concepts, n_rules, ad::slice_rows(pos, start, n_rules),
                  ad::slice_rows(neg, start, n_rules), ad::slice_rows(irr, start, n_rules)};
}

SymbolicRuleSet::SymbolicRuleSet(int n_concepts, int n_rules, std::vector<Role> roles)
    : n_concepts_(n_concepts), n_rules_(n_rules), roles_(std::move(roles)) {
  const std::size_t n = static_cast<std::size_t>(n_concepts);
  if (roles_.size() != n * static_cast<std::size_t>(n_rules) * n) {
    throw ShapeError("SymbolicRuleSet: expected " + std::to_string(n * n_rules * n) + " roles, got " +
                     std::to_string(roles_.size()));
  }
  parent_.assign(n * n, false);
  source_.assign(n, true);
  for (int i = 0; i < n_concepts; ++i) {
    for (int k = 0; k < n_rules; ++k) {
      for (int j = 0; j < n_concepts; ++j) {
        if (role(i, k, j) != Role::Irrelevant) {
          parent_[static_cast<std::size_t>(i) * n + j] = true;
          source_[static_cast<std::size_t>(i)] = false;
        }
      }
    }
  }
}

SymbolicRuleSet SymbolicRuleSet::empty(int n_concepts, int n_rules) {
  return SymbolicRuleSet(
      n_concepts, n_rules,
      std::vector<Role>(static_cast<std::size_t>(n_concepts) * n_rules * n_concepts, Role::Irrelevant));
}

std::vector<int> SymbolicRuleSet::parents(int i) const {
  std::vector<int> out;
  for (int j = 0; j < n_concepts_; ++j) {
    if (parent(i, j)) out.push_back(j);
  }
  return out;
}

std::vector<Role> SymbolicRuleSet::rule(int i, int k) const {
  auto first = roles_.begin() + static_cast<std::ptrdiff_t>((static_cast<std::size_t>(i) * n_rules_ + k) * n_concepts_);
  return {first, first + n_concepts_};
}

RoleVars SymbolicRuleSet::indicator_vars() const {
  const Eigen::Index rows = static_cast<Eigen::Index>(n_concepts_) * n_rules_;
  ad::Matrix p = ad::Matrix::Zero(rows, n_concepts_);
  ad::Matrix n = ad::Matrix::Zero(rows, n_concepts_);
  ad::Matrix z = ad::Matrix::Zero(rows, n_concepts_);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (int j = 0; j < n_concepts_; ++j) {
      switch (roles_[static_cast<std::size_t>(r) * n_concepts_ + j]) {
        case Role::Positive:
          p(r, j) = 1.0;
          break;
        case Role::Negative:
          n(r, j) = 1.0;
          break;
        case Role::Irrelevant:
          z(r, j) = 1.0;
          break;
      }
    }
  }
  return RoleVars{n_concepts_, n_rules_, ad::constant(std::move(p)), ad::constant(std::move(n)),
                  ad::constant(std::move(z))};
}

std::vector<int> ConceptGraph::ancestors(int i) const {
  std::vector<bool> seen(static_cast<std::size_t>(n_concepts), false);
  std::vector<int> stack(parents[static_cast<std::size_t>(i)]);
  std::vector<int> out;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (seen[static_cast<std::size_t>(v)]) continue;
    seen[static_cast<std::size_t>(v)] = true;
    out.push_back(v);
    for (int p : parents[static_cast<std::size_t>(v)]) stack.push_back(p);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> ConceptGraph::descendants(int i) const {
  std::vector<bool> seen(static_cast<std::size_t>(n_concepts), false);
  std::vector<int> stack(children[static_cast<std::size_t>(i)]);
  std::vector<int> out;
  while (!stack.empty()) {
    const int v = stack.back();
    stack.pop_back();
    if (seen[static_cast<std::size_t>(v)]) continue;
    seen[static_cast<std::size_t>(v)] = true;
    out.push_back(v);
    for (int c : children[static_cast<std::size_t>(v)]) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<int> ConceptGraph::depths() const {
  std::vector<int> d(static_cast<std::size_t>(n_concepts), 0);
  for (int v : topo_order) {
    for (int p : parents[static_cast<std::size_t>(v)]) {
      d[static_cast<std::size_t>(v)] = std::max(d[static_cast<std::size_t>(v)], d[static_cast<std::size_t>(p)] + 1);
    }
  }
  return d;
}

std::vector<int> ConceptGraph::heights() const {
  std::vector<int> h(static_cast<std::size_t>(n_concepts), 0);
  for (auto it = topo_order.rbegin(); it != topo_order.rend(); ++it) {
    for (int c : children[static_cast<std::size_t>(*it)]) {
      h[static_cast<std::size_t>(*it)] = std::max(h[static_cast<std::size_t>(*it)], h[static_cast<std::size_t>(c)] + 1);
    }
  }
  return h;
}

RuleMemoryParams RuleMemoryParams::init(const ModelConfig& config, nn::Rng& rng) {
  RuleMemoryParams p;
  const Eigen::Index slots = static_cast<Eigen::Index>(config.n_concepts) * config.n_rules;
  p.rule_embeddings = ad::Var::parameter(nn::normal_init(slots, config.size_rule_emb, 1.0, rng));
  p.hidden = nn::Linear(config.size_rule_emb, config.size_rule_emb, rng);
  p.logits = nn::Linear(config.size_rule_emb, 3 * static_cast<Eigen::Index>(config.n_concepts), rng);
  ad::Matrix o = nn::normal_init(1, config.n_concepts, 1.0, rng);
  // Distinct values so no two concepts start tied.
  for (int i = 0; i < config.n_concepts; ++i) o(0, i) += i * 1e-6;
  p.priorities = ad::Var::parameter(std::move(o));
  return p;
}

void RuleMemoryParams::collect(std::vector<nn::NamedParameter>& out) {
  out.push_back({"memory", "memory.rule_embeddings", &rule_embeddings});
  hidden.collect("memory", "memory.hidden", out);
  logits.collect("memory", "memory.logits", out);
  out.push_back({"memory", "memory.priorities", &priorities});
}

RoleVars decode_role_vars(const RuleMemoryParams& params) {
  const int n_c = params.n_concepts();
  const int n_r = params.n_rules();
  ad::Var h = ad::leaky_relu(params.hidden.forward(params.rule_embeddings));
  ad::Var logits = params.logits.forward(h);
  const ad::Matrix& lv = logits.value();
  for (Eigen::Index r = 0; r < lv.rows(); ++r) {
    if (!lv.row(r).allFinite()) {
      throw NumericError("non-finite role logits for rule slot (i=" + std::to_string(r / n_r) +
                         ", k=" + std::to_string(r % n_r) + ")");
    }
  }
  ad::Var probs = ad::softmax_groups(logits, 3);
  g_role_workload += static_cast<std::int64_t>(lv.size());
  std::vector<Eigen::Index> pc, nc, ic;
  for (int j = 0; j < n_c; ++j) {
    pc.push_back(3 * j);
    nc.push_back(3 * j + 1);
    ic.push_back(3 * j + 2);
  }
  return RoleVars{n_c, n_r, ad::gather_cols(probs, pc), ad::gather_cols(probs, nc),
                  ad::gather_cols(probs, ic)};
}

RoleTensor decode_unadjusted_roles(const RuleMemoryParams& params) {
  return decode_role_vars(params).to_tensor();
}

RoleVars adjust_role_vars(const RoleVars& r_prime, const ad::Var& priorities,
                          const ConstraintSet* constraints, double temperature, GradientMode mode) {
  const int n_c = r_prime.n_concepts;
  const int n_r = r_prime.n_rules;
  if (priorities.rows() != 1 || priorities.cols() != n_c) {
    throw ShapeError("adjust_roles: priority vector has " + std::to_string(priorities.cols()) +
                     " entries, expected " + std::to_string(n_c));
  }
  if (constraints && (constraints->n_concepts() != n_c || constraints->n_rules() != n_r)) {
    throw ShapeError("adjust_roles: constraint set dimensions do not match the role tensor");
  }
  const bool relaxed = mode == GradientMode::Relaxed;

  ad::Var effective = constraints ? constraints->effective_priorities(priorities) : priorities;
  ad::Var allow = ad::step_st(ad::pairwise_diff(effective), temperature, relaxed);

  ad::Matrix ov_mask = ad::Matrix::Identity(n_c, n_c);
  ad::Matrix ov_value = ad::Matrix::Zero(n_c, n_c);
  if (constraints) {
    ov_mask = constraints->override_mask();
    ov_value = constraints->override_value();
  }
  allow = ad::add(ad::mul(allow, ad::constant((1.0 - ov_mask.array()).matrix())), ad::constant(ov_value));

  ad::Var expanded = ad::matmul(ad::constant(expand_rows(n_c, n_r)), allow);
  RoleVars out{n_c, n_r, ad::mul(expanded, r_prime.pos), ad::mul(expanded, r_prime.neg),
               ad::add(ad::mul(expanded, r_prime.irr), ad::one_minus(expanded))};
  g_role_workload += static_cast<std::int64_t>(n_c) * n_r * n_c * 3;

  if (constraints && constraints->clamp_mask().any()) {
    const ad::Matrix& cm = constraints->clamp_mask();
    // Clamps to P/N are only valid where the effective allow entry is 1.
    const ad::Matrix& ev = expanded.value();
    for (Eigen::Index r = 0; r < cm.rows(); ++r) {
      for (Eigen::Index j = 0; j < cm.cols(); ++j) {
        if (cm(r, j) != 0.0 && constraints->clamp_irr()(r, j) == 0.0 && ev(r, j) < 0.5) {
          throw ConstraintError("clamp at (i=" + std::to_string(r / n_r) + ", k=" + std::to_string(r % n_r) +
                                ", j=" + std::to_string(j) + ") forces a literal where the allow matrix is 0");
        }
      }
    }
    ad::Var keep = ad::constant((1.0 - cm.array()).matrix());
    out.pos = ad::add(ad::mul(out.pos, keep), ad::constant(constraints->clamp_pos()));
    out.neg = ad::add(ad::mul(out.neg, keep), ad::constant(constraints->clamp_neg()));
    out.irr = ad::add(ad::mul(out.irr, keep), ad::constant(constraints->clamp_irr()));
  }
  return out;
}

RoleTensor adjust_roles(const RoleTensor& r_prime, const std::vector<double>& priorities,
                        const ConstraintSet* constraints) {
  ad::Matrix o(1, static_cast<Eigen::Index>(priorities.size()));
  for (std::size_t i = 0; i < priorities.size(); ++i) o(0, static_cast<Eigen::Index>(i)) = priorities[i];
  return adjust_role_vars(RoleVars::from_tensor(r_prime), ad::constant(std::move(o)), constraints, 1.0)
      .to_tensor();
}

namespace {

Role argmax_role(double p, double n, double i) {
  if (p >= n && p >= i) return Role::Positive;
  if (n >= i) return Role::Negative;
  return Role::Irrelevant;
}

}  // namespace

SymbolicRuleSet hard_rules(const RoleTensor& adjusted) {
  const int n_c = adjusted.n_concepts;
  const int n_r = adjusted.n_rules;
  std::vector<Role> roles(static_cast<std::size_t>(n_c) * n_r * n_c);
  for (int i = 0; i < n_c; ++i) {
    for (int k = 0; k < n_r; ++k) {
      for (int j = 0; j < n_c; ++j) {
        roles[(static_cast<std::size_t>(i) * n_r + k) * n_c + j] =
            argmax_role(adjusted.at(i, k, j, Role::Positive), adjusted.at(i, k, j, Role::Negative),
                        adjusted.at(i, k, j, Role::Irrelevant));
      }
    }
  }
  return SymbolicRuleSet(n_c, n_r, std::move(roles));
}

ConceptGraph derive_graph(const SymbolicRuleSet& rules) {
  const int n = rules.n_concepts();
  ConceptGraph g;
  g.n_concepts = n;
  g.parents.resize(static_cast<std::size_t>(n));
  g.children.resize(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      if (rules.parent(i, j)) {
        g.edges.emplace_back(j, i);
        g.parents[static_cast<std::size_t>(i)].push_back(j);
        g.children[static_cast<std::size_t>(j)].push_back(i);
      }
    }
  }

  // Kahn's algorithm, smallest ready index first.
  std::vector<int> in_degree(static_cast<std::size_t>(n));
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int i = 0; i < n; ++i) {
    in_degree[static_cast<std::size_t>(i)] = static_cast<int>(g.parents[static_cast<std::size_t>(i)].size());
    if (in_degree[static_cast<std::size_t>(i)] == 0) ready.push(i);
  }
  while (!ready.empty()) {
    const int v = ready.top();
    ready.pop();
    g.topo_order.push_back(v);
    for (int c : g.children[static_cast<std::size_t>(v)]) {
      if (--in_degree[static_cast<std::size_t>(c)] == 0) ready.push(c);
    }
  }
  if (static_cast<int>(g.topo_order.size()) != n) {
    throw InvariantError("concept graph contains a cycle (" + std::to_string(n - g.topo_order.size()) +
                         " concepts unreachable in topological order)");
  }
  for (int i = 0; i < n; ++i) {
    if (g.parents[static_cast<std::size_t>(i)].empty()) g.sources.push_back(i);
    if (g.children[static_cast<std::size_t>(i)].empty()) g.sinks.push_back(i);
  }
  return g;
}

namespace {

Role draw_role(double p, double n, nn::Rng& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  if (u < p) return Role::Positive;
  if (u < p + n) return Role::Negative;
  return Role::Irrelevant;
}

}  // namespace

SymbolicRuleSet sample_roles(const RoleTensor& adjusted, nn::Rng& rng) {
  const int n_c = adjusted.n_concepts;
  const int n_r = adjusted.n_rules;
  std::vector<Role> roles(static_cast<std::size_t>(n_c) * n_r * n_c);
  for (int i = 0; i < n_c; ++i) {
    for (int k = 0; k < n_r; ++k) {
      for (int j = 0; j < n_c; ++j) {
        roles[(static_cast<std::size_t>(i) * n_r + k) * n_c + j] =
            draw_role(adjusted.at(i, k, j, Role::Positive), adjusted.at(i, k, j, Role::Negative), rng);
      }
    }
  }
  g_role_workload += static_cast<std::int64_t>(n_c) * n_r * n_c * 3;
  return SymbolicRuleSet(n_c, n_r, std::move(roles));
}

SampledRoles sample_role_vars(const RoleVars& adjusted, nn::Rng& rng, GradientMode mode) {
  if (mode == GradientMode::Relaxed) {
    return SampledRoles{hard_rules(adjusted.to_tensor()), adjusted};
  }
  const int n_c = adjusted.n_concepts;
  const int n_r = adjusted.n_rules;
  const ad::Matrix& p = adjusted.pos.value();
  const ad::Matrix& n = adjusted.neg.value();
  std::vector<Role> roles(static_cast<std::size_t>(n_c) * n_r * n_c);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    for (int j = 0; j < n_c; ++j) {
      roles[static_cast<std::size_t>(r) * n_c + j] = draw_role(p(r, j), n(r, j), rng);
    }
  }
  g_role_workload += static_cast<std::int64_t>(n_c) * n_r * n_c * 3;
  SymbolicRuleSet rules(n_c, n_r, std::move(roles));
  RoleVars hard = rules.indicator_vars();
  RoleVars onehot{n_c, n_r, ad::straight_through(hard.pos.value(), adjusted.pos, false),
                  ad::straight_through(hard.neg.value(), adjusted.neg, false),
                  ad::straight_through(hard.irr.value(), adjusted.irr, false)};
  return SampledRoles{std::move(rules), std::move(onehot)};
}

}  // namespace hcmr
