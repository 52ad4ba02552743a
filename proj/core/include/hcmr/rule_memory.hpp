#pragma once

// Learnable rule memory: rule embeddings decoded into role distributions,
// the node-priority DAG constraint, and extraction of hard rules and the
// concept graph they induce.

#include "hcmr/autodiff.hpp"
#include "hcmr/config.hpp"
#include "hcmr/nn.hpp"

#include <cstdint>
#include <utility>
#include <vector>

namespace hcmr {

class ConstraintSet;

// Role of a concept inside a conjunctive rule body.
enum class Role : std::uint8_t { Positive = 0, Negative = 1, Irrelevant = 2 };

char role_symbol(Role r);

// Categorical role probabilities indexed (child i, rule k, concept j, role).
struct RoleTensor {
  int n_concepts = 0;
  int n_rules = 0;
  std::vector<double> probs;

  RoleTensor() = default;
  RoleTensor(int n_c, int n_r);  // all mass on Irrelevant

  std::size_t index(int i, int k, int j, Role r) const {
    return ((static_cast<std::size_t>(i) * n_rules + k) * n_concepts + j) * 3 +
           static_cast<std::size_t>(r);
  }
  double at(int i, int k, int j, Role r) const { return probs[index(i, k, j, r)]; }
  double& at(int i, int k, int j, Role r) { return probs[index(i, k, j, r)]; }
  // Puts all mass of slot (i, k, j) on `r`.
  void set_deterministic(int i, int k, int j, Role r);
};

// Differentiable form of a RoleTensor: three (n_C * n_R) x n_C matrices of
// role probabilities; row i * n_R + k holds rule k of concept i.
struct RoleVars {
  int n_concepts = 0;
  int n_rules = 0;
  ad::Var pos;
  ad::Var neg;
  ad::Var irr;

  static RoleVars from_tensor(const RoleTensor& t);
  RoleTensor to_tensor() const;
  // Rows of concept i's rules (n_R x n_C each).
  RoleVars rules_of(int i) const;
};

class SymbolicRuleSet {
 public:
  SymbolicRuleSet() = default;
  // Derives parent and source from the roles.
  SymbolicRuleSet(int n_concepts, int n_rules, std::vector<Role> roles);
  static SymbolicRuleSet empty(int n_concepts, int n_rules);

  int n_concepts() const { return n_concepts_; }
  int n_rules() const { return n_rules_; }
  Role role(int i, int k, int j) const {
    return roles_[(static_cast<std::size_t>(i) * n_rules_ + k) * n_concepts_ + j];
  }
  bool parent(int i, int j) const { return parent_[static_cast<std::size_t>(i) * n_concepts_ + j]; }
  bool source(int i) const { return source_[static_cast<std::size_t>(i)]; }
  std::vector<int> parents(int i) const;
  std::vector<Role> rule(int i, int k) const;
  const std::vector<Role>& roles() const { return roles_; }

  // One-hot indicator matrices ((n_C n_R) x n_C) for P, N and I.
  RoleVars indicator_vars() const;

  bool operator==(const SymbolicRuleSet& other) const {
    return n_concepts_ == other.n_concepts_ && n_rules_ == other.n_rules_ && roles_ == other.roles_;
  }

 private:
  int n_concepts_ = 0;
  int n_rules_ = 0;
  std::vector<Role> roles_;
  std::vector<bool> parent_;
  std::vector<bool> source_;
};

struct ConceptGraph {
  int n_concepts = 0;
  std::vector<std::pair<int, int>> edges;  // (parent, child), sorted
  std::vector<int> topo_order;
  std::vector<int> sources;  // in-degree 0
  std::vector<int> sinks;    // out-degree 0
  std::vector<std::vector<int>> parents;
  std::vector<std::vector<int>> children;

  std::vector<int> ancestors(int i) const;    // sorted
  std::vector<int> descendants(int i) const;  // sorted
  // Longest path from any source (sources have depth 0).
  std::vector<int> depths() const;
  // Longest path to any sink (sinks have height 0).
  std::vector<int> heights() const;
};

struct RuleMemoryParams {
  ad::Var rule_embeddings;  // (n_C * n_R) x size_rule_emb
  nn::Linear hidden;        // size_rule_emb -> size_rule_emb, leaky ReLU
  nn::Linear logits;        // size_rule_emb -> 3 * n_C
  ad::Var priorities;       // 1 x n_C

  static RuleMemoryParams init(const ModelConfig& config, nn::Rng& rng);

  int n_concepts() const { return static_cast<int>(priorities.cols()); }
  int n_rules() const { return static_cast<int>(rule_embeddings.rows() / priorities.cols()); }
  void collect(std::vector<nn::NamedParameter>& out);
};

// Gradient behaviour of the hard pieces (priority step, role sampling,
// thresholded predictions): straight-through by default, or the smooth
// surrogate in the forward pass as well (used by gradient checks).
enum class GradientMode { StraightThrough, Relaxed };

// Softmax-normalized unadjusted role distributions R'. Throws NumericError
// naming the (i, k) rule slot if a logit is not finite.
RoleVars decode_role_vars(const RuleMemoryParams& params);
RoleTensor decode_unadjusted_roles(const RuleMemoryParams& params);

// Applies the priority indicator (or the constraint set's allow matrix) and
// role clamps. Disallowed slots carry all mass on Irrelevant; the diagonal is
// always disallowed. `priorities` are the raw learnable values; a constraint
// set may map them to effective priorities first.
RoleVars adjust_role_vars(const RoleVars& r_prime, const ad::Var& priorities,
                          const ConstraintSet* constraints, double temperature,
                          GradientMode mode = GradientMode::StraightThrough);
RoleTensor adjust_roles(const RoleTensor& r_prime, const std::vector<double>& priorities,
                        const ConstraintSet* constraints = nullptr);

// Most likely role per slot, ties broken P > N > I.
SymbolicRuleSet hard_rules(const RoleTensor& adjusted);

// Edge j -> i for each parent(i, j). Throws InvariantError on a cycle.
ConceptGraph derive_graph(const SymbolicRuleSet& rules);

// One categorical draw per slot.
SymbolicRuleSet sample_roles(const RoleTensor& adjusted, nn::Rng& rng);

struct SampledRoles {
  SymbolicRuleSet rules;
  RoleVars onehot;  // forward one-hot, backward identity into the probabilities
};
SampledRoles sample_role_vars(const RoleVars& adjusted, nn::Rng& rng,
                              GradientMode mode = GradientMode::StraightThrough);

// Counts role-tensor slots touched by decode/adjust/sample on this thread.
std::int64_t role_workload();
void reset_role_workload();

}  // namespace hcmr
