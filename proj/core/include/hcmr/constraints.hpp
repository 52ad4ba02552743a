#pragma once

// Training-time model interventions: edits to the allow matrix, role clamps,
// injected rules and priority assignments. A ConstraintSet is validated once
// at construction and immutable afterwards.

#include "hcmr/autodiff.hpp"
#include "hcmr/rule_memory.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace hcmr {

struct Literal {
  int concept_index = 0;
  bool negated = false;

  bool operator==(const Literal&) const = default;
};

// O[concept] := value, or O[concept] := O[anchor] + value when anchor is set.
struct PriorityAssignment {
  int concept_index = 0;
  std::optional<int> anchor;
  double value = 0.0;
};

inline constexpr double kDefaultPriorityOffset = 1.0;

struct RoleClamp {
  int child = 0;
  int rule = 0;
  int concept_index = 0;
  Role role = Role::Irrelevant;
};

// Fully specified rule for slot (concept, rule). Concepts not in the body are
// Irrelevant.
struct InjectedRule {
  int concept_index = 0;
  int rule = 0;
  std::vector<Literal> body;
};

// Unvalidated description of a constraint set, as written by a user.
struct ConstraintSpec {
  int n_concepts = 0;
  int n_rules = 0;
  std::vector<int> force_source;
  std::vector<int> force_sink;
  std::vector<std::pair<int, int>> forbid_parent;  // (child, parent): A[child][parent] := 0
  std::vector<std::pair<int, int>> allow_parent;   // (child, parent): A[child][parent] := 1
  std::vector<RoleClamp> clamps;
  std::vector<InjectedRule> injected;
  std::vector<PriorityAssignment> priorities;
  // When set, a concept whose every rule is injected predicts the disjunction
  // of its rules instead of a neural rule selection.
  bool pin_selection = false;
};

// Binary n x n matrix; (i, j) = 1 means concept j may appear in i's rules.
struct AllowMatrix {
  int n = 0;
  std::vector<std::uint8_t> entries;

  bool operator()(int i, int j) const { return entries[static_cast<std::size_t>(i) * n + j] != 0; }
};

class ConstraintSet {
 public:
  // Empty set over n concepts and rules: only the diagonal is overridden.
  ConstraintSet(int n_concepts, int n_rules);
  // Validates eagerly; throws ConstraintError on any inconsistency.
  explicit ConstraintSet(ConstraintSpec spec);

  const ConstraintSpec& spec() const { return spec_; }
  int n_concepts() const { return spec_.n_concepts; }
  int n_rules() const { return spec_.n_rules; }
  bool empty() const;

  std::optional<bool> allow_override(int i, int j) const;
  std::optional<Role> clamp(int i, int k, int j) const;
  bool injected(int i, int k) const;
  // All rules of i are injected and selection pinning is on.
  bool pinned(int i) const;
  // True when O[i] is not a free parameter.
  bool priority_constrained(int i) const;

  // n x n; 1 where the allow matrix is overridden (always on the diagonal).
  const ad::Matrix& override_mask() const { return override_mask_; }
  const ad::Matrix& override_value() const { return override_value_; }
  // (n_C n_R) x n_C; 1 on clamped or injected slots.
  const ad::Matrix& clamp_mask() const { return clamp_mask_; }
  const ad::Matrix& clamp_pos() const { return clamp_pos_; }
  const ad::Matrix& clamp_neg() const { return clamp_neg_; }
  const ad::Matrix& clamp_irr() const { return clamp_irr_; }

  // Maps raw learnable priorities to the values used by the allow matrix.
  ad::Var effective_priorities(const ad::Var& raw) const;
  std::vector<double> effective_priorities(const std::vector<double>& raw) const;

  // Canonical textual form (parseable by parse_constraints).
  std::string to_text() const;
  // FNV-1a over to_text(); stored in checkpoints.
  std::uint64_t digest() const;

 private:
  void build();

  // Effective priority of a concept: constant, or raw[root] + offset.
  struct PriorityForm {
    std::optional<int> root;
    double offset = 0.0;
  };

  ConstraintSpec spec_;
  std::vector<PriorityForm> forms_;
  std::vector<int> injected_count_;
  ad::Matrix override_mask_;
  ad::Matrix override_value_;
  ad::Matrix clamp_mask_;
  ad::Matrix clamp_pos_;
  ad::Matrix clamp_neg_;
  ad::Matrix clamp_irr_;
  ad::Matrix priority_map_;     // n x n
  ad::Matrix priority_offset_;  // 1 x n
};

// A_ij = 1[O_j > O_i] on effective priorities, then overrides.
AllowMatrix build_allow_matrix(const std::vector<double>& priorities, const ConstraintSet& cs);

// adjust_roles under a constraint set: clamped and injected slots carry
// probability 1 on their role and receive no gradient.
RoleTensor apply_constraints(const RoleTensor& r_prime, const ConstraintSet& cs,
                             const std::vector<double>& priorities);

// Sectioned text format:
//   [force_source] / [force_sink]   concept indices
//   [forbid_parent] / [allow_parent] "child parent" pairs
//   [clamp]                          "child rule concept P|N|I"
//   [inject_rules]                   "C2 <- C0 & !C1" or "C2[1] <- ..."
//   [priorities]                     "O3 = 2.5", "O3 = O1 + 0.5", "O3 above O1"
//   [options]                        "pin_selection = true|false"
ConstraintSet parse_constraints(std::string_view text, int n_concepts, int n_rules);
ConstraintSet load_constraints(const std::filesystem::path& path, int n_concepts, int n_rules);

}  // namespace hcmr
