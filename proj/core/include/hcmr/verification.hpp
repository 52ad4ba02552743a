#pragma once

// Propositional view of a learned rule memory and constraint checking.
//
// Atoms are c<i> for concepts and sel_<i>_<k> for "rule k of concept i is
// selected". For every non-source concept i:
//   c<i> <-> OR_k (sel_<i>_<k> AND body(i, k))
//   exactly one of sel_<i>_0 .. sel_<i>_<n_R - 1>
// Selection atoms are unconstrained otherwise, so a property verified here
// holds for every possible output of the neural selector.

#include "hcmr/constraints.hpp"
#include "hcmr/rule_memory.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hcmr {

struct Formula {
  enum class Kind { Const, Atom, Not, And, Or, Implies, Iff };
  Kind kind = Kind::Const;
  bool value = false;     // Const
  std::string atom;       // Atom
  std::vector<Formula> args;

  static Formula constant(bool v);
  static Formula variable(std::string name);
  static Formula negation(Formula f);
  static Formula binary(Kind k, Formula a, Formula b);

  bool evaluate(const std::map<std::string, bool>& assignment) const;
  void collect_atoms(std::vector<std::string>& out) const;
  std::string to_string() const;
};

// Grammar (loosest binding first): <->, -> (right associative), |, &, unary
// !. Also accepts ~ for negation, parentheses, true and false. Atom names
// are identifiers; C<i> is normalized to c<i>.
Formula parse_formula(std::string_view text);

struct ConceptDefinition {
  int concept_index = 0;
  std::vector<std::string> selection_atoms;
  std::vector<std::vector<Literal>> bodies;  // one per rule
};

struct PropositionalEncoding {
  int n_concepts = 0;
  int n_rules = 0;
  std::vector<std::string> atoms;  // concept atoms, then selection atoms
  std::vector<int> sources;
  std::vector<ConceptDefinition> definitions;  // non-sources in topological order

  bool declares(const std::string& atom) const;
  // Human-readable clause listing.
  std::string to_text() const;
  // True iff the assignment (over all atoms) satisfies every clause.
  bool satisfied_by(const std::map<std::string, bool>& assignment) const;
};

std::string concept_atom(int i);
std::string selection_atom(int i, int k);

PropositionalEncoding export_propositional(const SymbolicRuleSet& rules);

struct VerificationResult {
  bool holds = true;
  // Values of all atoms in one violating assignment.
  std::optional<std::map<std::string, bool>> counterexample;
  std::uint64_t assignments_checked = 0;
};

inline constexpr int kMaxVerificationBits = 24;

// Enumerates every consistent assignment. Throws ArgumentError for undeclared
// atoms and TractabilityError when the number of consistent assignments
// exceeds 2^kMaxVerificationBits.
VerificationResult verify_constraint(const PropositionalEncoding& encoding, const Formula& constraint);

// DIMACS CNF of (encoding AND NOT constraint) via the Tseitin transformation.
// Satisfiable iff the constraint can be violated. Comment lines map atom
// names to variable numbers: "c var <n> <name>".
std::string export_cnf(const PropositionalEncoding& encoding, const Formula& constraint);

}  // namespace hcmr
