#pragma once

// DIMACS reader, a small DPLL solver and a truth-table oracle for rule-memory
// constraints. Independent of the library's verification code.

#include "hcmr/rule_memory.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

struct Cnf {
  int n_vars = 0;
  std::vector<std::vector<int>> clauses;
  std::map<std::string, int> names;  // from "c var <n> <name>" comments
};

Cnf parse_dimacs(const std::string& text);

// Satisfying assignment indexed 1..n_vars (entry 0 unused), or nullopt.
std::optional<std::vector<bool>> solve(const Cnf& cnf);

// Propositional formula over named atoms, built directly by tests.
struct Expr {
  enum Op { Atom, Not, And, Or, Implies, Iff } op = Atom;
  std::string atom;
  std::vector<Expr> kids;

  bool eval(const std::map<std::string, bool>& v) const;
  std::string text() const;  // fully parenthesized infix
};

Expr random_expr(const std::vector<std::string>& atoms, int depth, std::mt19937_64& rng);

struct TruthTableResult {
  bool holds = true;
  std::optional<std::map<std::string, bool>> counterexample;
};

// Checks `e` over every (concept assignment, rule choice) pair where each
// non-source concept equals the body of its chosen rule.
TruthTableResult truth_table_verify(const hcmr::SymbolicRuleSet& rules, const Expr& e);

// Random rule memory whose parents respect a random priority order.
hcmr::SymbolicRuleSet random_rules(int n_concepts, int n_rules, double p_literal, std::mt19937_64& rng);

}  // namespace oracle
