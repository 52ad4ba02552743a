#pragma once

// Textual rule export: per-concept signed-literal conjunctions plus the
// priority vector and parent matrix. Import reproduces the rule set exactly.
//
//   concepts: C0 C1 C2
//   n_rules: 2
//   priorities: 0.25 1.5 -0.75
//   parent:
//   0 1 0
//   ...
//   rules:
//   C2[0] <- C0 & !C1
//   C2[1] <- .
//
// Priorities are written in shortest round-trip decimal form.

#include "hcmr/constraints.hpp"
#include "hcmr/rule_memory.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace hcmr {

std::string concept_name(int i);

// Parses "C3", "c3" or "3" against n_concepts; nullopt when malformed or out of range.
std::optional<int> parse_concept_ref(std::string_view token, int n_concepts);

std::vector<Literal> rule_body(const SymbolicRuleSet& rules, int i, int k);
// "C3 <- C1 & !C2", or "C3 <- ." for an empty body.
std::string rule_text(const SymbolicRuleSet& rules, int i, int k);
std::string body_text(const std::vector<Literal>& body);

struct RuleLine {
  int concept_index = 0;
  std::optional<int> rule;
  std::vector<Literal> body;
};

// Parses "C2 <- C0 & !C1" / "C2[1] <- ." . Negation accepts ! ~ and the
// logical-not sign; conjunction accepts & and the logical-and sign.
RuleLine parse_rule_line(std::string_view line, int n_concepts);

struct RuleDocument {
  SymbolicRuleSet rules;
  std::vector<double> priorities;
};

std::string export_rules(const SymbolicRuleSet& rules, const std::vector<double>& priorities);
RuleDocument import_rules(std::string_view text);

void save_rules(const std::filesystem::path& path, const SymbolicRuleSet& rules,
                const std::vector<double>& priorities);
RuleDocument load_rules(const std::filesystem::path& path);

// Shortest decimal that parses back to the same double.
std::string format_double(double value);
double parse_double(std::string_view text);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace hcmr
