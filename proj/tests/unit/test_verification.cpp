#include "sat.hpp"
#include "toy_models.hpp"

#include "hcmr/error.hpp"
#include "hcmr/verification.hpp"

#include <gtest/gtest.h>

using namespace hcmr;

namespace {

// y := C2 with rules y <- c1 and y <- !c1 & c0.
SymbolicRuleSet two_rule_memory() { return toy::rules_from(3, 2, {"C2 <- C1", "C2 <- !C1 & C0"}); }

bool cnf_satisfiable(const std::string& dimacs) { return oracle::solve(oracle::parse_dimacs(dimacs)).has_value(); }

}  // namespace

TEST(Formula, ParsePrecedence) {
  const Formula f = parse_formula("a | b & !c -> d <-> e");
  std::map<std::string, bool> v{{"a", false}, {"b", true}, {"c", false}, {"d", false}, {"e", false}};
  // ((a | (b & !c)) -> d) <-> e = (true -> false) <-> false = true
  EXPECT_TRUE(f.evaluate(v));
  v["e"] = true;
  EXPECT_FALSE(f.evaluate(v));
  // -> is right associative: a -> b -> c = a -> (b -> c).
  const Formula g = parse_formula("a -> b -> c");
  EXPECT_TRUE(g.evaluate({{"a", false}, {"b", true}, {"c", false}}));
  EXPECT_FALSE(g.evaluate({{"a", true}, {"b", true}, {"c", false}}));
}

TEST(Formula, ConceptNamesNormalized) {
  const Formula f = parse_formula("C3 & ~c1 | true");
  std::vector<std::string> atoms;
  f.collect_atoms(atoms);
  std::sort(atoms.begin(), atoms.end());
  atoms.erase(std::unique(atoms.begin(), atoms.end()), atoms.end());
  EXPECT_EQ(atoms, (std::vector<std::string>{"c1", "c3"}));
}

TEST(Formula, ToStringReparses) {
  const Formula f = parse_formula("(a -> b) & !(c <-> false)");
  const Formula g = parse_formula(f.to_string());
  for (int m = 0; m < 8; ++m) {
    std::map<std::string, bool> v{{"a", (m & 1) != 0}, {"b", (m & 2) != 0}, {"c", (m & 4) != 0}};
    EXPECT_EQ(f.evaluate(v), g.evaluate(v));
  }
}

TEST(Formula, ParseErrors) {
  EXPECT_THROW(parse_formula("a &"), ParseError);
  EXPECT_THROW(parse_formula("(a | b"), ParseError);
  EXPECT_THROW(parse_formula("a b"), ParseError);
  EXPECT_THROW(parse_formula(""), ParseError);
}

TEST(Encoding, AtomsAndDefinitions) {
  const PropositionalEncoding e = export_propositional(two_rule_memory());
  EXPECT_EQ(e.sources, (std::vector<int>{0, 1}));
  ASSERT_EQ(e.definitions.size(), 1u);
  EXPECT_EQ(e.definitions[0].concept_index, 2);
  EXPECT_TRUE(e.declares("c0"));
  EXPECT_TRUE(e.declares("sel_2_1"));
  EXPECT_FALSE(e.declares("sel_0_0"));
  EXPECT_EQ(concept_atom(4), "c4");
  EXPECT_EQ(selection_atom(2, 1), "sel_2_1");
  EXPECT_FALSE(e.to_text().empty());
}

TEST(Verify, CounterexampleThroughSecondRule) {
  const PropositionalEncoding e = export_propositional(two_rule_memory());
  const VerificationResult r = verify_constraint(e, parse_formula("c2 -> c1"));
  EXPECT_FALSE(r.holds);
  ASSERT_TRUE(r.counterexample.has_value());
  const auto& cx = *r.counterexample;
  EXPECT_TRUE(cx.at("c2"));
  EXPECT_FALSE(cx.at("c1"));
  EXPECT_TRUE(cx.at("c0"));
  EXPECT_TRUE(cx.at("sel_2_1"));
  EXPECT_TRUE(e.satisfied_by(cx));
  EXPECT_TRUE(verify_constraint(e, parse_formula("c2 -> c1 | c0")).holds);
}

TEST(Verify, TautologyAndContradiction) {
  const PropositionalEncoding e = export_propositional(two_rule_memory());
  const VerificationResult t = verify_constraint(e, parse_formula("c0 | !c0"));
  EXPECT_TRUE(t.holds);
  // 4 source assignments x 2 selections.
  EXPECT_EQ(t.assignments_checked, 8u);
  EXPECT_FALSE(verify_constraint(e, parse_formula("false")).holds);
}

TEST(Verify, UndeclaredAtom) {
  const PropositionalEncoding e = export_propositional(two_rule_memory());
  EXPECT_THROW(verify_constraint(e, parse_formula("c7")), ArgumentError);
  EXPECT_THROW(verify_constraint(e, parse_formula("sel_0_0")), ArgumentError);
}

TEST(Verify, EmptyMemoryLeavesConceptsFree) {
  const PropositionalEncoding e = export_propositional(SymbolicRuleSet::empty(3, 2));
  EXPECT_FALSE(verify_constraint(e, parse_formula("!c0")).holds);
  EXPECT_TRUE(cnf_satisfiable(export_cnf(e, parse_formula("!c0"))));
  EXPECT_FALSE(cnf_satisfiable(export_cnf(e, parse_formula("c0 | !c0"))));
}

TEST(Verify, TractabilityLimit) {
  const PropositionalEncoding e = export_propositional(SymbolicRuleSet::empty(kMaxVerificationBits + 1, 1));
  EXPECT_THROW(verify_constraint(e, parse_formula("c0")), TractabilityError);
}

TEST(Cnf, MatchesVerifier) {
  const PropositionalEncoding e = export_propositional(two_rule_memory());
  for (const char* text : {"c2 -> c1", "c2 -> c1 | c0", "c2 <-> (c1 | c0)", "!(c2 & !c0 & !c1)"}) {
    const Formula f = parse_formula(text);
    const bool violated = cnf_satisfiable(export_cnf(e, f));
    EXPECT_EQ(violated, !verify_constraint(e, f).holds) << text;
  }
}

TEST(Cnf, NamedVariablesDecodeCounterexample) {
  const PropositionalEncoding e = export_propositional(two_rule_memory());
  const Formula f = parse_formula("c2 -> c1");
  const oracle::Cnf cnf = oracle::parse_dimacs(export_cnf(e, f));
  const auto model = oracle::solve(cnf);
  ASSERT_TRUE(model.has_value());
  std::map<std::string, bool> a;
  for (const auto& atom : e.atoms) a[atom] = (*model)[static_cast<std::size_t>(cnf.names.at(atom))];
  EXPECT_TRUE(e.satisfied_by(a));
  EXPECT_FALSE(f.evaluate(a));
}

TEST(Verify, AgreesWithTruthTableOracle) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 4;
    const int r = 1 + trial % 3;
    const SymbolicRuleSet rules = oracle::random_rules(n, r, 0.5, rng);
    std::vector<std::string> atoms;
    for (int i = 0; i < n; ++i) atoms.push_back(concept_atom(i));
    const oracle::Expr ex = oracle::random_expr(atoms, 3, rng);
    const PropositionalEncoding e = export_propositional(rules);
    const Formula f = parse_formula(ex.text());
    const VerificationResult got = verify_constraint(e, f);
    const oracle::TruthTableResult want = oracle::truth_table_verify(rules, ex);
    EXPECT_EQ(got.holds, want.holds) << ex.text();
    if (!got.holds) {
      EXPECT_TRUE(e.satisfied_by(*got.counterexample));
      EXPECT_FALSE(ex.eval(*got.counterexample));
    }
    EXPECT_EQ(cnf_satisfiable(export_cnf(e, f)), !want.holds) << ex.text();
  }
}
