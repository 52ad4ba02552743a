// Sanity checks of the test oracles themselves.

#include "constructions.hpp"
#include "reference_model.hpp"
#include "sat.hpp"
#include "toy_models.hpp"

#include <gtest/gtest.h>

namespace {

bool brute_force_sat(const oracle::Cnf& cnf) {
  for (std::uint32_t m = 0; m < (1u << cnf.n_vars); ++m) {
    bool all = true;
    for (const auto& cl : cnf.clauses) {
      bool any = false;
      for (int lit : cl) {
        const bool v = (m >> (std::abs(lit) - 1)) & 1u;
        any = any || (lit > 0 ? v : !v);
      }
      all = all && any;
    }
    if (all) return true;
  }
  return false;
}

}  // namespace

TEST(Dpll, AgreesWithBruteForce) {
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> var(1, 8);
  std::bernoulli_distribution sign(0.5);
  for (int t = 0; t < 300; ++t) {
    oracle::Cnf cnf;
    cnf.n_vars = 8;
    const int m = 10 + t % 30;
    for (int c = 0; c < m; ++c) {
      std::vector<int> cl;
      for (int l = 0; l < 3; ++l) cl.push_back(sign(rng) ? var(rng) : -var(rng));
      cnf.clauses.push_back(cl);
    }
    const auto model = oracle::solve(cnf);
    EXPECT_EQ(model.has_value(), brute_force_sat(cnf));
    if (model) {
      for (const auto& cl : cnf.clauses) {
        bool any = false;
        for (int lit : cl) any = any || (lit > 0 ? (*model)[static_cast<std::size_t>(lit)] : !(*model)[static_cast<std::size_t>(-lit)]);
        EXPECT_TRUE(any);
      }
    }
  }
}

TEST(Dpll, ParsesNamesAndComments) {
  const oracle::Cnf cnf = oracle::parse_dimacs("c var 1 a\nc var 2 b\np cnf 2 2\n1 2 0\n-1 0\n");
  EXPECT_EQ(cnf.names.at("b"), 2);
  const auto model = oracle::solve(cnf);
  ASSERT_TRUE(model);
  EXPECT_FALSE((*model)[1]);
  EXPECT_TRUE((*model)[2]);
  EXPECT_FALSE(oracle::solve(oracle::parse_dimacs("p cnf 1 2\n1 0\n-1 0\n")).has_value());
}

TEST(RandomRules, RespectRankOrder) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 100; ++t) EXPECT_FALSE(oracle::has_cycle(oracle::random_rules(6, 3, 0.5, rng)));
}

TEST(HasCycle, DetectsTwoCycle) {
  EXPECT_TRUE(oracle::has_cycle(toy::rules_from(2, 1, {"C0 <- C1", "C1 <- C0"})));
  EXPECT_FALSE(oracle::has_cycle(toy::rules_from(2, 1, {"C1 <- C0"})));
}

TEST(ReferenceModel, MarginalsOfTwoConceptModel) {
  const hcmr::FrozenModel m = toy::two_concept_model(0.6, 0.7, 0.2);
  const auto p = oracle::reference_marginals({0.0, 0.0}, m);
  EXPECT_NEAR(p[0], 0.6, 1e-12);
  EXPECT_NEAR(p[1], 0.74, 1e-12);
  const auto iv = oracle::reference_marginals({0.0, 0.0}, m, {{0, false}});
  EXPECT_EQ(iv[0], 0.0);
  EXPECT_NEAR(iv[1], 0.8, 1e-12);
}

TEST(TruthTable, SimpleMemory) {
  const auto rules = toy::rules_from(2, 1, {"C1 <- C0"});
  oracle::Expr c0{oracle::Expr::Atom, "c0", {}};
  oracle::Expr c1{oracle::Expr::Atom, "c1", {}};
  oracle::Expr iff{oracle::Expr::Iff, "", {c0, c1}};
  EXPECT_TRUE(oracle::truth_table_verify(rules, iff).holds);
  oracle::Expr notc1{oracle::Expr::Not, "", {c1}};
  EXPECT_FALSE(oracle::truth_table_verify(rules, notc1).holds);
}
