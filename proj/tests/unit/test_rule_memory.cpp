#include "constructions.hpp"
#include "gradcheck.hpp"
#include "sat.hpp"
#include "toy_models.hpp"

#include "hcmr/constraints.hpp"
#include "hcmr/error.hpp"
#include "hcmr/rule_memory.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>

using namespace hcmr;

namespace {

RuleMemoryParams memory(int n, int r, std::uint64_t seed, int emb = 8) {
  ModelConfig c = toy::small_config(n, r);
  c.size_rule_emb = emb;
  nn::Rng rng(seed);
  return RuleMemoryParams::init(c, rng);
}

void zero_logits(RuleMemoryParams& m) {
  m.logits.weight.mutable_value().setZero();
  m.logits.bias.mutable_value().setZero();
}

}  // namespace

TEST(DecodeRoles, ZeroLogitsGiveUniform) {
  RuleMemoryParams m = memory(3, 2, 1);
  zero_logits(m);
  const RoleTensor t = decode_unadjusted_roles(m);
  for (double p : t.probs) EXPECT_NEAR(p, 1.0 / 3.0, 1e-15);
}

TEST(DecodeRoles, SaturatedLogits) {
  RuleMemoryParams m = memory(3, 2, 2);
  zero_logits(m);
  m.logits.bias.mutable_value()(0, 3 * 1 + 0) = 10.0;
  m.logits.bias.mutable_value()(0, 3 * 1 + 1) = -10.0;
  m.logits.bias.mutable_value()(0, 3 * 1 + 2) = -10.0;
  const RoleTensor t = decode_unadjusted_roles(m);
  EXPECT_NEAR(t.at(2, 1, 1, Role::Positive), 1.0, 1e-4);
  EXPECT_NEAR(t.at(2, 1, 1, Role::Negative), 0.0, 1e-4);
  EXPECT_NEAR(t.at(2, 1, 1, Role::Irrelevant), 0.0, 1e-4);
}

TEST(DecodeRoles, RandomSlotsNormalized) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const RoleTensor t = decode_unadjusted_roles(memory(4, 3, seed));
    for (std::size_t s = 0; s < t.probs.size(); s += 3) {
      EXPECT_NEAR(t.probs[s] + t.probs[s + 1] + t.probs[s + 2], 1.0, 1e-6);
      for (int q = 0; q < 3; ++q) {
        EXPECT_GE(t.probs[s + q], 0.0);
        EXPECT_LE(t.probs[s + q], 1.0);
      }
    }
  }
}

TEST(DecodeRoles, NonFiniteLogitNamesSlot) {
  RuleMemoryParams m = memory(3, 2, 3);
  m.rule_embeddings.mutable_value()(3, 0) = std::numeric_limits<double>::quiet_NaN();  // slot i=1, k=1
  try {
    decode_unadjusted_roles(m);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("i=1, k=1"), std::string::npos) << e.what();
  }
}

TEST(AdjustRoles, PriorityIndicator) {
  RoleTensor rp(2, 1);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      rp.at(i, 0, j, Role::Positive) = 0.5;
      rp.at(i, 0, j, Role::Negative) = 0.3;
      rp.at(i, 0, j, Role::Irrelevant) = 0.2;
    }
  }
  const RoleTensor adj = adjust_roles(rp, {0.3, 0.7});
  EXPECT_DOUBLE_EQ(adj.at(0, 0, 1, Role::Positive), 0.5);
  EXPECT_DOUBLE_EQ(adj.at(0, 0, 1, Role::Negative), 0.3);
  EXPECT_DOUBLE_EQ(adj.at(0, 0, 1, Role::Irrelevant), 0.2);
  EXPECT_DOUBLE_EQ(adj.at(1, 0, 0, Role::Irrelevant), 1.0);
  EXPECT_DOUBLE_EQ(adj.at(1, 0, 0, Role::Positive), 0.0);
  // Diagonal always irrelevant.
  EXPECT_DOUBLE_EQ(adj.at(0, 0, 0, Role::Irrelevant), 1.0);
  EXPECT_DOUBLE_EQ(adj.at(1, 0, 1, Role::Irrelevant), 1.0);
}

TEST(AdjustRoles, EqualPrioritiesForbidBothDirections) {
  RoleTensor rp(2, 1);
  for (auto& p : rp.probs) p = 1.0 / 3.0;
  const RoleTensor adj = adjust_roles(rp, {0.5, 0.5});
  EXPECT_DOUBLE_EQ(adj.at(0, 0, 1, Role::Irrelevant), 1.0);
  EXPECT_DOUBLE_EQ(adj.at(1, 0, 0, Role::Irrelevant), 1.0);
}

TEST(AdjustRoles, ForceSourceOverridesPriorities) {
  RoleTensor rp(3, 2);
  for (auto& p : rp.probs) p = 1.0 / 3.0;
  ConstraintSpec spec;
  spec.n_concepts = 3;
  spec.n_rules = 2;
  spec.force_source = {0};
  const ConstraintSet cs(spec);
  const RoleTensor adj = adjust_roles(rp, {-5.0, 1.0, 2.0}, &cs);
  for (int k = 0; k < 2; ++k) {
    for (int j = 0; j < 3; ++j) EXPECT_DOUBLE_EQ(adj.at(0, k, j, Role::Irrelevant), 1.0);
  }
}

TEST(AdjustRoles, PreservesNormalization) {
  const RuleMemoryParams m = memory(5, 3, 4);
  const RoleTensor adj = adjust_roles(decode_unadjusted_roles(m), {0.1, -0.2, 0.5, 0.4, -1.0});
  for (std::size_t s = 0; s < adj.probs.size(); s += 3) {
    EXPECT_NEAR(adj.probs[s] + adj.probs[s + 1] + adj.probs[s + 2], 1.0, 1e-12);
  }
}

TEST(AdjustRoles, DifferentiableFormMatchesTensorForm) {
  const RuleMemoryParams m = memory(4, 2, 5);
  const RoleVars vars = adjust_role_vars(decode_role_vars(m), m.priorities, nullptr, 1.0);
  std::vector<double> o(m.priorities.value().data(), m.priorities.value().data() + 4);
  const RoleTensor t = adjust_roles(decode_unadjusted_roles(m), o);
  const RoleTensor tv = vars.to_tensor();
  ASSERT_EQ(t.probs.size(), tv.probs.size());
  for (std::size_t s = 0; s < t.probs.size(); ++s) EXPECT_NEAR(t.probs[s], tv.probs[s], 1e-12);
}

TEST(AdjustRoles, PriorityGradientUsesSigmoidSurrogate) {
  // Loss = P-probability of slot (0, 0, 1): gradient wrt O1 is
  // p'(P) * sigmoid'(O1 - O0) with tau = 1.
  RuleMemoryParams m = memory(2, 1, 6);
  m.priorities.mutable_value() << 0.2, 0.9;
  const RoleVars rp = decode_role_vars(m);
  const double p_pos = rp.pos.value()(0, 1);
  const RoleVars adj = adjust_role_vars(rp, m.priorities, nullptr, 1.0);
  ad::backward(ad::sum(ad::slice_cols(ad::slice_rows(adj.pos, 0, 1), 1, 1)));
  const double s = 1.0 / (1.0 + std::exp(-(0.9 - 0.2)));
  EXPECT_NEAR(m.priorities.grad()(0, 1), p_pos * s * (1.0 - s), 1e-12);
  EXPECT_NEAR(m.priorities.grad()(0, 0), -p_pos * s * (1.0 - s), 1e-12);
}

TEST(HardRules, FigureTwoMemory) {
  // Concepts C1..C4 as indices 1..4; C0 unused.
  const SymbolicRuleSet rules =
      toy::rules_from(5, 2, {"C3 <- C1 & C2", "C3 <- !C1", "C4 <- C1 & C3", "C4 <- !C3"});
  EXPECT_EQ(rules.parents(3), (std::vector<int>{1, 2}));
  EXPECT_EQ(rules.parents(4), (std::vector<int>{1, 3}));
  EXPECT_TRUE(rules.source(1));
  EXPECT_TRUE(rules.source(2));
  EXPECT_FALSE(rules.source(3));
  EXPECT_FALSE(rules.source(4));
}

TEST(HardRules, AllIrrelevantIsEmptyMemory) {
  const RoleTensor t(4, 3);
  const SymbolicRuleSet rules = hard_rules(t);
  for (int i = 0; i < 4; ++i) EXPECT_TRUE(rules.source(i));
  EXPECT_TRUE(derive_graph(rules).edges.empty());
}

TEST(HardRules, TieBreakOrder) {
  RoleTensor t(2, 1);
  t.at(0, 0, 1, Role::Positive) = 0.4;
  t.at(0, 0, 1, Role::Negative) = 0.4;
  t.at(0, 0, 1, Role::Irrelevant) = 0.2;
  EXPECT_EQ(hard_rules(t).role(0, 0, 1), Role::Positive);
  t.at(0, 0, 1, Role::Positive) = 0.2;
  t.at(0, 0, 1, Role::Negative) = 0.4;
  t.at(0, 0, 1, Role::Irrelevant) = 0.4;
  EXPECT_EQ(hard_rules(t).role(0, 0, 1), Role::Negative);
}

TEST(HardRules, DerivedParentAndSourceDefinitions) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const SymbolicRuleSet rules = oracle::random_rules(5, 3, 0.3, rng);
    for (int i = 0; i < 5; ++i) {
      bool any = false;
      for (int j = 0; j < 5; ++j) {
        bool pj = false;
        for (int k = 0; k < 3; ++k) pj = pj || rules.role(i, k, j) != Role::Irrelevant;
        EXPECT_EQ(rules.parent(i, j), pj);
        any = any || pj;
      }
      EXPECT_EQ(rules.source(i), !any);
    }
  }
}

TEST(HardRules, NeverUsesLowerOrEqualPriorityParent) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const RuleMemoryParams m = memory(6, 3, seed);
    std::vector<double> o(m.priorities.value().data(), m.priorities.value().data() + 6);
    const SymbolicRuleSet rules = hard_rules(adjust_roles(decode_unadjusted_roles(m), o));
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) {
        if (rules.parent(i, j)) EXPECT_GT(o[static_cast<std::size_t>(j)], o[static_cast<std::size_t>(i)]);
      }
    }
  }
}

TEST(DeriveGraph, FigureThreeEdges) {
  const SymbolicRuleSet rules = toy::rules_from(4, 2, {"C2 <- C0", "C3 <- C0 & !C1", "C3 <- C2"});
  const ConceptGraph g = derive_graph(rules);
  const std::vector<std::pair<int, int>> expected{{0, 2}, {0, 3}, {1, 3}, {2, 3}};
  EXPECT_EQ(g.edges, expected);
  std::vector<int> pos(4);
  for (int t = 0; t < 4; ++t) pos[static_cast<std::size_t>(g.topo_order[static_cast<std::size_t>(t)])] = t;
  for (const auto& [p, c] : g.edges) EXPECT_LT(pos[static_cast<std::size_t>(p)], pos[static_cast<std::size_t>(c)]);
  EXPECT_EQ(g.sources, (std::vector<int>{0, 1}));
  EXPECT_EQ(g.sinks, (std::vector<int>{3}));
  EXPECT_EQ(g.depths(), (std::vector<int>{0, 0, 1, 2}));
  EXPECT_EQ(g.heights(), (std::vector<int>{2, 1, 1, 0}));
  EXPECT_EQ(g.ancestors(3), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(g.descendants(0), (std::vector<int>{2, 3}));
}

TEST(DeriveGraph, EmptyMemory) {
  const ConceptGraph g = derive_graph(SymbolicRuleSet::empty(3, 2));
  EXPECT_TRUE(g.edges.empty());
  EXPECT_EQ(g.sources, (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(g.sinks, (std::vector<int>{0, 1, 2}));
}

TEST(DeriveGraph, CycleIsAnInvariantError) {
  const SymbolicRuleSet cyclic = toy::rules_from(2, 1, {"C0 <- C1", "C1 <- C0"});
  EXPECT_THROW(derive_graph(cyclic), InvariantError);
}

TEST(DeriveGraph, RandomDrawsAreAcyclic) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const RuleMemoryParams m = memory(10, 2, seed);
    std::vector<double> o(m.priorities.value().data(), m.priorities.value().data() + 10);
    const SymbolicRuleSet rules = hard_rules(adjust_roles(decode_unadjusted_roles(m), o));
    EXPECT_FALSE(oracle::has_cycle(rules));
    EXPECT_NO_THROW(derive_graph(rules));
  }
}

TEST(DeriveGraph, ConstructionReproducesDag) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 6;
    const auto edges = oracle::random_dag(n, 0.4, rng);
    // Priorities: parents strictly above children (longest-path height).
    std::vector<double> o(static_cast<std::size_t>(n), 0.0);
    for (int pass = 0; pass < n; ++pass) {
      for (const auto& [p, c] : edges) {
        o[static_cast<std::size_t>(p)] = std::max(o[static_cast<std::size_t>(p)], o[static_cast<std::size_t>(c)] + 1.0);
      }
    }
    std::vector<Role> roles(static_cast<std::size_t>(n) * n, Role::Irrelevant);
    for (const auto& [p, c] : edges) roles[static_cast<std::size_t>(c) * n + p] = Role::Positive;
    const SymbolicRuleSet target(n, 1, roles);
    RuleMemoryParams m = memory(n, 1, 3, n);
    oracle::realize_rules(m, target, o);
    const SymbolicRuleSet got = hard_rules(adjust_roles(decode_unadjusted_roles(m), o));
    EXPECT_EQ(derive_graph(got).edges, edges);
  }
}

TEST(SampleRoles, DegenerateAlwaysPositive) {
  RoleTensor t(2, 1);
  t.set_deterministic(0, 0, 1, Role::Positive);
  nn::Rng rng(1);
  for (int s = 0; s < 100; ++s) EXPECT_EQ(sample_roles(t, rng).role(0, 0, 1), Role::Positive);
}

TEST(SampleRoles, MonteCarloFrequency) {
  RoleTensor t(2, 1);
  t.at(0, 0, 1, Role::Positive) = 0.5;
  t.at(0, 0, 1, Role::Negative) = 0.5;
  t.at(0, 0, 1, Role::Irrelevant) = 0.0;
  nn::Rng rng(42);
  int pos = 0;
  for (int s = 0; s < 10000; ++s) pos += sample_roles(t, rng).role(0, 0, 1) == Role::Positive;
  EXPECT_NEAR(pos / 10000.0, 0.5, 0.02);
}

TEST(SampleRoles, DisallowedSlotsStayIrrelevant) {
  const RuleMemoryParams m = memory(4, 2, 9);
  const std::vector<double> o{0.0, 1.0, 2.0, 3.0};
  const RoleTensor adj = adjust_roles(decode_unadjusted_roles(m), o);
  nn::Rng rng(5);
  for (int s = 0; s < 200; ++s) {
    const SymbolicRuleSet r = sample_roles(adj, rng);
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j <= i; ++j) {
        for (int k = 0; k < 2; ++k) EXPECT_EQ(r.role(i, k, j), Role::Irrelevant);
      }
    }
  }
}

TEST(SampleRoles, DeterministicUnderSeed) {
  const RuleMemoryParams m = memory(5, 2, 10);
  const RoleTensor adj = adjust_roles(decode_unadjusted_roles(m), {0.0, 0.3, 0.6, 0.9, 1.2});
  nn::Rng a(77);
  nn::Rng b(77);
  EXPECT_EQ(sample_roles(adj, a), sample_roles(adj, b));
}

TEST(SampleRoles, StraightThroughForwardsOneHotAndPassesGradient) {
  const RuleMemoryParams m = memory(3, 2, 12);
  const RoleVars adj = adjust_role_vars(decode_role_vars(m), m.priorities, nullptr, 1.0);
  nn::Rng rng(3);
  const SampledRoles s = sample_role_vars(adj, rng);
  const ad::Matrix total = s.onehot.pos.value() + s.onehot.neg.value() + s.onehot.irr.value();
  EXPECT_TRUE(total.isApprox(ad::Matrix::Ones(total.rows(), total.cols())));
  for (int i = 0; i < 3; ++i) {
    for (int k = 0; k < 2; ++k) {
      for (int j = 0; j < 3; ++j) {
        const Eigen::Index row = i * 2 + k;
        const Role r = s.rules.role(i, k, j);
        EXPECT_EQ(s.onehot.pos.value()(row, j), r == Role::Positive ? 1.0 : 0.0);
        EXPECT_EQ(s.onehot.neg.value()(row, j), r == Role::Negative ? 1.0 : 0.0);
      }
    }
  }
  ad::backward(ad::sum(s.onehot.pos));
  EXPECT_TRUE(m.rule_embeddings.has_grad());
}

TEST(RoleWorkload, ScalesWithConceptsSquared) {
  auto work = [](int n) {
    const RuleMemoryParams m = memory(n, 3, 1, 4);
    reset_role_workload();
    std::vector<double> o(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) o[static_cast<std::size_t>(i)] = i;
    (void)adjust_roles(decode_unadjusted_roles(m), o);
    return role_workload();
  };
  EXPECT_EQ(work(8), 4 * work(4));
  ModelConfig c;
  c.n_concepts = 8;
  c.n_rules = 3;
  EXPECT_EQ(c.role_tensor_elements(), 8 * 3 * 8 * 3);
}

TEST(ModelConfigValidation, Rejects) {
  ModelConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_rules = 1;
  EXPECT_NO_THROW(c.validate());
  EXPECT_THROW(c.validate(true), ArgumentError);
  c = ModelConfig{};
  c.n_concepts = 0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = ModelConfig{};
  c.beta = -1.0;
  EXPECT_THROW(c.validate(), ArgumentError);
  c = ModelConfig{};
  c.st_temperature = 0.0;
  EXPECT_THROW(c.validate(), ArgumentError);
}
