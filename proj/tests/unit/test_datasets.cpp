#include "hcmr/datasets.hpp"
#include "hcmr/error.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace hcmr;

namespace {

int bits_of(const Dataset& d, Eigen::Index r, int f) {
  const int b0 = d.inputs(r, 0) > 0.5 ? 1 : 0;
  const int b1 = d.inputs(r, f) > 0.5 ? 1 : 0;
  return 2 * b0 + b1;
}

}  // namespace

TEST(SyntheticXor, ShapeAndDeterminism) {
  SyntheticXorSpec s;
  s.n_examples = 100;
  const Dataset a = gen_synthetic_xor(s, 3);
  EXPECT_EQ(a.size(), 100);
  EXPECT_EQ(a.input_dim(), 4);
  EXPECT_EQ(a.n_concepts(), kXorConcepts);
  EXPECT_EQ(a.observed.sum(), 700.0);
  EXPECT_NO_THROW(a.validate());
  EXPECT_TRUE(a == gen_synthetic_xor(s, 3));
  EXPECT_FALSE(a == gen_synthetic_xor(s, 4));
}

TEST(SyntheticXor, DigitAbsentWhenBitIsZero) {
  SyntheticXorSpec s;
  s.n_examples = 5000;
  s.noise = 0.0;
  const Dataset d = gen_synthetic_xor(s, 1);
  for (Eigen::Index r = 0; r < d.size(); ++r) {
    const int bits = bits_of(d, r, 2);
    if (!(bits & 2)) EXPECT_EQ(d.labels(r, 0), 0.0);
    if (!(bits & 1)) EXPECT_EQ(d.labels(r, 1), 0.0);
  }
}

TEST(SyntheticXor, DigitRateGivenBit) {
  SyntheticXorSpec s;
  s.n_examples = 100000;
  s.noise = 0.0;
  const Dataset d = gen_synthetic_xor(s, 2);
  double on = 0.0;
  double hits = 0.0;
  for (Eigen::Index r = 0; r < d.size(); ++r) {
    if (bits_of(d, r, 2) & 2) {
      on += 1.0;
      hits += d.labels(r, 0);
    }
  }
  EXPECT_NEAR(hits / on, 0.7, 0.01);
}

TEST(SyntheticXor, ConditionalsFollowNoisyXor) {
  SyntheticXorSpec s;
  s.n_examples = 100000;
  const Dataset d = gen_synthetic_xor(s, 5);
  const auto& st = xor_structure();
  for (int i = 2; i < kXorConcepts; ++i) {
    std::array<double, 4> n{};
    std::array<double, 4> ones{};
    for (Eigen::Index r = 0; r < d.size(); ++r) {
      const int a = static_cast<int>(d.labels(r, st[static_cast<std::size_t>(i)][0]));
      const int b = static_cast<int>(d.labels(r, st[static_cast<std::size_t>(i)][1]));
      n[static_cast<std::size_t>(2 * a + b)] += 1.0;
      ones[static_cast<std::size_t>(2 * a + b)] += d.labels(r, i);
    }
    for (int ab = 0; ab < 4; ++ab) {
      if (n[static_cast<std::size_t>(ab)] < 500) continue;
      const double want = (ab == 1 || ab == 2) ? 1.0 : 0.05;
      EXPECT_NEAR(ones[static_cast<std::size_t>(ab)] / n[static_cast<std::size_t>(ab)], want, 0.02) << i << " " << ab;
    }
  }
}

TEST(SyntheticXor, StructureIsAcyclicAndTopological) {
  const auto& st = xor_structure();
  EXPECT_EQ(st[0][0], -1);
  EXPECT_EQ(st[1][0], -1);
  for (int i = 2; i < kXorConcepts; ++i) {
    for (int p : st[static_cast<std::size_t>(i)]) {
      EXPECT_GE(p, 0);
      EXPECT_LT(p, i);
    }
  }
}

TEST(BayesOracle, ConditionalTable) {
  const XorBayesOracle o = xor_bayes_oracle(SyntheticXorSpec{});
  for (int i = 2; i < kXorConcepts; ++i) {
    EXPECT_DOUBLE_EQ(o.conditional[static_cast<std::size_t>(i)][0], 0.05);
    EXPECT_DOUBLE_EQ(o.conditional[static_cast<std::size_t>(i)][1], 1.0);
    EXPECT_DOUBLE_EQ(o.conditional[static_cast<std::size_t>(i)][2], 1.0);
    EXPECT_DOUBLE_EQ(o.conditional[static_cast<std::size_t>(i)][3], 0.05);
  }
}

TEST(BayesOracle, ClosedFormSourceValues) {
  const XorBayesOracle o = xor_bayes_oracle(SyntheticXorSpec{});
  // C0 given bits: 0 when bit 0 is off, 0.7 otherwise.
  EXPECT_DOUBLE_EQ(o.marginal_given_bits[0][0], 0.0);
  EXPECT_NEAR(o.marginal_given_bits[0][2], 0.7, 1e-15);
  EXPECT_NEAR(o.accuracy_given_x[0], 0.5 * 1.0 + 0.5 * 0.7, 1e-15);
  // C2 = C0 xor' C1 with both bits on: p(a != b) = 2 * 0.7 * 0.3.
  const double differ = 2 * 0.7 * 0.3;
  EXPECT_NEAR(o.marginal_given_bits[2][3], differ + (1 - differ) * 0.05, 1e-15);
  // Parents differ with probability (0 + 0.7 + 0.7 + 0.42) / 4; otherwise the
  // best guess is right with probability 0.95.
  const double p_differ = (0.0 + 0.7 + 0.7 + differ) / 4.0;
  EXPECT_NEAR(o.accuracy_given_parents[2], p_differ + (1.0 - p_differ) * 0.95, 1e-12);
}

TEST(BayesOracle, AgreesWithEmpiricalConditionals) {
  SyntheticXorSpec s;
  s.n_examples = 200000;
  s.noise = 0.0;
  const XorBayesOracle o = xor_bayes_oracle(s);
  const Dataset d = gen_synthetic_xor(s, 9);
  std::array<double, 4> count{};
  std::array<std::array<double, kXorConcepts>, 4> ones{};
  for (Eigen::Index r = 0; r < d.size(); ++r) {
    const int bits = bits_of(d, r, 2);
    count[static_cast<std::size_t>(bits)] += 1.0;
    for (int i = 0; i < kXorConcepts; ++i) ones[static_cast<std::size_t>(bits)][static_cast<std::size_t>(i)] += d.labels(r, i);
  }
  double mean_acc = 0.0;
  for (int i = 0; i < kXorConcepts; ++i) {
    double acc = 0.0;
    for (int b = 0; b < 4; ++b) {
      const double p = ones[static_cast<std::size_t>(b)][static_cast<std::size_t>(i)] / count[static_cast<std::size_t>(b)];
      EXPECT_NEAR(p, o.marginal_given_bits[static_cast<std::size_t>(i)][static_cast<std::size_t>(b)], 0.01);
      acc += 0.25 * std::max(p, 1.0 - p);
    }
    EXPECT_NEAR(acc, o.accuracy_given_x[static_cast<std::size_t>(i)], 0.01);
    mean_acc += acc / kXorConcepts;
  }
  EXPECT_NEAR(mean_acc, o.mean_accuracy_given_x(), 0.005);
}

TEST(BayesOracle, SourcesNeverHurt) {
  const XorBayesOracle o = xor_bayes_oracle(SyntheticXorSpec{});
  for (int i = 0; i < kXorConcepts; ++i) {
    EXPECT_GE(o.accuracy_given_x_and_sources[static_cast<std::size_t>(i)], o.accuracy_given_x[static_cast<std::size_t>(i)] - 1e-15);
    EXPECT_LE(o.accuracy_given_x_and_sources[static_cast<std::size_t>(i)], 1.0);
  }
  EXPECT_DOUBLE_EQ(o.accuracy_given_x_and_sources[0], 1.0);
  // C2 depends on the input only through its parents, which are the sources.
  EXPECT_NEAR(o.accuracy_given_x_and_sources[2], o.accuracy_given_parents[2], 1e-12);
}

TEST(SymbolicAddition, OneHotDigitsAndSum) {
  SymbolicAdditionSpec s;
  s.n_examples = 500;
  s.noise = 0.0;
  const Dataset d = gen_symbolic_addition(s, 4);
  EXPECT_EQ(d.n_concepts(), kAdditionConcepts);
  EXPECT_EQ(d.input_dim(), 20);
  for (Eigen::Index r = 0; r < d.size(); ++r) {
    EXPECT_EQ(d.labels.row(r).segment(0, 10).sum(), 1.0);
    EXPECT_EQ(d.labels.row(r).segment(10, 10).sum(), 1.0);
    EXPECT_EQ(d.labels.row(r).segment(20, 19).sum(), 1.0);
    Eigen::Index a = 0;
    Eigen::Index b = 0;
    Eigen::Index sum = 0;
    d.labels.row(r).segment(0, 10).maxCoeff(&a);
    d.labels.row(r).segment(10, 10).maxCoeff(&b);
    d.labels.row(r).segment(20, 19).maxCoeff(&sum);
    EXPECT_EQ(sum, a + b);
    EXPECT_EQ(d.inputs(r, a), 1.0);
    EXPECT_EQ(d.inputs(r, 10 + b), 1.0);
  }
}

TEST(SymbolicAddition, FiveAndTwoMakeSeven) {
  SymbolicAdditionSpec s;
  s.n_examples = 2000;
  const Dataset d = gen_symbolic_addition(s, 8);
  bool found = false;
  for (Eigen::Index r = 0; r < d.size(); ++r) {
    if (d.labels(r, 5) == 1.0 && d.labels(r, 12) == 1.0) {
      found = true;
      EXPECT_EQ(d.labels(r, 27), 1.0);
    }
  }
  EXPECT_TRUE(found);
}

TEST(Csv, RoundTrip) {
  SyntheticXorSpec s;
  s.n_examples = 20;
  Dataset d = gen_synthetic_xor(s, 6).hide({3});
  d.observed(2, 0) = 0.0;
  d.labels(2, 0) = 0.0;
  const Dataset back = parse_csv(to_csv(d));
  EXPECT_TRUE(back == d);
  const auto path = std::filesystem::temp_directory_path() / "hcmr_csv_roundtrip.csv";
  save_csv(path, d);
  EXPECT_TRUE(load_csv(path) == d);
  std::filesystem::remove(path);
}

TEST(Csv, HeaderAndCells) {
  const Dataset d = parse_csv("x_0,c_0,c_1\n0.5,1,?\n-2,0,1\n");
  EXPECT_EQ(d.input_dim(), 1);
  EXPECT_EQ(d.n_concepts(), 2);
  EXPECT_EQ(d.inputs(1, 0), -2.0);
  EXPECT_EQ(d.observed(0, 1), 0.0);
  EXPECT_EQ(d.labels(1, 1), 1.0);
}

TEST(Csv, Errors) {
  EXPECT_THROW(parse_csv(""), ParseError);
  EXPECT_THROW(parse_csv("x_0,y\n1,2\n"), SchemaError);
  EXPECT_THROW(parse_csv("x_0\n1\n"), SchemaError);
  EXPECT_THROW(parse_csv("x_0,c_0\n1\n"), SchemaError);
  try {
    parse_csv("x_0,c_0\n1,0\n1,2\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 3u);
  }
  try {
    parse_csv("x_0,c_0\nabc,0\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(load_csv("/nonexistent/hcmr.csv"), IoError);
}

TEST(DatasetOps, HideHeadTail) {
  SyntheticXorSpec s;
  s.n_examples = 10;
  const Dataset d = gen_synthetic_xor(s, 7);
  const Dataset h = d.hide({0, 6});
  EXPECT_EQ(h.observed.col(0).sum(), 0.0);
  EXPECT_EQ(h.labels.col(6).sum(), 0.0);
  EXPECT_EQ(h.observed.col(1).sum(), 10.0);
  EXPECT_EQ(d.head(4).size(), 4);
  EXPECT_EQ(d.tail_from(4).size(), 6);
  EXPECT_TRUE(d.tail_from(4).inputs.row(0) == d.inputs.row(4));
  EXPECT_TRUE(d.rows({9, 0}).labels.row(1) == d.labels.row(0));
}
