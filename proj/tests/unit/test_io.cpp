#include "sat.hpp"
#include "toy_models.hpp"

#include "hcmr/checkpoint.hpp"
#include "hcmr/error.hpp"
#include "hcmr/inference.hpp"
#include "hcmr/rule_io.hpp"

#include <nlohmann/json.hpp>

#include <gtest/gtest.h>

#include <filesystem>
#include <limits>

using namespace hcmr;

TEST(RuleText, Formatting) {
  const SymbolicRuleSet r = toy::rules_from(4, 2, {"C3 <- C1 & !C2"});
  EXPECT_EQ(rule_text(r, 3, 0), "C3 <- C1 & !C2");
  EXPECT_EQ(rule_text(r, 3, 1), "C3 <- .");
  EXPECT_EQ(concept_name(12), "C12");
  EXPECT_EQ(parse_concept_ref("c3", 4), 3);
  EXPECT_EQ(parse_concept_ref("2", 4), 2);
  EXPECT_FALSE(parse_concept_ref("C4", 4).has_value());
  EXPECT_FALSE(parse_concept_ref("X1", 4).has_value());
}

TEST(RuleText, ParseLineVariants) {
  const RuleLine a = parse_rule_line("C2[1] <- ~C0 & C1", 3);
  EXPECT_EQ(a.concept_index, 2);
  EXPECT_EQ(a.rule, 1);
  EXPECT_EQ(a.body, (std::vector<Literal>{{0, true}, {1, false}}));
  const RuleLine b = parse_rule_line("C2 <- \xC2\xAC" "C0 \xE2\x88\xA7 C1", 3);
  EXPECT_EQ(b.body, a.body);
  EXPECT_FALSE(b.rule.has_value());
  EXPECT_TRUE(parse_rule_line("C1 <- .", 3).body.empty());
  EXPECT_THROW(parse_rule_line("C1 C0", 3), ParseError);
  EXPECT_THROW(parse_rule_line("C1 <- C0 & C0", 3), ParseError);
  EXPECT_THROW(parse_rule_line("C1 <- C5", 3), ParseError);
}

TEST(RuleExport, RoundTripRandomMemories) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    const int n = 2 + t % 6;
    const int r = 1 + t % 4;
    const SymbolicRuleSet rules = oracle::random_rules(n, r, 0.4, rng);
    std::vector<double> pri;
    std::normal_distribution<double> g(0.0, 3.0);
    for (int i = 0; i < n; ++i) pri.push_back(g(rng));
    const RuleDocument doc = import_rules(export_rules(rules, pri));
    EXPECT_EQ(doc.rules, rules);
    EXPECT_EQ(doc.priorities, pri);
  }
}

TEST(RuleExport, DocumentLayout) {
  const SymbolicRuleSet r = toy::rules_from(3, 2, {"C2 <- C0 & !C1"});
  const std::string text = export_rules(r, {0.25, 1.5, -0.75});
  EXPECT_EQ(text,
            "concepts: C0 C1 C2\n"
            "n_rules: 2\n"
            "priorities: 0.25 1.5 -0.75\n"
            "parent:\n"
            "0 0 0\n"
            "0 0 0\n"
            "1 1 0\n"
            "rules:\n"
            "C0[0] <- .\n"
            "C0[1] <- .\n"
            "C1[0] <- .\n"
            "C1[1] <- .\n"
            "C2[0] <- C0 & !C1\n"
            "C2[1] <- .\n");
}

TEST(RuleExport, InconsistentParentMatrix) {
  const SymbolicRuleSet r = toy::rules_from(2, 1, {"C1 <- C0"});
  std::string text = export_rules(r, {1.0, 0.0});
  const auto pos = text.find("parent:\n0 0\n1 0\n");
  ASSERT_NE(pos, std::string::npos);
  text.replace(pos, std::string("parent:\n0 0\n1 0\n").size(), "parent:\n0 0\n0 0\n");
  EXPECT_THROW(import_rules(text), SchemaError);
  EXPECT_THROW(import_rules("n_rules: 2\n"), ParseError);
}

TEST(RuleExport, FileRoundTrip) {
  const SymbolicRuleSet r = toy::rules_from(3, 1, {"C1 <- !C0", "C2 <- C1"});
  const auto path = std::filesystem::temp_directory_path() / "hcmr_rules_roundtrip.txt";
  save_rules(path, r, {2.0, 1.0, 0.0});
  EXPECT_EQ(load_rules(path).rules, r);
  std::filesystem::remove(path);
  EXPECT_THROW(load_rules(path), IoError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 1e300, 0.0, 123456789.125}) {
    EXPECT_EQ(parse_double(format_double(v)), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_THROW(parse_double("1.5x"), ParseError);
  EXPECT_THROW(parse_double(""), ParseError);
}

TEST(Checkpoint, RoundTripPreservesParameters) {
  const ModelParameters p = ModelParameters::init(toy::small_config(4, 3, 3), 21);
  const Checkpoint c = checkpoint_from_json(checkpoint_to_json(p, nullptr));
  auto a = const_cast<ModelParameters&>(p).parameters();
  auto b = const_cast<Checkpoint&>(c).params.parameters();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t t = 0; t < a.size(); ++t) {
    EXPECT_EQ(a[t].group, b[t].group);
    EXPECT_EQ(a[t].name, b[t].name);
    EXPECT_EQ(a[t].var->value(), b[t].var->value());
  }
  EXPECT_FALSE(c.constraints().has_value());
  const std::vector<double> x{0.2, -0.1, 0.7};
  EXPECT_EQ(infer_map(x, freeze(p)).probabilities(), infer_map(x, freeze(c.params)).probabilities());
}

TEST(Checkpoint, StoresConstraintSet) {
  const ModelParameters p = ModelParameters::init(toy::small_config(3, 2, 3), 22);
  const ConstraintSet cs = parse_constraints("[force_source]\n0\n[forbid_parent]\n2 1\n", 3, 2);
  const auto path = std::filesystem::temp_directory_path() / "hcmr_ckpt_roundtrip.json";
  save_checkpoint(path, p, &cs);
  const Checkpoint c = load_checkpoint(path);
  std::filesystem::remove(path);
  ASSERT_TRUE(c.constraints().has_value());
  EXPECT_EQ(c.constraints()->digest(), cs.digest());
  EXPECT_EQ(c.constraints()->to_text(), cs.to_text());
}

TEST(Checkpoint, DigestMismatchRejected) {
  const ModelParameters p = ModelParameters::init(toy::small_config(3, 2, 3), 23);
  const ConstraintSet cs = parse_constraints("[force_source]\n0\n", 3, 2);
  auto doc = nlohmann::json::parse(checkpoint_to_json(p, &cs));
  doc["constraints"] = "[force_source]\n1\n";
  const Checkpoint c = checkpoint_from_json(doc.dump());
  EXPECT_THROW(c.constraints(), SchemaError);
}

TEST(Checkpoint, MalformedDocuments) {
  EXPECT_THROW(checkpoint_from_json("not json"), SchemaError);
  EXPECT_THROW(checkpoint_from_json("{}"), SchemaError);
  const ModelParameters p = ModelParameters::init(toy::small_config(3, 2, 3), 24);
  auto doc = nlohmann::json::parse(checkpoint_to_json(p, nullptr));
  doc["config"]["size_latent"] = 7;
  EXPECT_THROW(checkpoint_from_json(doc.dump()), SchemaError);
  EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.json"), IoError);
}
