#pragma once

// Concept-annotated datasets: the noisy-XOR generator with its exact Bayes
// oracle, a symbolic digit-addition generator and CSV input/output.

#include "hcmr/autodiff.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace hcmr {

struct Dataset {
  ad::Matrix inputs;    // N x input_dim
  ad::Matrix labels;    // N x n_C, 0/1 (0 where unobserved)
  ad::Matrix observed;  // N x n_C, 0/1

  Eigen::Index size() const { return inputs.rows(); }
  int input_dim() const { return static_cast<int>(inputs.cols()); }
  int n_concepts() const { return static_cast<int>(labels.cols()); }

  Dataset rows(const std::vector<Eigen::Index>& idx) const;
  Dataset head(Eigen::Index n) const;
  Dataset tail_from(Eigen::Index start) const;
  // Marks the listed concept columns unobserved (labels zeroed).
  Dataset hide(const std::vector<int>& concepts) const;
  void validate() const;

  bool operator==(const Dataset& o) const {
    return inputs == o.inputs && labels == o.labels && observed == o.observed;
  }
};

using TrainingBatch = Dataset;

struct SyntheticXorSpec {
  int n_examples = 1000;
  double p_digit = 0.7;   // p(C0 = 1 | bit = 1), same for C1
  double p_flip = 0.05;   // p(a xor' b = 1) when a == b
  double noise = 0.1;     // Gaussian std of the input features
  int features_per_bit = 2;
};

inline constexpr int kXorConcepts = 7;

// Parents of each noisy-XOR concept (sources have none).
const std::array<std::array<int, 2>, kXorConcepts>& xor_structure();

Dataset gen_synthetic_xor(const SyntheticXorSpec& spec, std::uint64_t seed);

struct XorBayesOracle {
  // p(C_i = 1 | parents) for non-sources, indexed [i][2 * a + b] with (a, b)
  // the parent values in xor_structure() order.
  std::array<std::array<double, 4>, kXorConcepts> conditional{};
  // p(C_i = 1 | latent bits), indexed [i][2 * bit0 + bit1].
  std::array<std::array<double, 4>, kXorConcepts> marginal_given_bits{};
  // Bayes-optimal accuracy of each concept given the input (noise-free bits).
  std::array<double, kXorConcepts> accuracy_given_x{};
  // Bayes-optimal accuracy of each concept given the input and C0, C1.
  std::array<double, kXorConcepts> accuracy_given_x_and_sources{};
  // Accuracy of C_i given perfect parent values.
  std::array<double, kXorConcepts> accuracy_given_parents{};

  double mean_accuracy_given_x() const;
};

// Exact enumeration of the generative process. Input noise is treated as
// negligible, so x reveals the two latent bits.
XorBayesOracle xor_bayes_oracle(const SyntheticXorSpec& spec);

struct SymbolicAdditionSpec {
  int n_examples = 1000;
  double noise = 0.1;
};

// 20 digit concepts (first digit 0-9, second digit 0-9) then 19 sum concepts
// (sums 0-18). Inputs are the two noisy one-hot digit encodings.
Dataset gen_symbolic_addition(const SymbolicAdditionSpec& spec, std::uint64_t seed);
inline constexpr int kAdditionConcepts = 39;

// Header x_0..x_{d-1},c_0..c_{n-1}; concept cells 0, 1 or ? (unobserved).
Dataset load_csv(const std::filesystem::path& path);
Dataset parse_csv(std::string_view text);
std::string to_csv(const Dataset& data);
void save_csv(const std::filesystem::path& path, const Dataset& data);

}  // namespace hcmr
