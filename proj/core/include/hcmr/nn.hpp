#pragma once

#include "hcmr/autodiff.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace hcmr::nn {

using ad::Matrix;
using ad::Var;
using Rng = std::mt19937_64;

// A named trainable tensor. Groups mirror the model's components and are the
// unit for freezing and for the gradient checks.
struct NamedParameter {
  std::string group;
  std::string name;
  Var* var;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialization.
Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng);
Matrix normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

struct Linear {
  Var weight;  // in x out
  Var bias;    // 1 x out

  Linear() = default;
  Linear(Eigen::Index in, Eigen::Index out, Rng& rng);

  Var forward(const Var& x) const;
  Eigen::Index in_features() const { return weight.rows(); }
  Eigen::Index out_features() const { return weight.cols(); }
  void collect(const std::string& group, const std::string& prefix,
               std::vector<NamedParameter>& out);
};

enum class Activation { Relu, LeakyRelu };

Var activate(const Var& x, Activation act);

// Stack of Linear layers, each followed by the activation.
struct Mlp {
  std::vector<Linear> layers;
  Activation activation = Activation::Relu;

  Mlp() = default;
  Mlp(const std::vector<Eigen::Index>& widths, Activation act, Rng& rng);

  Var forward(const Var& x) const;
  void collect(const std::string& group, const std::string& prefix,
               std::vector<NamedParameter>& out);
};

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

// Adam with decoupled weight decay. Parameters without a gradient in a step
// are left untouched (their moments are not advanced either).
class AdamW {
 public:
  AdamW(std::vector<Var*> params, AdamWOptions options);

  void step();
  void zero_grad();
  const AdamWOptions& options() const { return options_; }

 private:
  struct Slot {
    Var* param;
    Matrix m;
    Matrix v;
    std::int64_t t = 0;
  };
  std::vector<Slot> slots_;
  AdamWOptions options_;
};

}  // namespace hcmr::nn
