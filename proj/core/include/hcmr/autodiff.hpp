#pragma once

// Minimal reverse-mode automatic differentiation over dense Eigen matrices.
//
// A Var is a shared handle to a graph node holding a value, an accumulated
// gradient and a backward closure. Operations build the graph eagerly;
// backward() walks it in reverse topological order from a 1x1 root. Nodes
// that do not depend on any parameter carry no closure, so evaluating a model
// on constants costs no more than plain Eigen.
//
// Elementwise binary operations broadcast an operand whose row or column
// count is 1 across the other operand's shape.

#include <Eigen/Dense>

#include <functional>
#include <memory>
#include <vector>

namespace hcmr::ad {

using Matrix = Eigen::MatrixXd;

struct Node {
  Matrix value;
  Matrix grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix& g);
};

class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  // A leaf whose gradient is tracked.
  static Var parameter(Matrix value) { return Var(std::move(value), true); }

  bool defined() const noexcept { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  // Direct mutation is for optimizers and initializers only; never touch a
  // value that already feeds a live graph.
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }
  bool requires_grad() const { return node_ && node_->requires_grad; }

  Eigen::Index rows() const { return node_->value.rows(); }
  Eigen::Index cols() const { return node_->value.cols(); }
  double scalar() const;

  const std::shared_ptr<Node>& node() const noexcept { return node_; }

 private:
  explicit Var(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  friend Var make_result(Matrix, std::vector<Var>, std::function<void(Node&)>);

  std::shared_ptr<Node> node_;
};

Var constant(Matrix value);
Var constant_scalar(double value);

// Builds an op result. The closure receives the result node; self.grad is
// populated and self.inputs mirrors `inputs`. Dropped when no input needs
// gradients.
Var make_result(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn);

// Seeds d(root)/d(root) = 1 and propagates. root must be 1x1.
void backward(const Var& root);

// Linear algebra and elementwise arithmetic.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);
Var add_scalar(const Var& a, double s);
Var one_minus(const Var& a);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }

// Activations.
Var relu(const Var& a);
Var leaky_relu(const Var& a, double slope = 0.01);
Var sigmoid(const Var& a);
// Natural log with inputs clamped below at `floor`; no gradient where clamped.
Var log(const Var& a, double floor = 1e-300);
// a^e elementwise; `exponent` broadcasts. Gradient is defined as 0 where
// a <= 0 or e == 0 so that 0^e terms multiplied by zero stay finite.
Var pow(const Var& a, const Matrix& exponent);

// Normalizations and reductions.
Var softmax_rows(const Var& a);
// Softmax over consecutive groups of `group` columns in each row.
Var softmax_groups(const Var& a, Eigen::Index group);
Var sum(const Var& a);        // -> 1x1
Var sum_cols(const Var& a);   // row sums -> rows x 1
Var prod_cols(const Var& a);  // row products -> rows x 1
Var prod_all(const Var& a);   // -> 1x1

// Structural.
Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
Var gather_cols(const Var& a, const std::vector<Eigen::Index>& columns);
Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var detach(const Var& a);

// Conjunction-of-literals evaluation in product form. For values V (B x n)
// and role indicator matrices P, N, I (K x n):
//   out[b][k] = prod_j ( P[k][j] V[b][j] + N[k][j] (1 - V[b][j]) + w I[k][j] )
// With one-hot roles and w = 1 this is the truth value of rule k; with
// w = 0.5 it is the prototypicality score.
Var literal_product(const Var& values, const Var& pos, const Var& neg, const Var& irr,
                    double irrelevant_weight);

// D[i][j] = o[j] - o[i] for a 1 x n row vector o.
Var pairwise_diff(const Var& o);

// Straight-through threshold: forward 1[a > 0], backward the derivative of
// sigmoid(a / temperature). In relaxed mode the forward value is the sigmoid
// itself, which makes finite-difference checks meaningful.
Var step_st(const Var& a, double temperature, bool relaxed);

// Forward `hard`, backward identity into `soft`. Relaxed mode returns soft.
Var straight_through(const Matrix& hard, const Var& soft, bool relaxed);

}  // namespace hcmr::ad
