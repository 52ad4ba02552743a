#include "hcmr/autodiff.hpp"

#include "hcmr/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>

namespace hcmr::ad {

namespace {

std::string shape_str(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

bool broadcastable(Eigen::Index from, Eigen::Index to) { return from == to || from == 1; }

// Resulting extent of a broadcast pair along one axis.
Eigen::Index joint_extent(Eigen::Index a, Eigen::Index b, const char* op, const Matrix& ma,
                          const Matrix& mb) {
  if (a == b) return a;
  if (a == 1) return b;
  if (b == 1) return a;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(ma) + " and " +
                   shape_str(mb));
}

Matrix expand(const Matrix& m, Eigen::Index rows, Eigen::Index cols) {
  if (m.rows() == rows && m.cols() == cols) return m;
  return m.replicate(rows / m.rows(), cols / m.cols());
}

// Sums a broadcast gradient back down to the operand shape.
Matrix reduce_to(const Matrix& g, Eigen::Index rows, Eigen::Index cols) {
  if (g.rows() == rows && g.cols() == cols) return g;
  Matrix out = g;
  if (rows == 1 && out.rows() != 1) out = out.colwise().sum().eval();
  if (cols == 1 && out.cols() != 1) out = out.rowwise().sum().eval();
  return out;
}

Var unary(const Var& a, Matrix value, std::function<Matrix(const Matrix& grad)> local) {
  return make_result(std::move(value), {a}, [local = std::move(local)](Node& self) {
    self.inputs[0]->accumulate(local(self.grad));
  });
}

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (!requires_grad) return;
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

double Var::scalar() const {
  if (rows() != 1 || cols() != 1) throw ShapeError("scalar() on " + shape_str(value()));
  return value()(0, 0);
}

Var constant(Matrix value) { return Var(std::move(value), false); }

Var constant_scalar(double value) { return Var(Matrix::Constant(1, 1, value), false); }

Var make_result(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  const bool needs =
      std::any_of(inputs.begin(), inputs.end(), [](const Var& v) { return v.requires_grad(); });
  if (needs) {
    node->requires_grad = true;
    node->inputs.reserve(inputs.size());
    for (auto& v : inputs) node->inputs.push_back(v.node());
    node->backward_fn = std::move(backward_fn);
  }
  return Var(std::move(node));
}

void backward(const Var& root) {
  if (!root.defined()) throw ArgumentError("backward on undefined Var");
  if (root.rows() != 1 || root.cols() != 1) {
    throw ShapeError("backward requires a 1x1 root, got " + shape_str(root.value()));
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS; reversing it gives a valid reverse-mode order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (child->requires_grad && visited.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.size() != 0) node->backward_fn(*node);
  }
  // Interior gradients are not needed after the sweep; parameters keep theirs.
  for (Node* node : order) {
    if (node->backward_fn) node->grad.resize(0, 0);
  }
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + shape_str(a.value()) + " * " + shape_str(b.value()));
  }
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [](Node& self) {
    const Matrix& av = self.inputs[0]->value;
    const Matrix& bv = self.inputs[1]->value;
    if (self.inputs[0]->requires_grad) self.inputs[0]->accumulate(self.grad * bv.transpose());
    if (self.inputs[1]->requires_grad) self.inputs[1]->accumulate(av.transpose() * self.grad);
  });
}

Var add(const Var& a, const Var& b) {
  const auto r = joint_extent(a.rows(), b.rows(), "add", a.value(), b.value());
  const auto c = joint_extent(a.cols(), b.cols(), "add", a.value(), b.value());
  Matrix out = expand(a.value(), r, c) + expand(b.value(), r, c);
  return make_result(std::move(out), {a, b}, [](Node& self) {
    for (auto& in : self.inputs) {
      if (in->requires_grad) in->accumulate(reduce_to(self.grad, in->value.rows(), in->value.cols()));
    }
  });
}

Var sub(const Var& a, const Var& b) {
  const auto r = joint_extent(a.rows(), b.rows(), "sub", a.value(), b.value());
  const auto c = joint_extent(a.cols(), b.cols(), "sub", a.value(), b.value());
  Matrix out = expand(a.value(), r, c) - expand(b.value(), r, c);
  return make_result(std::move(out), {a, b}, [](Node& self) {
    auto& x = self.inputs[0];
    auto& y = self.inputs[1];
    if (x->requires_grad) x->accumulate(reduce_to(self.grad, x->value.rows(), x->value.cols()));
    if (y->requires_grad) y->accumulate(-reduce_to(self.grad, y->value.rows(), y->value.cols()));
  });
}

Var mul(const Var& a, const Var& b) {
  const auto r = joint_extent(a.rows(), b.rows(), "mul", a.value(), b.value());
  const auto c = joint_extent(a.cols(), b.cols(), "mul", a.value(), b.value());
  Matrix out = expand(a.value(), r, c).cwiseProduct(expand(b.value(), r, c));
  return make_result(std::move(out), {a, b}, [r, c](Node& self) {
    auto& x = self.inputs[0];
    auto& y = self.inputs[1];
    if (x->requires_grad) {
      Matrix g = self.grad.cwiseProduct(expand(y->value, r, c));
      x->accumulate(reduce_to(g, x->value.rows(), x->value.cols()));
    }
    if (y->requires_grad) {
      Matrix g = self.grad.cwiseProduct(expand(x->value, r, c));
      y->accumulate(reduce_to(g, y->value.rows(), y->value.cols()));
    }
  });
}

Var scale(const Var& a, double s) {
  return unary(a, a.value() * s, [s](const Matrix& g) { return Matrix(g * s); });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, (a.value().array() + s).matrix(), [](const Matrix& g) { return g; });
}

Var one_minus(const Var& a) {
  return unary(a, (1.0 - a.value().array()).matrix(), [](const Matrix& g) { return Matrix(-g); });
}

Var relu(const Var& a) {
  Matrix out = a.value().cwiseMax(0.0);
  Matrix mask = (a.value().array() > 0.0).cast<double>().matrix();
  return unary(a, std::move(out),
               [mask = std::move(mask)](const Matrix& g) { return Matrix(g.cwiseProduct(mask)); });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix slopes = (a.value().array() > 0.0).select(Matrix::Ones(a.rows(), a.cols()),
                                                   Matrix::Constant(a.rows(), a.cols(), slope));
  Matrix out = a.value().cwiseProduct(slopes);
  return unary(a, std::move(out), [slopes = std::move(slopes)](const Matrix& g) {
    return Matrix(g.cwiseProduct(slopes));
  });
}

Var sigmoid(const Var& a) {
  Matrix out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  Matrix deriv = out.array() * (1.0 - out.array());
  return unary(a, std::move(out), [deriv = std::move(deriv)](const Matrix& g) {
    return Matrix(g.cwiseProduct(deriv));
  });
}

Var log(const Var& a, double floor) {
  const Matrix& x = a.value();
  Matrix out = x.cwiseMax(floor).array().log().matrix();
  Matrix deriv = (x.array() > floor).select(x.array().inverse(), 0.0).matrix();
  return unary(a, std::move(out), [deriv = std::move(deriv)](const Matrix& g) {
    return Matrix(g.cwiseProduct(deriv));
  });
}

Var pow(const Var& a, const Matrix& exponent) {
  const Matrix& x = a.value();
  if (!broadcastable(exponent.rows(), x.rows()) || !broadcastable(exponent.cols(), x.cols())) {
    throw ShapeError("pow: exponent " + shape_str(exponent) + " vs base " + shape_str(x));
  }
  Matrix e = expand(exponent, x.rows(), x.cols());
  Matrix out(x.rows(), x.cols());
  Matrix deriv(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double base = x(r, c);
      const double ex = e(r, c);
      out(r, c) = ex == 0.0 ? 1.0 : std::pow(base, ex);
      deriv(r, c) = (ex == 0.0 || base <= 0.0) ? 0.0 : ex * std::pow(base, ex - 1.0);
    }
  }
  return unary(a, std::move(out), [deriv = std::move(deriv)](const Matrix& g) {
    return Matrix(g.cwiseProduct(deriv));
  });
}

namespace {

// Softmax in place over [c0, c0 + width) of each row.
void softmax_block(Matrix& m, Eigen::Index c0, Eigen::Index width) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto seg = m.row(r).segment(c0, width);
    const double mx = seg.maxCoeff();
    seg = (seg.array() - mx).exp().matrix();
    seg /= seg.sum();
  }
}

Matrix softmax_block_backward(const Matrix& y, const Matrix& g, Eigen::Index group) {
  Matrix out(y.rows(), y.cols());
  for (Eigen::Index r = 0; r < y.rows(); ++r) {
    for (Eigen::Index c0 = 0; c0 < y.cols(); c0 += group) {
      auto ys = y.row(r).segment(c0, group);
      auto gs = g.row(r).segment(c0, group);
      const double dot = ys.dot(gs);
      out.row(r).segment(c0, group) = ys.cwiseProduct((gs.array() - dot).matrix());
    }
  }
  return out;
}

}  // namespace

Var softmax_groups(const Var& a, Eigen::Index group) {
  if (group <= 0 || a.cols() % group != 0) {
    throw ShapeError("softmax_groups: " + std::to_string(a.cols()) + " columns not divisible by " +
                     std::to_string(group));
  }
  Matrix out = a.value();
  for (Eigen::Index c0 = 0; c0 < out.cols(); c0 += group) softmax_block(out, c0, group);
  return make_result(out, {a}, [group](Node& self) {
    self.inputs[0]->accumulate(softmax_block_backward(self.value, self.grad, group));
  });
}

Var softmax_rows(const Var& a) { return softmax_groups(a, a.cols()); }

Var sum(const Var& a) {
  const auto r = a.rows();
  const auto c = a.cols();
  return unary(a, Matrix::Constant(1, 1, a.value().sum()),
               [r, c](const Matrix& g) { return Matrix(Matrix::Constant(r, c, g(0, 0))); });
}

Var sum_cols(const Var& a) {
  const auto c = a.cols();
  return unary(a, a.value().rowwise().sum(),
               [c](const Matrix& g) { return Matrix(g.replicate(1, c)); });
}

namespace {

// Gradient of a product of `xs` w.r.t. each factor, exact when factors are 0.
template <typename Row>
void product_partials(const Row& xs, double upstream, Eigen::Ref<Eigen::RowVectorXd> out) {
  const Eigen::Index n = xs.size();
  double prefix = 1.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    out(j) = prefix;
    prefix *= xs(j);
  }
  double suffix = 1.0;
  for (Eigen::Index j = n - 1; j >= 0; --j) {
    out(j) *= suffix * upstream;
    suffix *= xs(j);
  }
}

}  // namespace

Var prod_cols(const Var& a) {
  Matrix out = a.value().rowwise().prod();
  return make_result(std::move(out), {a}, [](Node& self) {
    const Matrix& x = self.inputs[0]->value;
    Matrix g(x.rows(), x.cols());
    Eigen::RowVectorXd tmp(x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      product_partials(x.row(r), self.grad(r, 0), tmp);
      g.row(r) = tmp;
    }
    self.inputs[0]->accumulate(g);
  });
}

Var prod_all(const Var& a) {
  Matrix out = Matrix::Constant(1, 1, a.value().prod());
  return make_result(std::move(out), {a}, [](Node& self) {
    const Matrix& x = self.inputs[0]->value;
    Eigen::Map<const Eigen::RowVectorXd> flat(x.data(), x.size());
    Eigen::RowVectorXd partial(x.size());
    product_partials(flat, self.grad(0, 0), partial);
    self.inputs[0]->accumulate(Eigen::Map<const Matrix>(partial.data(), x.rows(), x.cols()));
  });
}

Var slice_rows(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ShapeError("slice_rows out of range on " + shape_str(a.value()));
  }
  const auto r = a.rows();
  const auto c = a.cols();
  return unary(a, a.value().middleRows(start, count), [=](const Matrix& g) {
    Matrix full = Matrix::Zero(r, c);
    full.middleRows(start, count) = g;
    return full;
  });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols out of range on " + shape_str(a.value()));
  }
  const auto r = a.rows();
  const auto c = a.cols();
  return unary(a, a.value().middleCols(start, count), [=](const Matrix& g) {
    Matrix full = Matrix::Zero(r, c);
    full.middleCols(start, count) = g;
    return full;
  });
}

Var gather_cols(const Var& a, const std::vector<Eigen::Index>& columns) {
  Matrix out(a.rows(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    if (columns[k] < 0 || columns[k] >= a.cols()) throw ShapeError("gather_cols index out of range");
    out.col(static_cast<Eigen::Index>(k)) = a.value().col(columns[k]);
  }
  const auto r = a.rows();
  const auto c = a.cols();
  return unary(a, std::move(out), [=](const Matrix& g) {
    Matrix full = Matrix::Zero(r, c);
    for (std::size_t k = 0; k < columns.size(); ++k) {
      full.col(columns[k]) += g.col(static_cast<Eigen::Index>(k));
    }
    return full;
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols of nothing");
  const auto r = parts.front().rows();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != r) throw ShapeError("concat_cols: row mismatch");
    total += p.cols();
  }
  Matrix out(r, total);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleCols(off, p.cols()) = p.value();
    off += p.cols();
  }
  return make_result(std::move(out), parts, [](Node& self) {
    Eigen::Index o = 0;
    for (auto& in : self.inputs) {
      const auto w = in->value.cols();
      if (in->requires_grad) in->accumulate(self.grad.middleCols(o, w));
      o += w;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows of nothing");
  const auto c = parts.front().cols();
  Eigen::Index total = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw ShapeError("concat_rows: column mismatch");
    total += p.rows();
  }
  Matrix out(total, c);
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    out.middleRows(off, p.rows()) = p.value();
    off += p.rows();
  }
  return make_result(std::move(out), parts, [](Node& self) {
    Eigen::Index o = 0;
    for (auto& in : self.inputs) {
      const auto h = in->value.rows();
      if (in->requires_grad) in->accumulate(self.grad.middleRows(o, h));
      o += h;
    }
  });
}

Var detach(const Var& a) { return constant(a.value()); }

Var literal_product(const Var& values, const Var& pos, const Var& neg, const Var& irr,
                    double irrelevant_weight) {
  const Eigen::Index batch = values.rows();
  const Eigen::Index n = values.cols();
  const Eigen::Index k_rules = pos.rows();
  for (const Var* m : {&pos, &neg, &irr}) {
    if (m->rows() != k_rules || m->cols() != n) {
      throw ShapeError("literal_product: role matrix " + shape_str(m->value()) + " vs values " +
                       shape_str(values.value()));
    }
  }
  const Matrix& v = values.value();
  const Matrix& p = pos.value();
  const Matrix& q = neg.value();
  const Matrix& w = irr.value();
  const double iw = irrelevant_weight;

  Matrix out(batch, k_rules);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index k = 0; k < k_rules; ++k) {
      double prod = 1.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        prod *= p(k, j) * v(b, j) + q(k, j) * (1.0 - v(b, j)) + iw * w(k, j);
      }
      out(b, k) = prod;
    }
  }

  return make_result(std::move(out), {values, pos, neg, irr}, [batch, n, k_rules, iw](Node& self) {
    const Matrix& v = self.inputs[0]->value;
    const Matrix& p = self.inputs[1]->value;
    const Matrix& q = self.inputs[2]->value;
    const Matrix& w = self.inputs[3]->value;
    Matrix gv = Matrix::Zero(batch, n);
    Matrix gp = Matrix::Zero(k_rules, n);
    Matrix gq = Matrix::Zero(k_rules, n);
    Matrix gw = Matrix::Zero(k_rules, n);
    Eigen::RowVectorXd factors(n);
    Eigen::RowVectorXd partial(n);
    for (Eigen::Index b = 0; b < batch; ++b) {
      for (Eigen::Index k = 0; k < k_rules; ++k) {
        const double up = self.grad(b, k);
        if (up == 0.0) continue;
        for (Eigen::Index j = 0; j < n; ++j) {
          factors(j) = p(k, j) * v(b, j) + q(k, j) * (1.0 - v(b, j)) + iw * w(k, j);
        }
        product_partials(factors, up, partial);
        for (Eigen::Index j = 0; j < n; ++j) {
          const double d = partial(j);
          gv(b, j) += d * (p(k, j) - q(k, j));
          gp(k, j) += d * v(b, j);
          gq(k, j) += d * (1.0 - v(b, j));
          gw(k, j) += d * iw;
        }
      }
    }
    self.inputs[0]->accumulate(gv);
    self.inputs[1]->accumulate(gp);
    self.inputs[2]->accumulate(gq);
    self.inputs[3]->accumulate(gw);
  });
}

Var pairwise_diff(const Var& o) {
  if (o.rows() != 1) throw ShapeError("pairwise_diff expects a row vector");
  const Eigen::Index n = o.cols();
  Matrix out(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) out(i, j) = o.value()(0, j) - o.value()(0, i);
  }
  return unary(o, std::move(out), [n](const Matrix& g) {
    // d D_ij / d o_j = +1, d D_ij / d o_i = -1
    Matrix go(1, n);
    for (Eigen::Index m = 0; m < n; ++m) go(0, m) = g.col(m).sum() - g.row(m).sum();
    return go;
  });
}

Var step_st(const Var& a, double temperature, bool relaxed) {
  if (!(temperature > 0.0)) throw ArgumentError("step_st: temperature must be positive");
  Matrix soft = (1.0 / (1.0 + (-a.value().array() / temperature).exp())).matrix();
  Matrix deriv = (soft.array() * (1.0 - soft.array()) / temperature).matrix();
  Matrix out = relaxed ? soft : Matrix((a.value().array() > 0.0).cast<double>().matrix());
  return unary(a, std::move(out), [deriv = std::move(deriv)](const Matrix& g) {
    return Matrix(g.cwiseProduct(deriv));
  });
}

Var straight_through(const Matrix& hard, const Var& soft, bool relaxed) {
  if (relaxed) return soft;
  if (hard.rows() != soft.rows() || hard.cols() != soft.cols()) {
    throw ShapeError("straight_through: " + shape_str(hard) + " vs " + shape_str(soft.value()));
  }
  return unary(soft, hard, [](const Matrix& g) { return g; });
}

}  // namespace hcmr::ad
