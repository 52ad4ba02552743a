#include "hcmr/nn.hpp"

#include "hcmr/error.hpp"

#include <cmath>

namespace hcmr::nn {

Matrix uniform_init(Eigen::Index rows, Eigen::Index cols, Eigen::Index fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(std::max<Eigen::Index>(fan_in, 1)));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

Matrix normal_init(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  }
  return m;
}

Linear::Linear(Eigen::Index in, Eigen::Index out, Rng& rng)
    : weight(Var::parameter(uniform_init(in, out, in, rng))),
      bias(Var::parameter(uniform_init(1, out, in, rng))) {}

Var Linear::forward(const Var& x) const {
  if (x.cols() != weight.rows()) {
    throw ShapeError("Linear: input has " + std::to_string(x.cols()) + " features, expected " +
                     std::to_string(weight.rows()));
  }
  return ad::add(ad::matmul(x, weight), bias);
}

void Linear::collect(const std::string& group, const std::string& prefix,
                     std::vector<NamedParameter>& out) {
  out.push_back({group, prefix + ".weight", &weight});
  out.push_back({group, prefix + ".bias", &bias});
}

Var activate(const Var& x, Activation act) {
  switch (act) {
    case Activation::Relu:
      return ad::relu(x);
    case Activation::LeakyRelu:
      return ad::leaky_relu(x);
  }
  return x;
}

Mlp::Mlp(const std::vector<Eigen::Index>& widths, Activation act, Rng& rng) : activation(act) {
  if (widths.size() < 2) throw ArgumentError("Mlp needs at least input and output widths");
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.emplace_back(widths[i], widths[i + 1], rng);
  }
}

Var Mlp::forward(const Var& x) const {
  Var h = x;
  for (const auto& layer : layers) h = activate(layer.forward(h), activation);
  return h;
}

void Mlp::collect(const std::string& group, const std::string& prefix,
                  std::vector<NamedParameter>& out) {
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers[i].collect(group, prefix + "." + std::to_string(i), out);
  }
}

AdamW::AdamW(std::vector<Var*> params, AdamWOptions options) : options_(options) {
  slots_.reserve(params.size());
  for (Var* p : params) {
    Slot s;
    s.param = p;
    s.m = Matrix::Zero(p->rows(), p->cols());
    s.v = Matrix::Zero(p->rows(), p->cols());
    slots_.push_back(std::move(s));
  }
}

void AdamW::zero_grad() {
  for (auto& s : slots_) s.param->zero_grad();
}

void AdamW::step() {
  const auto& o = options_;
  for (auto& s : slots_) {
    if (!s.param->has_grad()) continue;
    const Matrix& g = s.param->grad();
    ++s.t;
    s.m = o.beta1 * s.m + (1.0 - o.beta1) * g;
    s.v = o.beta2 * s.v + (1.0 - o.beta2) * g.cwiseProduct(g);
    const double bc1 = 1.0 - std::pow(o.beta1, static_cast<double>(s.t));
    const double bc2 = 1.0 - std::pow(o.beta2, static_cast<double>(s.t));
    Matrix& w = s.param->mutable_value();
    w *= (1.0 - o.lr * o.weight_decay);
    w.array() -= o.lr * (s.m.array() / bc1) / ((s.v.array() / bc2).sqrt() + o.eps);
  }
}

}  // namespace hcmr::nn
