#include "hcmr/encoder.hpp"

#include "hcmr/error.hpp"

namespace hcmr {

namespace {

ad::Matrix head_mask(int n_concepts, int size_c_emb) {
  const Eigen::Index e = size_c_emb;
  ad::Matrix m = ad::Matrix::Zero(2 * n_concepts * e, n_concepts);
  for (int j = 0; j < n_concepts; ++j) {
    m.block(j * e, j, e, 1).setOnes();
    m.block((n_concepts + j) * e, j, e, 1).setOnes();
  }
  return m;
}

}  // namespace

ad::Matrix concept_expansion(int n_concepts, int size_c_emb) {
  ad::Matrix m = ad::Matrix::Zero(n_concepts, static_cast<Eigen::Index>(n_concepts) * size_c_emb);
  for (int j = 0; j < n_concepts; ++j) m.block(j, j * size_c_emb, 1, size_c_emb).setOnes();
  return m;
}

EncoderParams EncoderParams::init(const ModelConfig& config, nn::Rng& rng) {
  EncoderParams p;
  p.n_concepts = config.n_concepts;
  p.size_c_emb = config.size_c_emb;
  std::vector<Eigen::Index> widths{config.input_dim};
  for (int h : config.backbone_hidden) widths.push_back(h);
  widths.push_back(config.size_latent);
  p.backbone = nn::Mlp(widths, nn::Activation::Relu, rng);
  const Eigen::Index emb = 2 * static_cast<Eigen::Index>(config.n_concepts) * config.size_c_emb;
  p.embed = nn::Linear(config.size_latent, emb, rng);
  const ad::Matrix mask = head_mask(config.n_concepts, config.size_c_emb);
  p.head_weight = ad::Var::parameter(
      (nn::uniform_init(emb, config.n_concepts, 2 * config.size_c_emb, rng).array() * mask.array()).matrix());
  p.head_bias = ad::Var::parameter(nn::uniform_init(1, config.n_concepts, 2 * config.size_c_emb, rng));
  return p;
}

void EncoderParams::collect(std::vector<nn::NamedParameter>& out) {
  backbone.collect("encoder", "backbone", out);
  embed.collect("encoder", "embed", out);
  out.push_back({"encoder", "head.weight", &head_weight});
  out.push_back({"encoder", "head.bias", &head_bias});
}

EncoderBatch encode_batch(const ad::Var& x, const EncoderParams& params) {
  if (x.cols() != params.input_dim()) {
    throw ShapeError("encoder input has " + std::to_string(x.cols()) + " features, expected " +
                     std::to_string(params.input_dim()));
  }
  const Eigen::Index half = static_cast<Eigen::Index>(params.n_concepts) * params.size_c_emb;
  ad::Var h = params.backbone.forward(x);
  ad::Var e = ad::leaky_relu(params.embed.forward(h));
  ad::Var w = ad::mul(params.head_weight, ad::constant(head_mask(params.n_concepts, params.size_c_emb)));
  ad::Var probs = ad::sigmoid(ad::add(ad::matmul(e, w), params.head_bias));
  return EncoderBatch{probs, ad::slice_cols(e, 0, half), ad::slice_cols(e, half, half)};
}

EncoderOutput encode(const std::vector<double>& x, const EncoderParams& params) {
  ad::Matrix row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = x[i];
  EncoderBatch b = encode_batch(ad::constant(row), params);
  EncoderOutput out;
  out.source_probs.assign(b.probs.value().data(), b.probs.value().data() + params.n_concepts);
  const int n = params.n_concepts;
  const int e = params.size_c_emb;
  out.pos_emb.resize(n, e);
  out.neg_emb.resize(n, e);
  for (int j = 0; j < n; ++j) {
    for (int d = 0; d < e; ++d) {
      out.pos_emb(j, d) = b.pos_emb.value()(0, j * e + d);
      out.neg_emb(j, d) = b.neg_emb.value()(0, j * e + d);
    }
  }
  return out;
}

std::vector<double> EncoderOutput::embedding() const {
  std::vector<double> v;
  v.reserve(static_cast<std::size_t>(pos_emb.size() + neg_emb.size()));
  for (Eigen::Index j = 0; j < pos_emb.rows(); ++j)
    for (Eigen::Index d = 0; d < pos_emb.cols(); ++d) v.push_back(pos_emb(j, d));
  for (Eigen::Index j = 0; j < neg_emb.rows(); ++j)
    for (Eigen::Index d = 0; d < neg_emb.cols(); ++d) v.push_back(neg_emb(j, d));
  return v;
}

}  // namespace hcmr
