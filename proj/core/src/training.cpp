#include "hcmr/training.hpp"

#include "hcmr/error.hpp"
#include "hcmr/inference.hpp"
#include "hcmr/rule_io.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

namespace hcmr {

namespace {

ad::Matrix hard_of(const ad::Matrix& p) { return (p.array() > 0.5).cast<double>().matrix(); }

}  // namespace

LikelihoodResult training_likelihood(const TrainingBatch& batch, const ModelParameters& params,
                                     const ConstraintSet* constraints, nn::Rng& rng,
                                     const LikelihoodOptions& options) {
  const ModelConfig& cfg = params.config;
  const int n = cfg.n_concepts;
  if (batch.n_concepts() != n) throw ShapeError("batch has " + std::to_string(batch.n_concepts()) + " concepts");
  if (batch.inputs.rows() != batch.labels.rows() || batch.observed.rows() != batch.labels.rows()) {
    throw ShapeError("batch matrices disagree in row count");
  }

  LikelihoodResult result;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < batch.size(); ++r) {
    if (batch.observed.row(r).sum() > 0.0) keep.push_back(r);
  }
  result.used_examples = static_cast<int>(keep.size());
  result.skipped_examples = static_cast<int>(batch.size()) - result.used_examples;
  if (result.skipped_examples > 0) {
    std::clog << "warning: skipping " << result.skipped_examples << " example(s) without observed labels\n";
  }
  if (keep.empty()) {
    result.loss = ad::constant_scalar(0.0);
    return result;
  }
  const Dataset b = result.skipped_examples > 0 ? batch.rows(keep) : batch;
  result.observed_terms = static_cast<std::int64_t>(b.observed.sum());
  const bool relaxed = options.mode == GradientMode::Relaxed;

  const EncoderBatch enc = encode_batch(ad::constant(b.inputs), params.encoder);
  const RoleVars adjusted = adjust_role_vars(decode_role_vars(params.memory), params.memory.priorities, constraints,
                                             cfg.st_temperature, options.mode);

  std::vector<bool> pinned(static_cast<std::size_t>(n), false);
  if (constraints) {
    for (int i = 0; i < n; ++i) pinned[static_cast<std::size_t>(i)] = constraints->pinned(i);
  }

  // Placeholder values for concepts not yet visited: the label where
  // observed, the thresholded encoder prediction otherwise. Only slots with a
  // non-Irrelevant role read them, and those are always visited first.
  const ad::Matrix placeholder =
      (b.observed.array() * b.labels.array() +
       (1.0 - b.observed.array()) * hard_of(enc.probs.value()).array()).matrix();

  const int samples = std::max(1, cfg.mc_samples);
  std::vector<ad::Var> total(static_cast<std::size_t>(n));
  for (int s = 0; s < samples; ++s) {
    const SampledRoles sample = sample_role_vars(adjusted, rng, options.mode);
    const ConceptGraph graph = derive_graph(sample.rules);

    std::vector<ad::Var> cols(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) cols[static_cast<std::size_t>(j)] = ad::constant(placeholder.col(j));

    for (int i : graph.topo_order) {
      const auto iu = static_cast<std::size_t>(i);
      const ad::Var values = ad::concat_cols(cols);
      const RoleVars rules_i = sample.onehot.rules_of(i);
      const ad::Var src = ad::prod_all(rules_i.irr);
      const ad::Var p_enc = ad::slice_cols(enc.probs, i, 1);
      const ad::Var lits = ad::literal_product(values, rules_i.pos, rules_i.neg, rules_i.irr, 1.0);
      const ad::Matrix y_m = b.labels.col(i);
      const ad::Var y = ad::constant(y_m);

      ad::Var dec_plain;
      ad::Var dec_reg;
      if (pinned[iu]) {
        dec_plain = ad::one_minus(ad::prod_cols(ad::one_minus(lits)));
        dec_reg = dec_plain;
      } else {
        const ad::Var sel = select_rules_batch(i, enc, values, parent_mask_row(sample.rules, i), params.selector);
        const ad::Var weighted = ad::mul(sel, lits);
        dec_plain = ad::sum_cols(weighted);
        if (cfg.beta > 0.0) {
          const ad::Var proto = ad::literal_product(values, rules_i.pos, rules_i.neg, rules_i.irr, 0.5);
          dec_reg = ad::sum_cols(ad::mul(weighted, ad::pow(proto, cfg.beta * y_m)));
        } else {
          dec_reg = dec_plain;
        }
      }

      const ad::Var not_src = ad::one_minus(src);
      const ad::Var lik1 = ad::add(ad::mul(src, p_enc), ad::mul(not_src, dec_reg));
      const ad::Var lik0 = ad::add(ad::mul(src, ad::one_minus(p_enc)), ad::mul(not_src, ad::one_minus(dec_plain)));
      const ad::Var lik = ad::add(ad::mul(y, lik1), ad::mul(ad::one_minus(y), lik0));
      total[iu] = total[iu].defined() ? ad::add(total[iu], lik) : lik;

      const ad::Matrix obs = b.observed.col(i);
      if (obs.minCoeff() < 1.0) {
        const ad::Var pred = ad::add(ad::mul(src, p_enc), ad::mul(not_src, dec_plain));
        const ad::Var hard = ad::straight_through(hard_of(pred.value()), pred, relaxed);
        cols[iu] = ad::add(ad::constant((obs.array() * y_m.array()).matrix()),
                           ad::mul(ad::constant((1.0 - obs.array()).matrix()), hard));
      } else {
        cols[iu] = y;
      }
    }
  }

  ad::Var loss;
  for (int i = 0; i < n; ++i) {
    ad::Var mean = samples > 1 ? ad::scale(total[static_cast<std::size_t>(i)], 1.0 / samples)
                               : total[static_cast<std::size_t>(i)];
    if (options.label_noise > 0.0) {
      mean = ad::add_scalar(ad::scale(mean, 1.0 - 2.0 * options.label_noise), options.label_noise);
    }
    const ad::Var term = ad::sum(ad::mul(ad::log(mean, options.log_floor), ad::constant(b.observed.col(i))));
    loss = loss.defined() ? ad::add(loss, term) : term;
  }
  result.loss = ad::scale(loss, -1.0);
  return result;
}

double concept_accuracy(const ad::Matrix& predicted_values, const Dataset& data) {
  const double total = data.observed.sum();
  if (total == 0.0) return std::numeric_limits<double>::quiet_NaN();
  const auto correct = ((predicted_values.array() == data.labels.array()).cast<double>() * data.observed.array()).sum();
  return correct / total;
}

double evaluate_accuracy(const FrozenModel& model, const Dataset& data) {
  return concept_accuracy(infer_map_batch(data.inputs, model).values, data);
}

namespace {

std::vector<ad::Var*> trainable(std::vector<nn::NamedParameter>& named, const std::vector<std::string>& frozen) {
  std::vector<ad::Var*> out;
  for (auto& p : named) {
    if (std::find(frozen.begin(), frozen.end(), p.group) == frozen.end()) out.push_back(p.var);
  }
  return out;
}

void zero_all(std::vector<nn::NamedParameter>& named) {
  for (auto& p : named) p.var->zero_grad();
}

std::vector<std::vector<Eigen::Index>> make_batches(Eigen::Index n, int batch_size, nn::Rng& rng) {
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<std::vector<Eigen::Index>> out;
  for (std::size_t s = 0; s < perm.size(); s += static_cast<std::size_t>(batch_size)) {
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(s),
                     perm.begin() + static_cast<std::ptrdiff_t>(std::min(perm.size(), s + batch_size)));
  }
  return out;
}

constexpr std::uint64_t kSampleStream = 0x9E3779B97F4A7C15ULL;

}  // namespace

TrainResult train(const Dataset& train_set, const Dataset& val_set, const ModelConfig& model_config,
                  const TrainConfig& train_config, const ConstraintSet* constraints, const EpochCallback& on_epoch) {
  return train_from(ModelParameters::init(model_config, train_config.seed), train_set, val_set, train_config,
                    constraints, on_epoch);
}

TrainResult train_from(ModelParameters params, const Dataset& train_set, const Dataset& val_set,
                       const TrainConfig& train_config, const ConstraintSet* constraints,
                       const EpochCallback& on_epoch) {
  train_config.validate();
  params.config.validate();
  if (train_set.size() == 0) throw ArgumentError("training set is empty");
  if (train_set.n_concepts() != params.config.n_concepts || train_set.input_dim() != params.config.input_dim) {
    throw ShapeError("training set shape does not match the model configuration");
  }
  if (constraints && (constraints->n_concepts() != params.config.n_concepts ||
                      constraints->n_rules() != params.config.n_rules)) {
    throw ShapeError("constraint set dimensions do not match the model configuration");
  }

  nn::Rng shuffle_rng(train_config.seed);
  nn::Rng sample_rng(train_config.seed ^ kSampleStream);
  auto named = params.parameters();
  nn::AdamW opt(trainable(named, train_config.frozen_groups),
                nn::AdamWOptions{train_config.lr, 0.9, 0.999, 1e-8, train_config.weight_decay});

  TrainResult result;
  result.best = params.clone();
  result.best_val_accuracy = -1.0;
  ModelParameters last_good = params.clone();
  const bool have_val = val_set.size() > 0;
  LikelihoodOptions options;
  if (train_config.relaxed_gradients) options.mode = GradientMode::Relaxed;
  options.label_noise = train_config.label_noise;

  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::int64_t used = 0;
    for (const auto& idx : make_batches(train_set.size(), train_config.batch_size, shuffle_rng)) {
      const Dataset batch = train_set.rows(idx);
      LikelihoodResult lr = training_likelihood(batch, params, constraints, sample_rng, options);
      const double value = lr.loss.scalar();
      if (!std::isfinite(value)) {
        result.diverged = true;
        break;
      }
      zero_all(named);
      ad::backward(lr.loss);
      opt.step();
      if (!params.all_finite()) {
        result.diverged = true;
        break;
      }
      loss_sum += value;
      used += lr.used_examples;
    }
    if (result.diverged) {
      std::clog << "warning: non-finite loss or parameters in epoch " << epoch
                << "; returning the last finite checkpoint\n";
      break;
    }

    HistoryRow row;
    row.epoch = epoch;
    row.loss = used > 0 ? loss_sum / static_cast<double>(used) : 0.0;
    row.val_accuracy = std::numeric_limits<double>::quiet_NaN();
    const bool validate = epoch % train_config.validate_every == 0 || epoch == train_config.epochs;
    if (validate) {
      const Dataset& eval_set = have_val ? val_set : train_set;
      row.val_accuracy = evaluate_accuracy(freeze(params, constraints), eval_set);
      if (row.val_accuracy > result.best_val_accuracy) {
        result.best_val_accuracy = row.val_accuracy;
        result.best_epoch = epoch;
        result.best = params.clone();
      }
    }
    last_good = params.clone();
    result.history.push_back(row);
    if (on_epoch) on_epoch(row);
  }
  if (result.best_val_accuracy < 0.0) {
    result.best = std::move(last_good);
    result.best_val_accuracy = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

std::string history_csv(const std::vector<HistoryRow>& history) {
  std::ostringstream os;
  os << "epoch,loss,val_accuracy\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << format_double(r.loss) << ',';
    if (std::isnan(r.val_accuracy)) os << "nan";
    else os << format_double(r.val_accuracy);
    os << '\n';
  }
  return os.str();
}

BaselineParams BaselineParams::init(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  nn::Rng rng(seed);
  BaselineParams p;
  std::vector<Eigen::Index> widths{config.input_dim};
  for (int h : config.backbone_hidden) widths.push_back(h);
  widths.push_back(config.size_latent);
  p.backbone = nn::Mlp(widths, nn::Activation::Relu, rng);
  p.head = nn::Linear(config.size_latent, config.n_concepts, rng);
  return p;
}

std::vector<nn::NamedParameter> BaselineParams::parameters() {
  std::vector<nn::NamedParameter> out;
  backbone.collect("encoder", "backbone", out);
  head.collect("encoder", "head", out);
  return out;
}

BaselineParams BaselineParams::clone() const {
  BaselineParams c = *this;
  for (auto& p : c.parameters()) *p.var = ad::Var::parameter(p.var->value());
  return c;
}

ad::Matrix BaselineModel::predict_proba(const ad::Matrix& x) const {
  BaselineParams frozen = params;
  for (auto& p : frozen.parameters()) *p.var = ad::constant(p.var->value());
  return ad::sigmoid(frozen.head.forward(frozen.backbone.forward(ad::constant(x)))).value();
}

ad::Matrix BaselineModel::predict(const ad::Matrix& x, const std::vector<std::map<int, bool>>* interventions) const {
  ad::Matrix v = hard_of(predict_proba(x));
  if (interventions) {
    if (static_cast<Eigen::Index>(interventions->size()) != x.rows()) {
      throw ArgumentError("one intervention assignment per example is required");
    }
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      for (const auto& [c, val] : (*interventions)[static_cast<std::size_t>(r)]) {
        if (c < 0 || c >= v.cols()) throw ArgumentError("intervention on invalid concept index");
        v(r, c) = val ? 1.0 : 0.0;
      }
    }
  }
  return v;
}

BaselineResult train_baseline(const Dataset& train_set, const Dataset& val_set, const ModelConfig& model_config,
                              const TrainConfig& train_config) {
  train_config.validate();
  if (train_set.size() == 0) throw ArgumentError("training set is empty");
  if (train_set.n_concepts() != model_config.n_concepts || train_set.input_dim() != model_config.input_dim) {
    throw ShapeError("training set shape does not match the model configuration");
  }
  BaselineParams params = BaselineParams::init(model_config, train_config.seed);
  nn::Rng shuffle_rng(train_config.seed);
  auto named = params.parameters();
  nn::AdamW opt(trainable(named, {}), nn::AdamWOptions{train_config.lr, 0.9, 0.999, 1e-8, train_config.weight_decay});

  BaselineResult result;
  result.model.params = params.clone();
  result.best_val_accuracy = -1.0;
  const Dataset& eval_set = val_set.size() > 0 ? val_set : train_set;
  for (int epoch = 1; epoch <= train_config.epochs; ++epoch) {
    double loss_sum = 0.0;
    for (const auto& idx : make_batches(train_set.size(), train_config.batch_size, shuffle_rng)) {
      const Dataset batch = train_set.rows(idx);
      const ad::Var p = ad::sigmoid(params.head.forward(params.backbone.forward(ad::constant(batch.inputs))));
      const ad::Var y = ad::constant(batch.labels);
      const ad::Var ll = ad::add(ad::mul(y, ad::log(p, 1e-12)), ad::mul(ad::one_minus(y), ad::log(ad::one_minus(p), 1e-12)));
      const ad::Var loss = ad::scale(ad::sum(ad::mul(ll, ad::constant(batch.observed))), -1.0);
      if (!std::isfinite(loss.scalar())) {
        result.diverged = true;
        break;
      }
      zero_all(named);
      ad::backward(loss);
      opt.step();
      loss_sum += loss.scalar();
    }
    if (result.diverged) break;
    HistoryRow row{epoch, loss_sum / static_cast<double>(train_set.size()), std::numeric_limits<double>::quiet_NaN()};
    if (epoch % train_config.validate_every == 0 || epoch == train_config.epochs) {
      BaselineModel current{params};
      row.val_accuracy = concept_accuracy(current.predict(eval_set.inputs), eval_set);
      if (row.val_accuracy > result.best_val_accuracy) {
        result.best_val_accuracy = row.val_accuracy;
        result.model.params = params.clone();
      }
    }
    result.history.push_back(row);
  }
  return result;
}

}  // namespace hcmr
