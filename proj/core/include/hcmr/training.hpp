#pragma once

// Training likelihood, optimization loop and the independent-concept
// baseline.

#include "hcmr/config.hpp"
#include "hcmr/constraints.hpp"
#include "hcmr/datasets.hpp"
#include "hcmr/model.hpp"
#include "hcmr/nn.hpp"

#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace hcmr {

struct LikelihoodOptions {
  GradientMode mode = GradientMode::StraightThrough;
  // Lower clamp of each likelihood term inside the log.
  double log_floor = 1e-12;
  // Label flip probability e: each term becomes e + (1 - 2e) * p(label).
  double label_noise = 0.0;
};

struct LikelihoodResult {
  ad::Var loss;          // 1x1, summed negative log-likelihood
  int used_examples = 0;
  int skipped_examples = 0;  // rows without any observed label
  std::int64_t observed_terms = 0;
};

// Monte Carlo estimate (params.config.mc_samples role draws) of the negative
// log-likelihood of all observed labels.
LikelihoodResult training_likelihood(const TrainingBatch& batch, const ModelParameters& params,
                                     const ConstraintSet* constraints, nn::Rng& rng,
                                     const LikelihoodOptions& options = {});

// Mean accuracy over observed labels.
double concept_accuracy(const ad::Matrix& predicted_values, const Dataset& data);
double evaluate_accuracy(const FrozenModel& model, const Dataset& data);

struct HistoryRow {
  int epoch = 0;
  double loss = 0.0;          // mean per used example
  double val_accuracy = 0.0;  // NaN when not validated this epoch
};

struct TrainResult {
  ModelParameters best;      // best-validation checkpoint
  std::vector<HistoryRow> history;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
  bool diverged = false;
};

// Called after every epoch with the row just appended.
using EpochCallback = std::function<void(const HistoryRow&)>;

TrainResult train(const Dataset& train_set, const Dataset& val_set, const ModelConfig& model_config,
                  const TrainConfig& train_config, const ConstraintSet* constraints = nullptr,
                  const EpochCallback& on_epoch = {});

// Continues optimizing existing parameters.
TrainResult train_from(ModelParameters init, const Dataset& train_set, const Dataset& val_set,
                       const TrainConfig& train_config, const ConstraintSet* constraints = nullptr,
                       const EpochCallback& on_epoch = {});

// Writes "epoch,loss,val_accuracy" rows.
std::string history_csv(const std::vector<HistoryRow>& history);

// Same backbone as the encoder, one logistic head per concept.
struct BaselineParams {
  nn::Mlp backbone;
  nn::Linear head;

  static BaselineParams init(const ModelConfig& config, std::uint64_t seed);
  std::vector<nn::NamedParameter> parameters();
  BaselineParams clone() const;
};

struct BaselineModel {
  BaselineParams params;

  ad::Matrix predict_proba(const ad::Matrix& x) const;
  // Hard predictions with intervened entries replaced by ground truth.
  ad::Matrix predict(const ad::Matrix& x, const std::vector<std::map<int, bool>>* interventions = nullptr) const;
};

struct BaselineResult {
  BaselineModel model;
  std::vector<HistoryRow> history;
  double best_val_accuracy = 0.0;
  bool diverged = false;
};

BaselineResult train_baseline(const Dataset& train_set, const Dataset& val_set, const ModelConfig& model_config,
                              const TrainConfig& train_config);

}  // namespace hcmr
