#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cnlu/dataset.hpp"
#include "cnlu/metrics.hpp"
#include "cnlu/model.hpp"

namespace cnlu {

struct TrainingConfig {
  double learning_rate = 1e-4;
  int batch_size = 32;
  double dropout = 0.5;
  double lambda = 1.0;  // conversation-loss weight; zeroed per example without context
  int max_epochs = 30;
  int patience = 5;  // early stop after this many epochs without improvement
  uint64_t seed = 0;
  double weight_decay = 0.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

// Value-level combined loss for one example:
//   L = CE(Y_u, utterance probs) + lambda_eff * CE(Y_c, conversation probs)
// with lambda_eff = 0 when the example has no context. Single-head
// predictions contribute the utterance term only.
double combined_loss(const DualPrediction& prediction, const LabeledExample& example,
                     double lambda, const IntentCatalog& catalog);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  EvalReport validation;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  bool aborted_non_finite = false;
  // Metrics of the retained checkpoint, computed after rounding parameters
  // through 32-bit storage so a reloaded checkpoint reproduces them exactly.
  EvalReport final_validation;

  std::string history_csv() const;
};

// Builds the full pipeline for a dataset: vocabulary and normalization
// statistics fitted on the training split only.
Model build_model(ModelKind kind, const Dataset& dataset, const TrainingConfig& training,
                  ModelConfig model_config = ModelConfig(), FeatureMask mask = FeatureMask());

// Mini-batch AdamW over seeded shuffles, per-epoch validation, early
// stopping on top-2 (dual head) or utterance micro-F1 (single head). The
// best-validation parameters are restored into the model on return.
TrainResult train(Model& model, const Dataset& dataset, const TrainingConfig& config);

}  // namespace cnlu
