#include "cnlu/training.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "cnlu/optim.hpp"

namespace cnlu {

void TrainingConfig::validate() const {
  if (batch_size < 1) throw std::invalid_argument("training config: batch_size must be >= 1");
  if (lambda < 0.0) throw std::invalid_argument("training config: lambda must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0) {
    throw std::invalid_argument("training config: dropout must be in [0,1)");
  }
  if (max_epochs < 1) throw std::invalid_argument("training config: max_epochs must be >= 1");
}

double combined_loss(const DualPrediction& prediction, const LabeledExample& example,
                     double lambda, const IntentCatalog& catalog) {
  constexpr double kFloor = 1e-12;
  const int yu = catalog.utterance_index(example.utterance_label);
  if (yu < 0) {
    throw std::invalid_argument("combined_loss: unknown utterance label " +
                                example.utterance_label);
  }
  double loss = -std::log(std::max(prediction.utterance_probs[static_cast<size_t>(yu)], kFloor));
  const double lambda_eff = example.transaction ? lambda : 0.0;
  if (lambda_eff > 0.0 && !prediction.conversation_probs.empty()) {
    const int yc = catalog.conversation_index(example.conversation_label);
    if (yc < 0) {
      throw std::invalid_argument("combined_loss: unknown conversation label " +
                                  example.conversation_label);
    }
    loss -= lambda_eff *
            std::log(std::max(prediction.conversation_probs[static_cast<size_t>(yc)], kFloor));
  }
  return loss;
}

Model build_model(ModelKind kind, const Dataset& dataset, const TrainingConfig& training,
                  ModelConfig model_config, FeatureMask mask) {
  std::vector<std::string> utterances;
  std::vector<RawFeatures> features;
  utterances.reserve(dataset.train.size());
  for (const LabeledExample& e : dataset.train) {
    utterances.push_back(e.utterance);
    if (e.transaction) features.push_back(derive_raw_features(*e.transaction));
  }
  if (features.empty()) {
    // A fully contextless corpus still needs fitted stats for the zero vector.
    features.push_back(RawFeatures{});
  }
  model_config.dropout = training.dropout;
  return Model(kind, model_config, dataset.catalog, Vocabulary::build(utterances),
               FeaturizerVocabs::build(features), fit_normalization(features), mask,
               training.seed);
}

namespace {

std::string format_metric(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

std::string TrainResult::history_csv() const {
  std::ostringstream os;
  os << "epoch,train_loss,val_utterance_micro_f1,val_utterance_macro_f1,"
        "val_conversation_micro_f1,val_conversation_macro_f1,val_top2\n";
  for (const EpochRecord& r : history) {
    os << r.epoch << "," << format_metric(r.train_loss) << ","
       << format_metric(r.validation.utterance.micro_f1) << ","
       << format_metric(r.validation.utterance.macro_f1) << ",";
    if (r.validation.conversation) {
      os << format_metric(r.validation.conversation->micro_f1) << ","
         << format_metric(r.validation.conversation->macro_f1);
    } else {
      os << "-,-";
    }
    os << "," << format_metric(r.validation.mean_top2) << "\n";
  }
  return os.str();
}

TrainResult train(Model& model, const Dataset& dataset, const TrainingConfig& config) {
  config.validate();
  if (dataset.train.empty() || dataset.validation.empty()) {
    throw std::invalid_argument("train: need nonempty train and validation splits");
  }
  const IntentCatalog& catalog = model.catalog();
  const bool dual = is_dual_head(model.kind());

  // Pre-encode once; featurization is pure given the fitted stats.
  std::vector<EncodedExample> encoded;
  std::vector<int> u_labels, c_labels;
  std::vector<bool> has_context;
  encoded.reserve(dataset.train.size());
  for (const LabeledExample& e : dataset.train) {
    encoded.push_back(model.encode_example(e));
    const int yu = catalog.utterance_index(e.utterance_label);
    const int yc = catalog.conversation_index(e.conversation_label);
    if (yu < 0 || yc < 0) {
      throw std::invalid_argument("train: example label outside the model catalog");
    }
    u_labels.push_back(yu);
    c_labels.push_back(yc);
    has_context.push_back(e.transaction.has_value());
  }

  AdamWOptions adam;
  adam.lr = config.learning_rate;
  adam.beta1 = config.beta1;
  adam.beta2 = config.beta2;
  adam.eps = config.adam_eps;
  adam.weight_decay = config.weight_decay;
  AdamW optimizer(model.params(), adam);

  Rng rng(config.seed ^ 0x5eedf00dULL);
  ForwardOptions train_opts;
  train_opts.training = true;
  train_opts.rng = &rng;

  TrainResult result;
  double best_metric = -1.0;
  std::vector<Tensor> best_params = model.params().snapshot();

  std::vector<size_t> order(encoded.size());
  std::iota(order.begin(), order.end(), 0);

  const size_t n = encoded.size();
  const size_t batch_size = static_cast<size_t>(config.batch_size);
  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    rng.shuffle(order);
    double loss_sum = 0.0;
    bool non_finite = false;
    for (size_t start = 0; start < n && !non_finite; start += batch_size) {
      const size_t end = std::min(n, start + batch_size);
      const size_t b = end - start;
      std::vector<EncodedExample> batch;
      std::vector<int> bu, bc;
      std::vector<double> ones, lambda_w;
      batch.reserve(b);
      for (size_t i = start; i < end; ++i) {
        const size_t idx = order[i];
        batch.push_back(encoded[idx]);
        bu.push_back(u_labels[idx]);
        bc.push_back(c_labels[idx]);
        ones.push_back(1.0);
        lambda_w.push_back(has_context[idx] ? config.lambda : 0.0);
      }

      BatchForward fwd = model.forward(batch, train_opts);
      // Batch loss is the mean over examples (decouples the learning rate
      // from the batch size).
      const double inv_b = 1.0 / static_cast<double>(b);
      ad::Value loss = ad::softmax_xent(fwd.utterance_logits, bu, ones, inv_b);
      if (dual) {
        const bool any_context =
            std::any_of(lambda_w.begin(), lambda_w.end(), [](double w) { return w > 0.0; });
        if (any_context) {
          loss = ad::add(loss, ad::softmax_xent(fwd.conversation_logits, bc, lambda_w, inv_b));
        }
      }
      const double loss_value = loss->val.data[0];
      if (!std::isfinite(loss_value)) {
        non_finite = true;
        break;
      }
      loss_sum += loss_value * static_cast<double>(b);

      optimizer.zero_grad();
      ad::backward(loss);
      try {
        optimizer.step();
      } catch (const std::runtime_error&) {
        // Non-finite gradients abort the run the same way a non-finite loss
        // does; the best checkpoint so far is retained below.
        non_finite = true;
        break;
      }
    }

    if (non_finite) {
      // Keep the last good checkpoint.
      result.aborted_non_finite = true;
      break;
    }

    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = loss_sum / static_cast<double>(n);
    record.validation = evaluate(model, dataset.validation);
    const double metric = dual ? record.validation.mean_top2 : record.validation.utterance.micro_f1;
    result.history.push_back(std::move(record));

    if (metric > best_metric) {
      best_metric = metric;
      result.best_epoch = epoch;
      best_params = model.params().snapshot();
    } else if (epoch - result.best_epoch >= config.patience) {
      break;
    }
  }

  model.params().restore(best_params);
  model.params().round_to_f32();
  result.final_validation = evaluate(model, dataset.validation);
  return result;
}

}  // namespace cnlu
