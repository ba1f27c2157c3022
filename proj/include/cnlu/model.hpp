#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cnlu/attention.hpp"
#include "cnlu/autodiff.hpp"
#include "cnlu/dataset.hpp"
#include "cnlu/encoder.hpp"
#include "cnlu/featurizer.hpp"
#include "cnlu/params.hpp"

namespace cnlu {

enum class ModelKind {
  baseline,
  concat,
  mlp_concat,
  cawc,
  mtl_cnlu,
  mtl_cnlu_sawc,
  mtl_cnlu_shared,
  mtl_cnlu_sawc_shared,
};

const char* model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);
std::vector<ModelKind> all_model_kinds();
bool is_dual_head(ModelKind kind);
bool is_sawc(ModelKind kind);
bool has_shared_combiner(ModelKind kind);

struct ModelConfig {
  EncoderConfig encoder;
  int d_p = 64;          // attention projection width
  int mlp_hidden = 128;  // MLP block hidden width
  int cat_emb_dim = 25;  // per categorical feature
  double dropout = 0.5;  // MLP hidden layers only
  // Appends the context-present flag as an extra MLP input so models can
  // tell true zeros from absent context. Off by default: the standard
  // context vector is exactly the 18 + 3*25 = 93 values.
  bool append_presence_flag = false;

  int context_dim() const { return kNumScalarFeatures + kNumCategoricalFeatures * cat_emb_dim; }
};

struct EncodedExample {
  std::vector<int> token_ids;
  FeaturizedContext context;
};

struct ForwardOptions {
  bool training = false;
  Rng* rng = nullptr;  // dropout source; required when training with dropout > 0
  // Pins the SAWC gate for gradient checking; the branch itself never
  // receives gradient.
  std::optional<bool> force_flow_branch;
};

// Per-example outputs plus the predicted intent pair (names resolve against
// the catalog; for MTL the second intent comes from the conversation head).
struct DualPrediction {
  std::vector<double> utterance_probs;
  std::vector<double> conversation_probs;  // empty for single-head models
  int utterance_top = -1;
  int conversation_top = -1;  // -1 for single-head models
  std::string y1;
  std::string y2;
};

// Graph handles for one forward pass over a batch.
struct BatchForward {
  ad::Value utterance_logits;  // [B, N_u]
  ad::Value utterance_probs;
  ad::Value conversation_logits;  // null for single-head models
  ad::Value conversation_probs;
  std::vector<bool> flow_branch;  // SAWC gate per example; empty otherwise

  // Intermediate handles, mostly for tests and prediction traces.
  ad::Value query;        // [B, d_q]
  ad::Value context;      // [B, context_dim]
  ad::Value attention_u;  // utterance-head gate, null when the head has none
  ad::Value attention_c;  // conversation-head or shared gate
};

class Model {
 public:
  Model(ModelKind kind, const ModelConfig& config, IntentCatalog catalog, Vocabulary vocab,
        FeaturizerVocabs featurizer_vocabs, NormalizationStats stats, FeatureMask mask,
        uint64_t init_seed);

  EncodedExample encode_example(const std::string& utterance,
                                const std::optional<TransactionRecord>& transaction) const;
  EncodedExample encode_example(const LabeledExample& example) const {
    return encode_example(example.utterance, example.transaction);
  }

  BatchForward forward(const std::vector<EncodedExample>& batch,
                       const ForwardOptions& options) const;

  // Evaluation-mode forward plus top-2 extraction.
  std::vector<DualPrediction> predict(const std::vector<EncodedExample>& batch) const;

  ModelKind kind() const { return kind_; }
  const ModelConfig& config() const { return config_; }
  const IntentCatalog& catalog() const { return catalog_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const FeaturizerVocabs& featurizer_vocabs() const { return featurizer_vocabs_; }
  const NormalizationStats& normalization() const { return stats_; }
  const FeatureMask& feature_mask() const { return mask_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

 private:
  struct Linear {
    ad::Value w, b;
    ad::Value apply(const ad::Value& x) const { return ad::add(ad::matmul(x, w), b); }
  };
  struct MlpBlock {
    Linear hidden, out;
    ad::Value logits(const ad::Value& x, double dropout_rate,
                     const ForwardOptions& options) const;
  };

  Linear make_linear(const std::string& name, Partition partition, int in, int out, Rng& rng);
  MlpBlock make_mlp(const std::string& prefix, Partition partition, int in, int out, Rng& rng);
  ad::Value context_node(const FeaturizedContext& ctx) const;
  ad::Value head_input(const ad::Value& features, const std::vector<EncodedExample>& batch) const;

  ModelKind kind_;
  ModelConfig config_;
  IntentCatalog catalog_;
  Vocabulary vocab_;
  FeaturizerVocabs featurizer_vocabs_;
  NormalizationStats stats_;
  FeatureMask mask_;

  ParamSet params_;
  std::unique_ptr<QueryEncoder> encoder_;
  std::vector<ad::Value> cat_tables_;  // 3 embedding tables
  std::unique_ptr<AttentionModule> attention_u_;
  std::unique_ptr<AttentionModule> attention_c_;
  std::unique_ptr<AttentionModule> attention_shared_;
  std::optional<Linear> context_mlp_;  // mlp-concat pre-projection
  MlpBlock utterance_mlp_;
  MlpBlock conversation_mlp_;
};

// Intent pair per Algorithm-2 consumers: single head takes the two highest
// probabilities (ties to the lower class index); dual head takes each head's
// argmax, even when they coincide.
std::pair<std::string, std::string> top2_pair(const DualPrediction& prediction, ModelKind kind,
                                              const IntentCatalog& catalog);

}  // namespace cnlu
