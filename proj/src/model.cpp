#include "cnlu/model.hpp"

#include <algorithm>
#include <stdexcept>

namespace cnlu {

const char* model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::baseline: return "baseline";
    case ModelKind::concat: return "concat";
    case ModelKind::mlp_concat: return "mlp-concat";
    case ModelKind::cawc: return "cawc";
    case ModelKind::mtl_cnlu: return "mtl-cnlu";
    case ModelKind::mtl_cnlu_sawc: return "mtl-cnlu-sawc";
    case ModelKind::mtl_cnlu_shared: return "mtl-cnlu-shared";
    case ModelKind::mtl_cnlu_sawc_shared: return "mtl-cnlu-sawc-shared";
  }
  return "baseline";
}

ModelKind model_kind_from_name(const std::string& name) {
  for (ModelKind kind : all_model_kinds()) {
    if (name == model_kind_name(kind)) return kind;
  }
  throw std::invalid_argument("unknown model name: " + name);
}

std::vector<ModelKind> all_model_kinds() {
  return {ModelKind::baseline,        ModelKind::concat,
          ModelKind::mlp_concat,      ModelKind::cawc,
          ModelKind::mtl_cnlu,        ModelKind::mtl_cnlu_sawc,
          ModelKind::mtl_cnlu_shared, ModelKind::mtl_cnlu_sawc_shared};
}

bool is_dual_head(ModelKind kind) {
  switch (kind) {
    case ModelKind::mtl_cnlu:
    case ModelKind::mtl_cnlu_sawc:
    case ModelKind::mtl_cnlu_shared:
    case ModelKind::mtl_cnlu_sawc_shared:
      return true;
    default:
      return false;
  }
}

bool is_sawc(ModelKind kind) {
  return kind == ModelKind::mtl_cnlu_sawc || kind == ModelKind::mtl_cnlu_sawc_shared;
}

bool has_shared_combiner(ModelKind kind) {
  return kind == ModelKind::mtl_cnlu_shared || kind == ModelKind::mtl_cnlu_sawc_shared;
}

ad::Value Model::MlpBlock::logits(const ad::Value& x, double dropout_rate,
                                  const ForwardOptions& options) const {
  auto h = ad::relu(hidden.apply(x));
  if (options.training && dropout_rate > 0.0) {
    if (options.rng == nullptr) {
      throw std::invalid_argument("forward: training with dropout requires an rng");
    }
    h = ad::dropout(h, dropout_rate, *options.rng, true);
  }
  return out.apply(h);
}

Model::Linear Model::make_linear(const std::string& name, Partition partition, int in, int out,
                                 Rng& rng) {
  Linear l;
  l.w = params_.add(name + ".w", partition, init_weight(in, out, rng));
  l.b = params_.add(name + ".b", partition, Tensor(1, out));
  return l;
}

Model::MlpBlock Model::make_mlp(const std::string& prefix, Partition partition, int in, int out,
                                Rng& rng) {
  MlpBlock mlp;
  mlp.hidden = make_linear(prefix + ".hidden", partition, in, config_.mlp_hidden, rng);
  mlp.out = make_linear(prefix + ".out", partition, config_.mlp_hidden, out, rng);
  return mlp;
}

Model::Model(ModelKind kind, const ModelConfig& config, IntentCatalog catalog, Vocabulary vocab,
             FeaturizerVocabs featurizer_vocabs, NormalizationStats stats, FeatureMask mask,
             uint64_t init_seed)
    : kind_(kind),
      config_(config),
      catalog_(std::move(catalog)),
      vocab_(std::move(vocab)),
      featurizer_vocabs_(std::move(featurizer_vocabs)),
      stats_(stats),
      mask_(mask) {
  catalog_.validate();
  Rng rng(init_seed);

  encoder_ = std::make_unique<QueryEncoder>(config_.encoder, vocab_.size(), params_, rng);

  const std::array<const CategoricalVocab*, 3> cat_vocabs = {
      &featurizer_vocabs_.fulfillment, &featurizer_vocabs_.cancellation,
      &featurizer_vocabs_.store};
  for (int c = 0; c < kNumCategoricalFeatures; ++c) {
    cat_tables_.push_back(params_.add(
        std::string("emb.") + kCategoricalFeatureNames[static_cast<size_t>(c)],
        Partition::embeddings,
        init_embedding(cat_vocabs[static_cast<size_t>(c)]->size(), config_.cat_emb_dim, rng)));
  }

  const int n_u = static_cast<int>(catalog_.utterance_intents.size());
  const int n_c = static_cast<int>(catalog_.conversation_intents.size());
  const int ctx = config_.context_dim();
  const int flag = config_.append_presence_flag ? 1 : 0;
  const AttentionConfig attn_cfg{config_.encoder.d_q, config_.d_p, ctx};

  switch (kind_) {
    case ModelKind::baseline:
      utterance_mlp_ =
          make_mlp("uhead.mlp", Partition::utterance_head, config_.encoder.d_q, n_u, rng);
      break;
    case ModelKind::concat:
      utterance_mlp_ = make_mlp("uhead.mlp", Partition::utterance_head,
                                config_.encoder.d_q + ctx + flag, n_u, rng);
      break;
    case ModelKind::mlp_concat:
      context_mlp_ = make_linear("uhead.context_mlp", Partition::utterance_head, ctx, ctx, rng);
      utterance_mlp_ = make_mlp("uhead.mlp", Partition::utterance_head,
                                config_.encoder.d_q + ctx + flag, n_u, rng);
      break;
    case ModelKind::cawc:
      attention_u_ = std::make_unique<AttentionModule>(attn_cfg, params_,
                                                       Partition::utterance_head, "uhead.attn",
                                                       rng);
      utterance_mlp_ = make_mlp("uhead.mlp", Partition::utterance_head,
                                config_.encoder.d_q + ctx + flag, n_u, rng);
      break;
    case ModelKind::mtl_cnlu:
      attention_u_ = std::make_unique<AttentionModule>(attn_cfg, params_,
                                                       Partition::utterance_head, "uhead.attn",
                                                       rng);
      utterance_mlp_ = make_mlp("uhead.mlp", Partition::utterance_head,
                                config_.encoder.d_q + ctx + flag, n_u, rng);
      attention_c_ = std::make_unique<AttentionModule>(
          attn_cfg, params_, Partition::conversation_head, "chead.attn", rng);
      conversation_mlp_ = make_mlp("chead.mlp", Partition::conversation_head,
                                   config_.encoder.d_q + ctx + flag, n_c, rng);
      break;
    case ModelKind::mtl_cnlu_sawc:
      attention_u_ = std::make_unique<AttentionModule>(attn_cfg, params_,
                                                       Partition::utterance_head, "uhead.attn",
                                                       rng);
      utterance_mlp_ = make_mlp("uhead.mlp", Partition::utterance_head,
                                config_.encoder.d_q + ctx + flag, n_u, rng);
      attention_c_ = std::make_unique<AttentionModule>(
          attn_cfg, params_, Partition::conversation_head, "chead.attn", rng);
      // The selectively weighted context feeds the conversation MLP directly,
      // without the query.
      conversation_mlp_ =
          make_mlp("chead.mlp", Partition::conversation_head, ctx + flag, n_c, rng);
      break;
    case ModelKind::mtl_cnlu_shared:
      attention_shared_ = std::make_unique<AttentionModule>(
          attn_cfg, params_, Partition::shared_combiner, "shared.attn", rng);
      utterance_mlp_ = make_mlp("uhead.mlp", Partition::utterance_head,
                                config_.encoder.d_q + ctx + flag, n_u, rng);
      conversation_mlp_ = make_mlp("chead.mlp", Partition::conversation_head,
                                   config_.encoder.d_q + ctx + flag, n_c, rng);
      break;
    case ModelKind::mtl_cnlu_sawc_shared:
      attention_shared_ = std::make_unique<AttentionModule>(
          attn_cfg, params_, Partition::shared_combiner, "shared.attn", rng);
      utterance_mlp_ = make_mlp("uhead.mlp", Partition::utterance_head,
                                config_.encoder.d_q + ctx + flag, n_u, rng);
      conversation_mlp_ =
          make_mlp("chead.mlp", Partition::conversation_head, ctx + flag, n_c, rng);
      break;
  }
}

EncodedExample Model::encode_example(const std::string& utterance,
                                     const std::optional<TransactionRecord>& transaction) const {
  EncodedExample e;
  e.token_ids = tokenize(utterance, vocab_, config_.encoder.max_len);
  e.context = featurize(transaction, stats_, featurizer_vocabs_, mask_);
  return e;
}

ad::Value Model::context_node(const FeaturizedContext& ctx) const {
  if (!ctx.present) return ad::constant(Tensor(1, config_.context_dim()));
  std::vector<ad::Value> parts;
  parts.push_back(ad::constant(
      Tensor::row(std::vector<double>(ctx.scalars.begin(), ctx.scalars.end()))));
  for (int c = 0; c < kNumCategoricalFeatures; ++c) {
    if (mask_.keep_categorical[static_cast<size_t>(c)]) {
      parts.push_back(ad::embedding_rows(cat_tables_[static_cast<size_t>(c)],
                                         {ctx.categorical_index[static_cast<size_t>(c)]}));
    } else {
      parts.push_back(ad::constant(Tensor(1, config_.cat_emb_dim)));
    }
  }
  return ad::concat_cols(std::move(parts));
}

ad::Value Model::head_input(const ad::Value& features,
                            const std::vector<EncodedExample>& batch) const {
  if (!config_.append_presence_flag) return features;
  Tensor flags(static_cast<int64_t>(batch.size()), 1);
  for (size_t i = 0; i < batch.size(); ++i) {
    flags.at(static_cast<int64_t>(i), 0) = batch[i].context.present ? 1.0 : 0.0;
  }
  return ad::concat_cols({features, ad::constant(std::move(flags))});
}

BatchForward Model::forward(const std::vector<EncodedExample>& batch,
                            const ForwardOptions& options) const {
  if (batch.empty()) throw std::invalid_argument("forward: empty batch");
  BatchForward out;

  std::vector<ad::Value> q_rows, c_rows;
  q_rows.reserve(batch.size());
  c_rows.reserve(batch.size());
  for (const EncodedExample& e : batch) {
    q_rows.push_back(encoder_->encode(e.token_ids));
    c_rows.push_back(context_node(e.context));
  }
  out.query = q_rows.size() == 1 ? q_rows[0] : ad::concat_rows(q_rows);
  out.context = c_rows.size() == 1 ? c_rows[0] : ad::concat_rows(c_rows);

  const ad::Value& q = out.query;
  const ad::Value& c = out.context;

  // Utterance path.
  ad::Value u_input;
  switch (kind_) {
    case ModelKind::baseline:
      u_input = q;
      break;
    case ModelKind::concat:
      u_input = head_input(ad::concat_cols({q, c}), batch);
      break;
    case ModelKind::mlp_concat:
      u_input = head_input(ad::concat_cols({q, ad::relu(context_mlp_->apply(c))}), batch);
      break;
    case ModelKind::cawc:
    case ModelKind::mtl_cnlu:
    case ModelKind::mtl_cnlu_sawc: {
      out.attention_u = attention_u_->weights(q, c);
      u_input = head_input(ad::concat_cols({q, weighted_context(out.attention_u, c)}), batch);
      break;
    }
    case ModelKind::mtl_cnlu_shared:
    case ModelKind::mtl_cnlu_sawc_shared: {
      out.attention_u = attention_shared_->weights(q, c);
      u_input = head_input(ad::concat_cols({q, weighted_context(out.attention_u, c)}), batch);
      break;
    }
  }
  out.utterance_logits = utterance_mlp_.logits(u_input, config_.dropout, options);
  out.utterance_probs = ad::softmax_rows(out.utterance_logits);

  if (!is_dual_head(kind_)) return out;

  // Conversation path.
  const bool shared = has_shared_combiner(kind_);
  out.attention_c = shared ? out.attention_u : attention_c_->weights(q, c);

  if (!is_sawc(kind_)) {
    auto c_input =
        head_input(ad::concat_cols({q, weighted_context(out.attention_c, c)}), batch);
    out.conversation_logits = conversation_mlp_.logits(c_input, config_.dropout, options);
    out.conversation_probs = ad::softmax_rows(out.conversation_logits);
    return out;
  }

  // Selective gate: weight the context only when the utterance head predicts
  // a flow intent. The decision reads predicted values, so no gradient flows
  // through the branch itself.
  const int64_t b = static_cast<int64_t>(batch.size());
  const int64_t ctx_dim = c->val.cols;
  Tensor gate(b, ctx_dim), inverse_gate(b, ctx_dim);
  out.flow_branch.resize(batch.size());
  for (int64_t i = 0; i < b; ++i) {
    bool flow;
    if (options.force_flow_branch) {
      flow = *options.force_flow_branch;
    } else {
      const double* row = out.utterance_probs->val.row_ptr(i);
      int best = 0;
      for (int64_t j = 1; j < out.utterance_probs->val.cols; ++j) {
        if (row[j] > row[best]) best = static_cast<int>(j);
      }
      flow = catalog_.is_flow(catalog_.utterance_intents[static_cast<size_t>(best)]);
    }
    out.flow_branch[static_cast<size_t>(i)] = flow;
    for (int64_t j = 0; j < ctx_dim; ++j) {
      gate.at(i, j) = flow ? 1.0 : 0.0;
      inverse_gate.at(i, j) = flow ? 0.0 : 1.0;
    }
  }
  // c_tilde = c (*) (gate * a + (1 - gate)): rows with the flow branch taken
  // get a (*) c, the rest pass c through unchanged.
  auto effective_gate = ad::add(ad::mul(ad::constant(std::move(gate)), out.attention_c),
                                ad::constant(std::move(inverse_gate)));
  auto c_tilde = ad::mul(c, effective_gate);
  auto c_input = head_input(c_tilde, batch);
  out.conversation_logits = conversation_mlp_.logits(c_input, config_.dropout, options);
  out.conversation_probs = ad::softmax_rows(out.conversation_logits);
  return out;
}

std::vector<DualPrediction> Model::predict(const std::vector<EncodedExample>& batch) const {
  ForwardOptions options;  // evaluation mode
  BatchForward fwd = forward(batch, options);
  std::vector<DualPrediction> out(batch.size());
  for (size_t i = 0; i < batch.size(); ++i) {
    DualPrediction& p = out[i];
    const int64_t row = static_cast<int64_t>(i);
    const Tensor& up = fwd.utterance_probs->val;
    p.utterance_probs.assign(up.row_ptr(row), up.row_ptr(row) + up.cols);
    p.utterance_top = static_cast<int>(
        std::max_element(p.utterance_probs.begin(), p.utterance_probs.end()) -
        p.utterance_probs.begin());
    if (fwd.conversation_probs) {
      const Tensor& cp = fwd.conversation_probs->val;
      p.conversation_probs.assign(cp.row_ptr(row), cp.row_ptr(row) + cp.cols);
      p.conversation_top = static_cast<int>(
          std::max_element(p.conversation_probs.begin(), p.conversation_probs.end()) -
          p.conversation_probs.begin());
    }
    const auto pair = top2_pair(p, kind_, catalog_);
    p.y1 = pair.first;
    p.y2 = pair.second;
  }
  return out;
}

std::pair<std::string, std::string> top2_pair(const DualPrediction& prediction, ModelKind kind,
                                              const IntentCatalog& catalog) {
  if (is_dual_head(kind)) {
    if (prediction.conversation_probs.empty()) {
      throw std::invalid_argument("top2_pair: dual-head model without conversation output");
    }
    return {catalog.utterance_intents[static_cast<size_t>(prediction.utterance_top)],
            catalog.conversation_intents[static_cast<size_t>(prediction.conversation_top)]};
  }
  const auto& probs = prediction.utterance_probs;
  if (probs.size() < 2) throw std::invalid_argument("top2_pair: need at least 2 classes");
  // Strict comparisons break ties toward the lower class index.
  int best = 0;
  for (size_t j = 1; j < probs.size(); ++j) {
    if (probs[j] > probs[static_cast<size_t>(best)]) best = static_cast<int>(j);
  }
  int second = best == 0 ? 1 : 0;
  for (size_t j = 0; j < probs.size(); ++j) {
    if (static_cast<int>(j) == best) continue;
    if (probs[j] > probs[static_cast<size_t>(second)]) second = static_cast<int>(j);
  }
  return {catalog.utterance_intents[static_cast<size_t>(best)],
          catalog.utterance_intents[static_cast<size_t>(second)]};
}

}  // namespace cnlu
