#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "cnlu/model.hpp"
#include "cnlu/checkpoint.hpp"

using namespace cnlu;

namespace {

constexpr int64_t kHour = 3600;
constexpr int64_t kChat = 1800000000;

IntentCatalog tiny_catalog() {
  IntentCatalog c;
  c.utterance_intents = {"greet", "where_is_my_order", "order_late", "cancel_order"};
  c.conversation_intents = {"where_is_my_order", "order_late", "cancel_order"};
  c.flow_intents = {"where_is_my_order", "order_late", "cancel_order"};
  return c;
}

TransactionRecord record_a() {
  TransactionRecord r;
  r.chat_at = kChat;
  r.order_placed_at = kChat - 40 * kHour;
  r.fulfillment_type = "shipping";
  r.store_indicator = "store_a";
  r.items.resize(2);
  r.items[0].shipped_at = r.order_placed_at + 5 * kHour;
  r.items[0].expected_delivery_at = kChat - 4 * kHour;  // overdue
  r.items[1].shipped_at = r.order_placed_at + 6 * kHour;
  r.items[1].expected_delivery_at = kChat + 30 * kHour;
  return r;
}

TransactionRecord record_b() {
  TransactionRecord r = record_a();
  r.items[0].expected_delivery_at = kChat + 10 * kHour;  // nothing overdue
  r.store_indicator = "store_b";
  return r;
}

ModelConfig tiny_config() {
  ModelConfig config;
  config.encoder = EncoderConfig{8, 2, 6};
  config.d_p = 8;
  config.mlp_hidden = 16;
  config.cat_emb_dim = 4;  // context_dim = 18 + 12 = 30
  config.dropout = 0.0;
  return config;
}

Model tiny_model(ModelKind kind, ModelConfig config = tiny_config(), uint64_t seed = 11) {
  const std::vector<std::string> corpus = {"where is my order", "hello there",
                                           "cancel my order", "my order is late"};
  std::vector<RawFeatures> features = {derive_raw_features(record_a()),
                                       derive_raw_features(record_b())};
  return Model(kind, config, tiny_catalog(), Vocabulary::build(corpus),
               FeaturizerVocabs::build(features), fit_normalization(features), FeatureMask(),
               seed);
}

bool rows_equal(const Tensor& a, const Tensor& b, int64_t row_a, int64_t row_b) {
  if (a.cols != b.cols) return false;
  return std::memcmp(a.row_ptr(row_a), b.row_ptr(row_b), sizeof(double) * a.cols) == 0;
}

double row_sum(const Tensor& t, int64_t row) {
  double s = 0.0;
  for (int64_t j = 0; j < t.cols; ++j) s += t.at(row, j);
  return s;
}

}  // namespace

TEST_CASE("model kind names round trip") {
  for (ModelKind kind : all_model_kinds()) {
    CHECK(model_kind_from_name(model_kind_name(kind)) == kind);
  }
  CHECK_THROWS_AS(model_kind_from_name("bert"), std::invalid_argument);
}

TEST_CASE("baseline ignores context and outputs a distribution") {
  Model model = tiny_model(ModelKind::baseline);
  auto with_ctx = model.encode_example("where is my order", record_a());
  auto without_ctx = model.encode_example("where is my order", std::nullopt);

  ForwardOptions eval;
  auto fwd = model.forward({with_ctx, without_ctx}, eval);
  REQUIRE(fwd.utterance_probs->val.cols == 4);
  CHECK(row_sum(fwd.utterance_probs->val, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(rows_equal(fwd.utterance_probs->val, fwd.utterance_probs->val, 0, 1));
  CHECK(fwd.conversation_probs == nullptr);

  auto again = model.forward({with_ctx}, eval);
  CHECK(rows_equal(fwd.utterance_probs->val, again.utterance_probs->val, 0, 0));
}

TEST_CASE("concat head consumes query plus context width") {
  Model model = tiny_model(ModelKind::concat);
  // d_q + context_dim = 8 + 30
  CHECK(model.params().find("uhead.mlp.hidden.w")->val.rows == 38);

  // At the paper's defaults the MLP input is d_q + 93 = 157.
  ModelConfig full;
  full.dropout = 0.0;
  CHECK(full.context_dim() == 93);
  CHECK(full.encoder.d_q + full.context_dim() == 157);

  Model mlp_concat = tiny_model(ModelKind::mlp_concat);
  CHECK(mlp_concat.params().find("uhead.context_mlp.w")->val.rows == 30);
  CHECK(mlp_concat.params().find("uhead.mlp.hidden.w")->val.rows == 38);

  auto e1 = model.encode_example("cancel my order", record_a());
  auto e2 = model.encode_example("cancel my order", std::nullopt);  // context = zeros
  ForwardOptions eval;
  auto fwd = model.forward({e1, e2}, eval);
  CHECK(row_sum(fwd.utterance_probs->val, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK_FALSE(rows_equal(fwd.utterance_probs->val, fwd.utterance_probs->val, 0, 1));
}

TEST_CASE("cawc applies a sigmoid gate to the context") {
  Model model = tiny_model(ModelKind::cawc);
  // Zero the attention stack: the gate must become exactly 0.5 everywhere.
  for (const auto& e : model.params().entries()) {
    if (e.node->name.rfind("uhead.attn", 0) == 0) e.node->val.fill(0.0);
  }
  ForwardOptions eval;
  auto fwd = model.forward({model.encode_example("my order is late", record_a())}, eval);
  REQUIRE(fwd.attention_u != nullptr);
  for (double v : fwd.attention_u->val.data) CHECK(v == 0.5);
  CHECK(row_sum(fwd.utterance_probs->val, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("mtl heads are disjoint given a fixed backbone") {
  Model model = tiny_model(ModelKind::mtl_cnlu);
  auto example = model.encode_example("where is my order", record_a());
  ForwardOptions eval;
  auto before = model.forward({example}, eval);
  REQUIRE(before.conversation_probs != nullptr);
  CHECK(before.utterance_probs->val.cols == 4);
  CHECK(before.conversation_probs->val.cols == 3);
  CHECK(row_sum(before.conversation_probs->val, 0) == doctest::Approx(1.0).epsilon(1e-9));

  // Perturb conversation-head parameters: utterance output must not move.
  for (const auto& value : model.params().values(Partition::conversation_head)) {
    for (double& v : value->val.data) v += 0.37;
  }
  auto after = model.forward({example}, eval);
  CHECK(rows_equal(before.utterance_probs->val, after.utterance_probs->val, 0, 0));
  CHECK_FALSE(rows_equal(before.conversation_probs->val, after.conversation_probs->val, 0, 0));

  // And the other way around.
  auto before2 = model.forward({example}, eval);
  for (const auto& value : model.params().values(Partition::utterance_head)) {
    for (double& v : value->val.data) v += 0.37;
  }
  auto after2 = model.forward({example}, eval);
  CHECK(rows_equal(before2.conversation_probs->val, after2.conversation_probs->val, 0, 0));
  CHECK_FALSE(rows_equal(before2.utterance_probs->val, after2.utterance_probs->val, 0, 0));
}

TEST_CASE("sawc conversation head sees the context alone") {
  Model model = tiny_model(ModelKind::mtl_cnlu_sawc);
  // Conversation MLP input is the context width, not d_q + context.
  CHECK(model.params().find("chead.mlp.hidden.w")->val.rows == 30);
  CHECK(model.params().find("uhead.mlp.hidden.w")->val.rows == 38);

  // Else branch: with the gate pinned to non-flow, conversation logits are a
  // function of the context only, bit-identical across utterances.
  ForwardOptions nonflow;
  nonflow.force_flow_branch = false;
  auto a = model.forward({model.encode_example("hello there", record_a())}, nonflow);
  auto b = model.forward({model.encode_example("cancel my order", record_a())}, nonflow);
  CHECK(rows_equal(a.conversation_logits->val, b.conversation_logits->val, 0, 0));
  CHECK_FALSE(rows_equal(a.utterance_logits->val, b.utterance_logits->val, 0, 0));

  // Flow branch: the gate is query-dependent, so logits differ generically.
  ForwardOptions flow;
  flow.force_flow_branch = true;
  auto c = model.forward({model.encode_example("hello there", record_a())}, flow);
  auto d = model.forward({model.encode_example("cancel my order", record_a())}, flow);
  CHECK_FALSE(rows_equal(c.conversation_logits->val, d.conversation_logits->val, 0, 0));

  // Ungated forward records which branch each example took, from the
  // predicted utterance intent.
  ForwardOptions eval;
  auto fwd = model.forward({model.encode_example("hello there", record_a())}, eval);
  REQUIRE(fwd.flow_branch.size() == 1);
  int best = 0;
  for (int64_t j = 1; j < fwd.utterance_probs->val.cols; ++j) {
    if (fwd.utterance_probs->val.at(0, j) > fwd.utterance_probs->val.at(0, best)) {
      best = static_cast<int>(j);
    }
  }
  CHECK(fwd.flow_branch[0] ==
        model.catalog().is_flow(model.catalog().utterance_intents[static_cast<size_t>(best)]));
}

TEST_CASE("shared variants reuse one combining module") {
  Model unshared = tiny_model(ModelKind::mtl_cnlu);
  Model shared = tiny_model(ModelKind::mtl_cnlu_shared);
  CHECK(shared.params().total_count() < unshared.params().total_count());
  CHECK(shared.params().values(Partition::shared_combiner).size() > 0);
  CHECK(shared.params().values(Partition::conversation_head).size() > 0);

  Model unshared_sawc = tiny_model(ModelKind::mtl_cnlu_sawc);
  Model shared_sawc = tiny_model(ModelKind::mtl_cnlu_sawc_shared);
  CHECK(shared_sawc.params().total_count() < unshared_sawc.params().total_count());

  // Output shapes match the unshared counterparts.
  ForwardOptions eval;
  auto example = shared.encode_example("where is my order", record_a());
  auto fwd = shared.forward({example}, eval);
  CHECK(fwd.utterance_probs->val.cols == 4);
  CHECK(fwd.conversation_probs->val.cols == 3);

  // Either head's loss alone reaches the shared module.
  for (int head = 0; head < 2; ++head) {
    shared.params().zero_grad();
    auto f = shared.forward({example}, eval);
    auto loss = ad::softmax_xent(head == 0 ? f.utterance_logits : f.conversation_logits, {0},
                                 {1.0}, 1.0);
    ad::backward(loss);
    double norm = 0.0;
    for (const auto& value : shared.params().values(Partition::shared_combiner)) {
      for (double g : value->grad.data) norm += std::abs(g);
    }
    CHECK(norm > 0.0);
  }
}

TEST_CASE("top2 pair selection") {
  IntentCatalog catalog = tiny_catalog();

  DualPrediction single;
  single.utterance_probs = {0.5, 0.3, 0.2, 0.0};
  single.utterance_top = 0;
  auto pair = top2_pair(single, ModelKind::cawc, catalog);
  CHECK(pair.first == "greet");
  CHECK(pair.second == "where_is_my_order");

  // Exact tie: the lower class index wins both slots.
  DualPrediction tie;
  tie.utterance_probs = {0.25, 0.25, 0.25, 0.25};
  tie.utterance_top = 0;
  pair = top2_pair(tie, ModelKind::baseline, catalog);
  CHECK(pair.first == "greet");
  CHECK(pair.second == "where_is_my_order");

  // Dual head: each head's argmax, even when they name the same intent.
  DualPrediction dual;
  dual.utterance_probs = {0.1, 0.8, 0.05, 0.05};
  dual.utterance_top = 1;
  dual.conversation_probs = {0.9, 0.05, 0.05};
  dual.conversation_top = 0;
  pair = top2_pair(dual, ModelKind::mtl_cnlu_sawc, catalog);
  CHECK(pair.first == "where_is_my_order");
  CHECK(pair.second == "where_is_my_order");
}

TEST_CASE("predict fills probabilities and the intent pair") {
  Model model = tiny_model(ModelKind::mtl_cnlu_sawc);
  auto preds = model.predict({model.encode_example("hello there", record_a()),
                              model.encode_example("cancel my order", std::nullopt)});
  REQUIRE(preds.size() == 2);
  for (const auto& p : preds) {
    CHECK(p.utterance_probs.size() == 4);
    CHECK(p.conversation_probs.size() == 3);
    CHECK(p.utterance_top >= 0);
    CHECK(p.conversation_top >= 0);
    CHECK_FALSE(p.y1.empty());
    CHECK_FALSE(p.y2.empty());
  }
}

TEST_CASE("presence flag widens head inputs when enabled") {
  ModelConfig config = tiny_config();
  config.append_presence_flag = true;
  Model model = tiny_model(ModelKind::concat, config);
  CHECK(model.params().find("uhead.mlp.hidden.w")->val.rows == 39);  // 8 + 30 + flag

  // With the flag on, absent context is distinguishable from a zero vector.
  ForwardOptions eval;
  auto fwd = model.forward({model.encode_example("hello there", std::nullopt)}, eval);
  CHECK(row_sum(fwd.utterance_probs->val, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("end-to-end gradients match finite differences per architecture") {
  // Reduced dims keep the finite-difference loop fast; the acceptance suite
  // repeats this at the specified sizes for every architecture.
  for (ModelKind kind : {ModelKind::cawc, ModelKind::mtl_cnlu_sawc}) {
    CAPTURE(model_kind_name(kind));
    ModelConfig config = tiny_config();
    Model model = tiny_model(kind, config, 21);
    auto e1 = model.encode_example("where is my order", record_a());
    auto e2 = model.encode_example("hello there", record_b());
    auto e3 = model.encode_example("cancel my order", std::nullopt);

    ForwardOptions opts;
    opts.force_flow_branch = true;
    auto build = [&] {
      auto fwd = model.forward({e1, e2, e3}, opts);
      auto loss = ad::softmax_xent(fwd.utterance_logits, {1, 0, 3}, {1.0, 1.0, 1.0}, 1.0 / 3.0);
      if (fwd.conversation_logits) {
        loss = ad::add(loss,
                       ad::softmax_xent(fwd.conversation_logits, {1, 0, 2}, {1.0, 1.0, 0.0},
                                        1.0 / 3.0));
      }
      return loss;
    };
    Rng rng(31);
    CHECK(ad::grad_check(build, model.params().values(), 1e-5, rng, 250) < 1e-5);
  }
}

TEST_CASE("checkpoint round trip preserves evaluation bits") {
  Model model = tiny_model(ModelKind::mtl_cnlu_sawc);
  model.params().round_to_f32();
  TrainingConfig training;
  training.seed = 77;

  const std::string path = "model_test_checkpoint.bin";
  save_checkpoint(path, model, training);
  LoadedCheckpoint loaded = load_checkpoint(path);
  CHECK(loaded.training_config.seed == 77);
  CHECK(loaded.model.kind() == ModelKind::mtl_cnlu_sawc);
  CHECK(loaded.model.catalog() == model.catalog());

  auto example = model.encode_example("hello there", record_a());
  auto a = model.forward({example}, ForwardOptions{});
  auto b = loaded.model.forward({loaded.model.encode_example("hello there", record_a())},
                                ForwardOptions{});
  CHECK(rows_equal(a.utterance_logits->val, b.utterance_logits->val, 0, 0));
  CHECK(rows_equal(a.conversation_logits->val, b.conversation_logits->val, 0, 0));

  // Save -> load -> save is byte-identical.
  const std::string path2 = "model_test_checkpoint2.bin";
  save_checkpoint(path2, loaded.model, loaded.training_config);
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::stringstream s1, s2;
  s1 << f1.rdbuf();
  s2 << f2.rdbuf();
  CHECK(s1.str() == s2.str());
  std::remove(path.c_str());
  std::remove(path2.c_str());
}
