#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "cnlu/featurizer.hpp"
#include "cnlu/params.hpp"
#include "cnlu/rng.hpp"

using namespace cnlu;

namespace {

constexpr int64_t kHour = 3600;
constexpr int64_t kChat = 1800000000;

TransactionRecord base_record(int num_items) {
  TransactionRecord r;
  r.chat_at = kChat;
  r.order_placed_at = kChat - 48 * kHour;
  r.fulfillment_type = "shipping";
  r.store_indicator = "store_a";
  r.items.resize(static_cast<size_t>(num_items));
  return r;
}

TransactionRecord random_record(Rng& rng) {
  const int n = static_cast<int>(rng.uniform_int(1, 6));
  TransactionRecord r = base_record(n);
  r.order_placed_at = kChat - rng.uniform_int(1, 200) * kHour;
  const char* fulfillments[] = {"shipping", "delivery", "pickup"};
  r.fulfillment_type = fulfillments[rng.uniform_int(0, 2)];
  if (rng.uniform01() < 0.3) r.cancellation_reason = "out_of_stock";
  for (auto& item : r.items) {
    if (rng.uniform01() < 0.7) {
      item.shipped_at =
          std::min(r.order_placed_at + rng.uniform_int(1, 24) * kHour, r.chat_at);
      if (rng.uniform01() < 0.6) {
        item.delivered_at =
            std::min(*item.shipped_at + rng.uniform_int(0, 48) * kHour, r.chat_at);
      }
    }
    if (rng.uniform01() < 0.5) {
      item.expected_delivery_at = r.order_placed_at + rng.uniform_int(12, 96) * kHour;
    }
    item.substituted = rng.uniform01() < 0.15;
    if (rng.uniform01() < 0.2) {
      const CancelledBy opts[] = {CancelledBy::store, CancelledBy::customer, CancelledBy::other};
      item.cancelled_by = opts[rng.uniform_int(0, 2)];
    }
    item.return_initiated = rng.uniform01() < 0.1;
  }
  return r;
}

}  // namespace

TEST_CASE("delivery flags follow the count comparison") {
  TransactionRecord r = base_record(5);
  for (int i = 0; i < 3; ++i) {
    r.items[static_cast<size_t>(i)].shipped_at = r.order_placed_at + 2 * kHour;
    r.items[static_cast<size_t>(i)].delivered_at = r.order_placed_at + 20 * kHour;
  }
  RawFeatures f = derive_raw_features(r);
  CHECK(f.any_items_left_to_deliver);
  CHECK_FALSE(f.all_items_left_to_deliver);

  for (int i = 3; i < 5; ++i) {
    r.items[static_cast<size_t>(i)].shipped_at = r.order_placed_at + 2 * kHour;
    r.items[static_cast<size_t>(i)].delivered_at = r.order_placed_at + 22 * kHour;
  }
  f = derive_raw_features(r);
  CHECK_FALSE(f.any_items_left_to_deliver);
}

TEST_CASE("time features are plain hour differences") {
  TransactionRecord r = base_record(1);
  r.order_placed_at = kChat - 26 * kHour;
  RawFeatures f = derive_raw_features(r);
  CHECK(f.hours_since_order_placement == doctest::Approx(26.0));
  CHECK_FALSE(f.hours_since_last_delivered.has_value());
  CHECK_FALSE(f.hours_since_last_shipped.has_value());
}

TEST_CASE("out-of-order timestamps are rejected with a field diagnostic") {
  TransactionRecord r = base_record(1);
  r.chat_at = r.order_placed_at - 1;
  CHECK_THROWS_WITH_AS(derive_raw_features(r),
                       "transaction record rejected: chat_at: chat happens before order_placed_at",
                       std::invalid_argument);

  r = base_record(1);
  r.items[0].shipped_at = kChat - kHour;
  r.items[0].delivered_at = kChat - 2 * kHour;
  CHECK_THROWS_WITH_AS(
      derive_raw_features(r),
      "transaction record rejected: items[0].delivered_at: delivery precedes shipment",
      std::invalid_argument);

  r = base_record(1);
  CHECK_NOTHROW(derive_raw_features(r));
  r.items.clear();
  CHECK_THROWS_AS(derive_raw_features(r), std::invalid_argument);
}

TEST_CASE("min-max normalization with imputation and clamping") {
  std::vector<RawFeatures> train(3);
  train[0].hours_since_order_placement = 2.0;
  train[1].hours_since_order_placement = 4.0;
  train[2].hours_since_order_placement = 10.0;
  NormalizationStats stats = fit_normalization(train);
  CHECK(stats.min[0] == 2.0);
  CHECK(stats.max[0] == 10.0);
  CHECK(stats.median[0] == 4.0);

  RawFeatures probe;
  probe.hours_since_order_placement = 4.0;
  CHECK(normalize_features(probe, stats)[0] == doctest::Approx(0.25));

  probe.hours_since_order_placement = 50.0;  // above training max -> clamp
  CHECK(normalize_features(probe, stats)[0] == 1.0);
  probe.hours_since_order_placement = 0.5;  // below training min -> clamp
  CHECK(normalize_features(probe, stats)[0] == 0.0);

  // Missing numericals impute the training median before normalization.
  probe = RawFeatures{};
  probe.hours_since_order_placement = 2.0;
  CHECK_FALSE(probe.hours_since_last_delivered.has_value());
  const auto normalized = normalize_features(probe, stats);
  CHECK(normalized[1] == 0.0);  // degenerate range on an unobserved feature
}

TEST_CASE("single training example maps every numerical to zero") {
  std::vector<RawFeatures> train(1);
  train[0].hours_since_order_placement = 7.5;
  train[0].hours_since_last_delivered = 3.0;
  NormalizationStats stats = fit_normalization(train);
  const auto normalized = normalize_features(train[0], stats);
  for (int i = 0; i < kNumNumericalFeatures; ++i) CHECK(normalized[static_cast<size_t>(i)] == 0.0);
}

TEST_CASE("fit_normalization rejects an empty training set") {
  CHECK_THROWS_AS(fit_normalization({}), std::invalid_argument);
}

TEST_CASE("categorical encoding is a table lookup with an unknown row") {
  CategoricalVocab vocab = CategoricalVocab::build({"delivery", "pickup", "delivery"});
  CHECK(vocab.size() == 3);  // unknown + 2 levels
  CHECK(vocab.lookup("delivery") == vocab.lookup("delivery"));
  CHECK(vocab.lookup("never_seen") == CategoricalVocab::kUnknownIndex);
  CHECK(vocab.lookup("") == CategoricalVocab::kUnknownIndex);

  Rng rng(4);
  auto table = ad::param(init_embedding(vocab.size(), 25, rng), "emb");
  auto row_a = encode_categorical("pickup", vocab, table);
  auto row_b = encode_categorical("pickup", vocab, table);
  REQUIRE(row_a->val.cols == 25);
  for (int64_t j = 0; j < 25; ++j) CHECK(row_a->val.at(0, j) == row_b->val.at(0, j));

  auto unk = encode_categorical("never_seen", vocab, table);
  for (int64_t j = 0; j < 25; ++j) {
    CHECK(unk->val.at(0, j) == table->val.at(CategoricalVocab::kUnknownIndex, j));
  }
}

TEST_CASE("three 25-dim categorical embeddings fill the 93-dim layout") {
  // 93 total minus 18 scalars leaves 75 = 3 x 25.
  CHECK(93 - kNumScalarFeatures == 75);
  CHECK(75 / kNumCategoricalFeatures == 25);
}

TEST_CASE("assemble_context produces the 93-dim vector") {
  Rng rng(9);
  std::vector<RawFeatures> train;
  for (int i = 0; i < 50; ++i) train.push_back(derive_raw_features(random_record(rng)));
  NormalizationStats stats = fit_normalization(train);
  FeaturizerVocabs vocabs = FeaturizerVocabs::build(train);

  Tensor t1 = init_embedding(vocabs.fulfillment.size(), 25, rng);
  Tensor t2 = init_embedding(vocabs.cancellation.size(), 25, rng);
  Tensor t3 = init_embedding(vocabs.store.size(), 25, rng);
  const std::array<const Tensor*, 3> tables = {&t1, &t2, &t3};

  SUBCASE("absent record gives zeros with present=false") {
    ContextVector c = assemble_context(std::nullopt, stats, vocabs, tables);
    CHECK(c.values.size() == 93);
    CHECK_FALSE(c.present);
    for (double v : c.values) CHECK(v == 0.0);
  }

  SUBCASE("present record gives length 93 with scalar slots in [0,1]") {
    for (int trial = 0; trial < 30; ++trial) {
      ContextVector c = assemble_context(random_record(rng), stats, vocabs, tables);
      CHECK(c.values.size() == 93);
      CHECK(c.present);
      for (int i = 0; i < kNumScalarFeatures; ++i) {
        CHECK(c.values[static_cast<size_t>(i)] >= 0.0);
        CHECK(c.values[static_cast<size_t>(i)] <= 1.0);
      }
    }
  }

  SUBCASE("composition order is scalars then categoricals in declared order") {
    TransactionRecord r = base_record(2);
    ContextVector c = assemble_context(r, stats, vocabs, tables);
    const int f_row = vocabs.fulfillment.lookup(r.fulfillment_type);
    const int s_row = vocabs.store.lookup(r.store_indicator);
    for (int64_t j = 0; j < 25; ++j) {
      CHECK(c.values[18 + static_cast<size_t>(j)] == t1.at(f_row, j));
      CHECK(c.values[18 + 50 + static_cast<size_t>(j)] == t3.at(s_row, j));
    }
  }
}

TEST_CASE("all-X implies any-X and flags match a brute-force recount") {
  Rng rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const TransactionRecord r = random_record(rng);
    const RawFeatures f = derive_raw_features(r);

    // Independent recount straight off the items list.
    const size_t n = r.items.size();
    size_t delivered = 0, shipped = 0, store_c = 0, cust_c = 0, other_c = 0, ret = 0, past = 0;
    for (const auto& it : r.items) {
      delivered += it.delivered_at.has_value();
      shipped += it.shipped_at.has_value();
      store_c += it.cancelled_by == CancelledBy::store;
      cust_c += it.cancelled_by == CancelledBy::customer;
      other_c += it.cancelled_by == CancelledBy::other;
      ret += it.return_initiated;
      past += it.expected_delivery_at && !it.delivered_at && r.chat_at > *it.expected_delivery_at;
    }
    CHECK(f.any_items_left_to_deliver == (delivered < n));
    CHECK(f.all_items_left_to_deliver == (delivered == 0));
    CHECK(f.any_items_left_to_ship == (shipped < n));
    CHECK(f.all_items_left_to_ship == (shipped == 0));
    CHECK(f.any_items_past_expected_delivery == (past > 0));
    CHECK(f.all_items_past_expected_delivery == (past == n));
    CHECK(f.any_items_cancelled_by_store == (store_c > 0));
    CHECK(f.all_items_cancelled_by_store == (store_c == n));
    CHECK(f.any_returns_initiated == (ret > 0));
    CHECK(f.all_returns_initiated == (ret == n));

    // all-X => any-X for every pair.
    const auto slots = f.scalar_slots();
    const int pairs[][2] = {{4, 3}, {6, 5}, {8, 7}, {11, 10}, {13, 12}, {15, 14}, {17, 16}};
    for (const auto& p : pairs) {
      if (*slots[static_cast<size_t>(p[0])] == 1.0) CHECK(*slots[static_cast<size_t>(p[1])] == 1.0);
    }
  }
}

TEST_CASE("normalization is monotone per feature") {
  Rng rng(13);
  std::vector<RawFeatures> train(20);
  for (auto& f : train) f.hours_since_order_placement = rng.uniform(0.0, 100.0);
  NormalizationStats stats = fit_normalization(train);
  double prev = -1.0;
  for (double raw = -10.0; raw < 150.0; raw += 1.7) {
    RawFeatures f;
    f.hours_since_order_placement = raw;
    const double v = normalize_features(f, stats)[0];
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("feature masks parse names and groups") {
  FeatureMask full;
  CHECK(full.is_full());
  CHECK(full.masked_names().empty());

  FeatureMask hand = FeatureMask::parse("handcrafted");
  CHECK_FALSE(hand.keep_scalar[3]);
  CHECK_FALSE(hand.keep_scalar[17]);
  CHECK(hand.keep_scalar[0]);
  CHECK(hand.keep_categorical[0]);

  FeatureMask order = FeatureMask::parse("order_level");
  CHECK_FALSE(order.keep_scalar[0]);
  CHECK(order.keep_scalar[1]);
  CHECK_FALSE(order.keep_categorical[0]);
  CHECK_FALSE(order.keep_categorical[2]);

  FeatureMask single = FeatureMask::parse("any_items_left_to_deliver, store_indicator");
  CHECK_FALSE(single.keep_scalar[3]);
  CHECK_FALSE(single.keep_categorical[2]);
  CHECK(single.masked_names() == "any_items_left_to_deliver,store_indicator");

  CHECK_THROWS_AS(FeatureMask::parse("no_such_feature"), std::invalid_argument);
}

TEST_CASE("masked features are zeroed in the assembled context") {
  Rng rng(17);
  std::vector<RawFeatures> train;
  for (int i = 0; i < 30; ++i) train.push_back(derive_raw_features(random_record(rng)));
  NormalizationStats stats = fit_normalization(train);
  FeaturizerVocabs vocabs = FeaturizerVocabs::build(train);
  Tensor t1 = init_embedding(vocabs.fulfillment.size(), 25, rng);
  Tensor t2 = init_embedding(vocabs.cancellation.size(), 25, rng);
  Tensor t3 = init_embedding(vocabs.store.size(), 25, rng);
  const std::array<const Tensor*, 3> tables = {&t1, &t2, &t3};

  const FeatureMask mask = FeatureMask::parse("handcrafted,store_indicator");
  ContextVector c = assemble_context(random_record(rng), stats, vocabs, tables, mask);
  for (int i = kNumNumericalFeatures; i < kNumScalarFeatures; ++i) {
    CHECK(c.values[static_cast<size_t>(i)] == 0.0);
  }
  for (size_t j = 18 + 50; j < 93; ++j) CHECK(c.values[j] == 0.0);
}
