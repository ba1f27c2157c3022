#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cnlu/autodiff.hpp"
#include "cnlu/tensor.hpp"

namespace cnlu {

enum class CancelledBy { none, store, customer, other };
const char* cancelled_by_name(CancelledBy c);
CancelledBy cancelled_by_from_name(const std::string& name);

// Item-level facts for one order line at chat time. Timestamps are epoch
// seconds; absent means the event has not happened.
struct ItemRecord {
  std::optional<int64_t> delivered_at;
  std::optional<int64_t> shipped_at;
  std::optional<int64_t> expected_delivery_at;
  bool substituted = false;
  CancelledBy cancelled_by = CancelledBy::none;
  bool return_initiated = false;
};

// Raw order + item facts for one customer order at chat time.
struct TransactionRecord {
  int64_t order_placed_at = 0;
  int64_t chat_at = 0;
  std::string fulfillment_type;
  std::string cancellation_reason;  // empty when the order was not cancelled
  std::string store_indicator;
  std::vector<ItemRecord> items;
};

// Canonical ordering of the 18 scalar context features: 3 numericals first,
// then the binary flags. This order is the layout of the context vector and
// must stay stable.
inline constexpr int kNumScalarFeatures = 18;
inline constexpr int kNumNumericalFeatures = 3;
inline constexpr int kNumCategoricalFeatures = 3;

extern const std::array<const char*, kNumScalarFeatures> kScalarFeatureNames;
extern const std::array<const char*, kNumCategoricalFeatures> kCategoricalFeatureNames;

struct RawFeatures {
  double hours_since_order_placement = 0.0;
  std::optional<double> hours_since_last_delivered;
  std::optional<double> hours_since_last_shipped;

  bool any_items_left_to_deliver = false;
  bool all_items_left_to_deliver = false;
  bool any_items_left_to_ship = false;
  bool all_items_left_to_ship = false;
  bool any_items_past_expected_delivery = false;
  bool all_items_past_expected_delivery = false;
  bool any_items_substituted = false;
  bool any_items_cancelled_by_store = false;
  bool all_items_cancelled_by_store = false;
  bool any_items_cancelled_by_customer = false;
  bool all_items_cancelled_by_customer = false;
  bool any_items_cancelled_by_other = false;
  bool all_items_cancelled_by_other = false;
  bool any_returns_initiated = false;
  bool all_returns_initiated = false;

  std::string fulfillment_type;
  std::string cancellation_reason;  // empty = missing
  std::string store_indicator;

  // Slots in canonical order; the two item-time numericals may be missing.
  std::array<std::optional<double>, kNumScalarFeatures> scalar_slots() const;
};

// Derives the Table-2 style features from one record. Rejects records whose
// timestamps are out of order with a field-level diagnostic.
RawFeatures derive_raw_features(const TransactionRecord& record);

// Min-max bounds and imputation value for each numerical feature, fitted on
// training data only.
struct NormalizationStats {
  std::array<double, kNumNumericalFeatures> min{};
  std::array<double, kNumNumericalFeatures> max{};
  std::array<double, kNumNumericalFeatures> median{};  // imputation value
};

NormalizationStats fit_normalization(const std::vector<RawFeatures>& train_features);

// Imputes missing numericals with the training median, min-max normalizes
// them (degenerate range maps to 0), clamps to [0,1], and passes binary
// flags through.
std::array<double, kNumScalarFeatures> normalize_features(const RawFeatures& raw,
                                                          const NormalizationStats& stats);

// Level -> index map for one categorical feature. Index 0 is the reserved
// unknown row; missing and out-of-vocabulary codes land there.
struct CategoricalVocab {
  static constexpr int kUnknownIndex = 0;
  std::vector<std::string> levels;  // levels[0] == "<unk>"

  static CategoricalVocab build(const std::vector<std::string>& observed_codes);
  int lookup(const std::string& code) const;
  int size() const { return static_cast<int>(levels.size()); }
};

struct FeaturizerVocabs {
  CategoricalVocab fulfillment;
  CategoricalVocab cancellation;
  CategoricalVocab store;

  static FeaturizerVocabs build(const std::vector<RawFeatures>& train_features);
};

// Returns the learnable embedding row for a categorical code; unseen codes
// map to the unknown row, never an error.
ad::Value encode_categorical(const std::string& code, const CategoricalVocab& vocab,
                             const ad::Value& table);

// Ablation mask: false entries are zeroed out of the context vector.
struct FeatureMask {
  std::array<bool, kNumScalarFeatures> keep_scalar;
  std::array<bool, kNumCategoricalFeatures> keep_categorical;

  FeatureMask();  // keeps everything
  bool is_full() const;

  // Comma list of feature names or group names (order_level, item_level,
  // handcrafted) to mask out. Unknown names are rejected.
  static FeatureMask parse(const std::string& masked_list);
  std::string masked_names() const;  // canonical comma list, empty if full
};

// Numeric context plus categorical row indices; the model turns this into a
// graph node so gradients reach the embedding tables.
struct FeaturizedContext {
  bool present = false;
  std::array<double, kNumScalarFeatures> scalars{};
  std::array<int, kNumCategoricalFeatures> categorical_index{};
};

FeaturizedContext featurize(const std::optional<TransactionRecord>& record,
                            const NormalizationStats& stats, const FeaturizerVocabs& vocabs,
                            const FeatureMask& mask);

// The assembled numeric context vector: [normalized scalars || categorical
// embedding rows]. Absent record -> all zeros with present=false.
struct ContextVector {
  std::vector<double> values;
  bool present = false;
};

ContextVector assemble_context(const std::optional<TransactionRecord>& record,
                               const NormalizationStats& stats, const FeaturizerVocabs& vocabs,
                               const std::array<const Tensor*, kNumCategoricalFeatures>& tables,
                               const FeatureMask& mask = FeatureMask());

}  // namespace cnlu
