#include "cnlu/featurizer.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

namespace cnlu {

const std::array<const char*, kNumScalarFeatures> kScalarFeatureNames = {
    "hours_since_order_placement",
    "hours_since_last_delivered",
    "hours_since_last_shipped",
    "any_items_left_to_deliver",
    "all_items_left_to_deliver",
    "any_items_left_to_ship",
    "all_items_left_to_ship",
    "any_items_past_expected_delivery",
    "all_items_past_expected_delivery",
    "any_items_substituted",
    "any_items_cancelled_by_store",
    "all_items_cancelled_by_store",
    "any_items_cancelled_by_customer",
    "all_items_cancelled_by_customer",
    "any_items_cancelled_by_other",
    "all_items_cancelled_by_other",
    "any_returns_initiated",
    "all_returns_initiated",
};

const std::array<const char*, kNumCategoricalFeatures> kCategoricalFeatureNames = {
    "fulfillment_type",
    "cancellation_reason",
    "store_indicator",
};

const char* cancelled_by_name(CancelledBy c) {
  switch (c) {
    case CancelledBy::none: return "none";
    case CancelledBy::store: return "store";
    case CancelledBy::customer: return "customer";
    case CancelledBy::other: return "other";
  }
  return "none";
}

CancelledBy cancelled_by_from_name(const std::string& name) {
  if (name == "none") return CancelledBy::none;
  if (name == "store") return CancelledBy::store;
  if (name == "customer") return CancelledBy::customer;
  if (name == "other") return CancelledBy::other;
  throw std::invalid_argument("unknown cancelled_by value: " + name);
}

std::array<std::optional<double>, kNumScalarFeatures> RawFeatures::scalar_slots() const {
  return {
      hours_since_order_placement,
      hours_since_last_delivered,
      hours_since_last_shipped,
      double(any_items_left_to_deliver),
      double(all_items_left_to_deliver),
      double(any_items_left_to_ship),
      double(all_items_left_to_ship),
      double(any_items_past_expected_delivery),
      double(all_items_past_expected_delivery),
      double(any_items_substituted),
      double(any_items_cancelled_by_store),
      double(all_items_cancelled_by_store),
      double(any_items_cancelled_by_customer),
      double(all_items_cancelled_by_customer),
      double(any_items_cancelled_by_other),
      double(all_items_cancelled_by_other),
      double(any_returns_initiated),
      double(all_returns_initiated),
  };
}

namespace {

constexpr double kSecondsPerHour = 3600.0;

[[noreturn]] void record_error(const std::string& field, const std::string& what) {
  throw std::invalid_argument("transaction record rejected: " + field + ": " + what);
}

}  // namespace

RawFeatures derive_raw_features(const TransactionRecord& record) {
  if (record.chat_at < record.order_placed_at) {
    record_error("chat_at", "chat happens before order_placed_at");
  }
  if (record.items.empty()) {
    record_error("items", "a present record must contain at least one item");
  }

  const int64_t chat = record.chat_at;
  size_t delivered = 0, shipped = 0, past_expected = 0;
  size_t cancelled_store = 0, cancelled_customer = 0, cancelled_other = 0;
  size_t returns = 0;
  bool any_substituted = false;
  std::optional<int64_t> last_delivered, last_shipped;

  for (size_t i = 0; i < record.items.size(); ++i) {
    const ItemRecord& item = record.items[i];
    const std::string tag = "items[" + std::to_string(i) + "]";
    if (item.delivered_at && item.shipped_at && *item.delivered_at < *item.shipped_at) {
      record_error(tag + ".delivered_at", "delivery precedes shipment");
    }
    if (item.delivered_at && *item.delivered_at > chat) {
      record_error(tag + ".delivered_at", "event is after chat_at");
    }
    if (item.shipped_at && *item.shipped_at > chat) {
      record_error(tag + ".shipped_at", "event is after chat_at");
    }

    if (item.delivered_at) {
      ++delivered;
      last_delivered = std::max(last_delivered.value_or(*item.delivered_at), *item.delivered_at);
    }
    if (item.shipped_at) {
      ++shipped;
      last_shipped = std::max(last_shipped.value_or(*item.shipped_at), *item.shipped_at);
    }
    if (item.expected_delivery_at && !item.delivered_at && chat > *item.expected_delivery_at) {
      ++past_expected;
    }
    if (item.substituted) any_substituted = true;
    switch (item.cancelled_by) {
      case CancelledBy::store: ++cancelled_store; break;
      case CancelledBy::customer: ++cancelled_customer; break;
      case CancelledBy::other: ++cancelled_other; break;
      case CancelledBy::none: break;
    }
    if (item.return_initiated) ++returns;
  }

  const size_t n = record.items.size();
  RawFeatures f;
  f.hours_since_order_placement =
      static_cast<double>(chat - record.order_placed_at) / kSecondsPerHour;
  if (last_delivered) {
    f.hours_since_last_delivered = static_cast<double>(chat - *last_delivered) / kSecondsPerHour;
  }
  if (last_shipped) {
    f.hours_since_last_shipped = static_cast<double>(chat - *last_shipped) / kSecondsPerHour;
  }

  // "Any/all left" compare delivered and shipped counts to the ordered total.
  f.any_items_left_to_deliver = delivered < n;
  f.all_items_left_to_deliver = delivered == 0;
  f.any_items_left_to_ship = shipped < n;
  f.all_items_left_to_ship = shipped == 0;
  f.any_items_past_expected_delivery = past_expected > 0;
  f.all_items_past_expected_delivery = past_expected == n;
  f.any_items_substituted = any_substituted;
  f.any_items_cancelled_by_store = cancelled_store > 0;
  f.all_items_cancelled_by_store = cancelled_store == n;
  f.any_items_cancelled_by_customer = cancelled_customer > 0;
  f.all_items_cancelled_by_customer = cancelled_customer == n;
  f.any_items_cancelled_by_other = cancelled_other > 0;
  f.all_items_cancelled_by_other = cancelled_other == n;
  f.any_returns_initiated = returns > 0;
  f.all_returns_initiated = returns == n;

  f.fulfillment_type = record.fulfillment_type;
  f.cancellation_reason = record.cancellation_reason;
  f.store_indicator = record.store_indicator;
  return f;
}

NormalizationStats fit_normalization(const std::vector<RawFeatures>& train_features) {
  if (train_features.empty()) {
    throw std::invalid_argument("fit_normalization: empty training set");
  }
  NormalizationStats stats;
  for (int slot = 0; slot < kNumNumericalFeatures; ++slot) {
    std::vector<double> present;
    present.reserve(train_features.size());
    for (const RawFeatures& f : train_features) {
      const auto v = f.scalar_slots()[static_cast<size_t>(slot)];
      if (v) present.push_back(*v);
    }
    if (present.empty()) {
      // Never observed; the degenerate range rule maps everything to 0.
      stats.min[slot] = stats.max[slot] = stats.median[slot] = 0.0;
      continue;
    }
    std::sort(present.begin(), present.end());
    stats.min[slot] = present.front();
    stats.max[slot] = present.back();
    const size_t mid = present.size() / 2;
    stats.median[slot] =
        present.size() % 2 == 1 ? present[mid] : 0.5 * (present[mid - 1] + present[mid]);
  }
  return stats;
}

std::array<double, kNumScalarFeatures> normalize_features(const RawFeatures& raw,
                                                          const NormalizationStats& stats) {
  std::array<double, kNumScalarFeatures> out{};
  const auto slots = raw.scalar_slots();
  for (int i = 0; i < kNumScalarFeatures; ++i) {
    if (i < kNumNumericalFeatures) {
      const double v = slots[static_cast<size_t>(i)].value_or(stats.median[i]);
      const double range = stats.max[i] - stats.min[i];
      const double scale = range > 0.0 ? range : 1.0;
      out[static_cast<size_t>(i)] = std::clamp((v - stats.min[i]) / scale, 0.0, 1.0);
    } else {
      out[static_cast<size_t>(i)] = *slots[static_cast<size_t>(i)];
    }
  }
  return out;
}

CategoricalVocab CategoricalVocab::build(const std::vector<std::string>& observed_codes) {
  CategoricalVocab v;
  v.levels.push_back("<unk>");
  std::map<std::string, bool> seen;  // ordered, so the vocab layout is deterministic
  for (const std::string& code : observed_codes) {
    if (!code.empty()) seen[code] = true;
  }
  for (const auto& [code, _] : seen) v.levels.push_back(code);
  return v;
}

int CategoricalVocab::lookup(const std::string& code) const {
  if (code.empty()) return kUnknownIndex;
  for (size_t i = 1; i < levels.size(); ++i) {
    if (levels[i] == code) return static_cast<int>(i);
  }
  return kUnknownIndex;
}

FeaturizerVocabs FeaturizerVocabs::build(const std::vector<RawFeatures>& train_features) {
  std::vector<std::string> fulfillment, cancellation, store;
  for (const RawFeatures& f : train_features) {
    fulfillment.push_back(f.fulfillment_type);
    cancellation.push_back(f.cancellation_reason);
    store.push_back(f.store_indicator);
  }
  return {CategoricalVocab::build(fulfillment), CategoricalVocab::build(cancellation),
          CategoricalVocab::build(store)};
}

ad::Value encode_categorical(const std::string& code, const CategoricalVocab& vocab,
                             const ad::Value& table) {
  return ad::embedding_rows(table, {vocab.lookup(code)});
}

FeatureMask::FeatureMask() {
  keep_scalar.fill(true);
  keep_categorical.fill(true);
}

bool FeatureMask::is_full() const {
  return std::all_of(keep_scalar.begin(), keep_scalar.end(), [](bool b) { return b; }) &&
         std::all_of(keep_categorical.begin(), keep_categorical.end(), [](bool b) { return b; });
}

FeatureMask FeatureMask::parse(const std::string& masked_list) {
  FeatureMask mask;
  std::stringstream ss(masked_list);
  std::string token;
  while (std::getline(ss, token, ',')) {
    const auto b = token.find_first_not_of(" \t");
    const auto e = token.find_last_not_of(" \t");
    if (b == std::string::npos) continue;
    token = token.substr(b, e - b + 1);

    if (token == "order_level") {
      mask.keep_scalar[0] = false;
      mask.keep_categorical.fill(false);
      continue;
    }
    if (token == "item_level") {
      mask.keep_scalar[1] = mask.keep_scalar[2] = false;
      continue;
    }
    if (token == "handcrafted") {
      for (int i = kNumNumericalFeatures; i < kNumScalarFeatures; ++i) {
        mask.keep_scalar[static_cast<size_t>(i)] = false;
      }
      continue;
    }
    bool found = false;
    for (int i = 0; i < kNumScalarFeatures && !found; ++i) {
      if (token == kScalarFeatureNames[static_cast<size_t>(i)]) {
        mask.keep_scalar[static_cast<size_t>(i)] = false;
        found = true;
      }
    }
    for (int i = 0; i < kNumCategoricalFeatures && !found; ++i) {
      if (token == kCategoricalFeatureNames[static_cast<size_t>(i)]) {
        mask.keep_categorical[static_cast<size_t>(i)] = false;
        found = true;
      }
    }
    if (!found) {
      throw std::invalid_argument("feature mask: unknown feature or group '" + token + "'");
    }
  }
  return mask;
}

std::string FeatureMask::masked_names() const {
  std::string out;
  for (int i = 0; i < kNumScalarFeatures; ++i) {
    if (!keep_scalar[static_cast<size_t>(i)]) {
      if (!out.empty()) out += ",";
      out += kScalarFeatureNames[static_cast<size_t>(i)];
    }
  }
  for (int i = 0; i < kNumCategoricalFeatures; ++i) {
    if (!keep_categorical[static_cast<size_t>(i)]) {
      if (!out.empty()) out += ",";
      out += kCategoricalFeatureNames[static_cast<size_t>(i)];
    }
  }
  return out;
}

FeaturizedContext featurize(const std::optional<TransactionRecord>& record,
                            const NormalizationStats& stats, const FeaturizerVocabs& vocabs,
                            const FeatureMask& mask) {
  FeaturizedContext ctx;
  if (!record) return ctx;  // all zeros, present=false
  ctx.present = true;
  const RawFeatures raw = derive_raw_features(*record);
  ctx.scalars = normalize_features(raw, stats);
  for (int i = 0; i < kNumScalarFeatures; ++i) {
    if (!mask.keep_scalar[static_cast<size_t>(i)]) ctx.scalars[static_cast<size_t>(i)] = 0.0;
  }
  ctx.categorical_index = {vocabs.fulfillment.lookup(raw.fulfillment_type),
                           vocabs.cancellation.lookup(raw.cancellation_reason),
                           vocabs.store.lookup(raw.store_indicator)};
  return ctx;
}

ContextVector assemble_context(const std::optional<TransactionRecord>& record,
                               const NormalizationStats& stats, const FeaturizerVocabs& vocabs,
                               const std::array<const Tensor*, kNumCategoricalFeatures>& tables,
                               const FeatureMask& mask) {
  int64_t dim = kNumScalarFeatures;
  for (const Tensor* t : tables) dim += t->cols;

  ContextVector out;
  out.values.assign(static_cast<size_t>(dim), 0.0);
  if (!record) return out;

  const FeaturizedContext ctx = featurize(record, stats, vocabs, mask);
  out.present = true;
  size_t off = 0;
  for (int i = 0; i < kNumScalarFeatures; ++i) {
    out.values[off++] = ctx.scalars[static_cast<size_t>(i)];
  }
  for (int c = 0; c < kNumCategoricalFeatures; ++c) {
    const Tensor& table = *tables[static_cast<size_t>(c)];
    if (mask.keep_categorical[static_cast<size_t>(c)]) {
      const int row = ctx.categorical_index[static_cast<size_t>(c)];
      for (int64_t j = 0; j < table.cols; ++j) {
        out.values[off + static_cast<size_t>(j)] = table.at(row, j);
      }
    }
    off += static_cast<size_t>(table.cols);
  }
  return out;
}

}  // namespace cnlu
