#include "cnlu/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace cnlu {

using ordered_json = nlohmann::ordered_json;

void IntentCatalog::validate() const {
  if (utterance_intents.size() < 2 || conversation_intents.size() < 2) {
    throw std::invalid_argument("intent catalog: need at least 2 intents per head");
  }
  const auto check_unique = [](const std::vector<std::string>& names, const char* what) {
    std::set<std::string> seen(names.begin(), names.end());
    if (seen.size() != names.size()) {
      throw std::invalid_argument(std::string("intent catalog: duplicate ") + what);
    }
  };
  check_unique(utterance_intents, "utterance intent");
  check_unique(conversation_intents, "conversation intent");
  for (const std::string& f : flow_intents) {
    if (utterance_index(f) < 0) {
      throw std::invalid_argument("intent catalog: flow intent '" + f +
                                  "' is not an utterance intent");
    }
  }
}

int IntentCatalog::utterance_index(const std::string& name) const {
  const auto it = std::find(utterance_intents.begin(), utterance_intents.end(), name);
  return it == utterance_intents.end() ? -1
                                       : static_cast<int>(it - utterance_intents.begin());
}

int IntentCatalog::conversation_index(const std::string& name) const {
  const auto it = std::find(conversation_intents.begin(), conversation_intents.end(), name);
  return it == conversation_intents.end()
             ? -1
             : static_cast<int>(it - conversation_intents.begin());
}

bool IntentCatalog::is_flow(const std::string& utterance_intent) const {
  return std::find(flow_intents.begin(), flow_intents.end(), utterance_intent) !=
         flow_intents.end();
}

namespace {

ordered_json item_to_json(const ItemRecord& item) {
  ordered_json j;
  j["delivered_at"] = item.delivered_at ? ordered_json(*item.delivered_at) : ordered_json(nullptr);
  j["shipped_at"] = item.shipped_at ? ordered_json(*item.shipped_at) : ordered_json(nullptr);
  j["expected_delivery_at"] = item.expected_delivery_at
                                  ? ordered_json(*item.expected_delivery_at)
                                  : ordered_json(nullptr);
  j["substituted"] = item.substituted;
  j["cancelled_by"] = cancelled_by_name(item.cancelled_by);
  j["return_initiated"] = item.return_initiated;
  return j;
}

ItemRecord item_from_json(const nlohmann::json& j) {
  ItemRecord item;
  if (!j.at("delivered_at").is_null()) item.delivered_at = j.at("delivered_at").get<int64_t>();
  if (!j.at("shipped_at").is_null()) item.shipped_at = j.at("shipped_at").get<int64_t>();
  if (!j.at("expected_delivery_at").is_null()) {
    item.expected_delivery_at = j.at("expected_delivery_at").get<int64_t>();
  }
  item.substituted = j.at("substituted").get<bool>();
  item.cancelled_by = cancelled_by_from_name(j.at("cancelled_by").get<std::string>());
  item.return_initiated = j.at("return_initiated").get<bool>();
  return item;
}

ordered_json transaction_to_json(const TransactionRecord& r) {
  ordered_json j;
  j["order_placed_at"] = r.order_placed_at;
  j["chat_at"] = r.chat_at;
  j["fulfillment_type"] = r.fulfillment_type;
  j["cancellation_reason"] =
      r.cancellation_reason.empty() ? ordered_json(nullptr) : ordered_json(r.cancellation_reason);
  j["store_indicator"] = r.store_indicator;
  ordered_json items = ordered_json::array();
  for (const ItemRecord& item : r.items) items.push_back(item_to_json(item));
  j["items"] = std::move(items);
  return j;
}

TransactionRecord transaction_from_json(const nlohmann::json& j) {
  TransactionRecord r;
  r.order_placed_at = j.at("order_placed_at").get<int64_t>();
  r.chat_at = j.at("chat_at").get<int64_t>();
  r.fulfillment_type = j.at("fulfillment_type").get<std::string>();
  if (!j.at("cancellation_reason").is_null()) {
    r.cancellation_reason = j.at("cancellation_reason").get<std::string>();
  }
  r.store_indicator = j.at("store_indicator").get<std::string>();
  for (const auto& item : j.at("items")) r.items.push_back(item_from_json(item));
  return r;
}

}  // namespace

std::string example_to_jsonl_line(const LabeledExample& example) {
  ordered_json j;
  j["utterance"] = example.utterance;
  j["transaction"] = example.transaction ? transaction_to_json(*example.transaction)
                                         : ordered_json(nullptr);
  j["utterance_label"] = example.utterance_label;
  j["conversation_label"] = example.conversation_label;
  return j.dump();
}

std::vector<LabeledExample> load_examples_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file " + path);
  std::vector<LabeledExample> out;
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      LabeledExample e;
      e.utterance = j.at("utterance").get<std::string>();
      if (!j.at("transaction").is_null()) {
        e.transaction = transaction_from_json(j.at("transaction"));
      }
      e.utterance_label = j.at("utterance_label").get<std::string>();
      e.conversation_label = j.at("conversation_label").get<std::string>();
      out.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad example: " +
                               ex.what());
    }
  }
  return out;
}

void save_examples_jsonl(const std::string& path, const std::vector<LabeledExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write dataset file " + path);
  for (const LabeledExample& e : examples) out << example_to_jsonl_line(e) << "\n";
}

IntentCatalog load_catalog_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open catalog file " + path);
  nlohmann::json j = nlohmann::json::parse(in);
  IntentCatalog c;
  c.utterance_intents = j.at("utterance_intents").get<std::vector<std::string>>();
  c.conversation_intents = j.at("conversation_intents").get<std::vector<std::string>>();
  c.flow_intents = j.at("flow_intents").get<std::vector<std::string>>();
  c.validate();
  return c;
}

void save_catalog_json(const std::string& path, const IntentCatalog& catalog) {
  ordered_json j;
  j["utterance_intents"] = catalog.utterance_intents;
  j["conversation_intents"] = catalog.conversation_intents;
  j["flow_intents"] = catalog.flow_intents;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write catalog file " + path);
  out << j.dump(2) << "\n";
}

Dataset load_dataset_dir(const std::string& dir) {
  Dataset d;
  d.catalog = load_catalog_json(dir + "/catalog.json");
  d.train = load_examples_jsonl(dir + "/train.jsonl");
  d.validation = load_examples_jsonl(dir + "/validation.jsonl");
  d.test = load_examples_jsonl(dir + "/test.jsonl");
  for (const auto* split : {&d.train, &d.validation, &d.test}) {
    for (const LabeledExample& e : *split) {
      if (d.catalog.utterance_index(e.utterance_label) < 0) {
        throw std::runtime_error("dataset: utterance label '" + e.utterance_label +
                                 "' is not in the catalog");
      }
      if (d.catalog.conversation_index(e.conversation_label) < 0) {
        throw std::runtime_error("dataset: conversation label '" + e.conversation_label +
                                 "' is not in the catalog");
      }
    }
  }
  return d;
}

}  // namespace cnlu
