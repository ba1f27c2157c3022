#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cnlu/featurizer.hpp"

namespace cnlu {

// One training/evaluation example. The utterance label captures the explicit
// intent; the conversation label the latent one.
struct LabeledExample {
  std::string utterance;
  std::optional<TransactionRecord> transaction;
  std::string utterance_label;
  std::string conversation_label;
};

struct IntentCatalog {
  std::vector<std::string> utterance_intents;
  std::vector<std::string> conversation_intents;
  std::vector<std::string> flow_intents;  // subset of utterance_intents

  void validate() const;  // uniqueness, sizes, flow subset
  int utterance_index(const std::string& name) const;     // -1 when absent
  int conversation_index(const std::string& name) const;  // -1 when absent
  bool is_flow(const std::string& utterance_intent) const;

  bool operator==(const IntentCatalog&) const = default;
};

struct Dataset {
  IntentCatalog catalog;
  std::vector<LabeledExample> train;
  std::vector<LabeledExample> validation;
  std::vector<LabeledExample> test;
};

// JSONL, one example per line:
// {"utterance": ..., "transaction": null | {...}, "utterance_label": ...,
//  "conversation_label": ...}
// Transaction timestamps are epoch seconds.
std::vector<LabeledExample> load_examples_jsonl(const std::string& path);
void save_examples_jsonl(const std::string& path, const std::vector<LabeledExample>& examples);
std::string example_to_jsonl_line(const LabeledExample& example);

IntentCatalog load_catalog_json(const std::string& path);
void save_catalog_json(const std::string& path, const IntentCatalog& catalog);

// Reads train.jsonl / validation.jsonl / test.jsonl / catalog.json from a
// directory and checks every label against the catalog.
Dataset load_dataset_dir(const std::string& dir);

}  // namespace cnlu
