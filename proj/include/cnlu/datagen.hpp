#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cnlu/dataset.hpp"
#include "cnlu/featurizer.hpp"
#include "cnlu/rng.hpp"

namespace cnlu {

// Order situations the synthetic transaction sampler can produce. Each one
// has a distinct feature signature so labels can be re-derived from a stored
// record.
enum class OrderState {
  in_transit,
  pre_ship,
  overdue,
  delivered_missing,
  store_cancelled,
  customer_cancelled,
  return_open,
  substituted,
};

const char* order_state_name(OrderState s);

// Recovers the state from derived features (fixed priority order). Inverse
// of sample_state_record for every record the generator emits.
OrderState classify_state(const RawFeatures& features);

// A synthetic transaction whose derived features classify back to `state`.
TransactionRecord sample_state_record(OrderState state, Rng& rng);

struct ScenarioLabels {
  std::string utterance;
  std::string conversation;
};

// One utterance family: fixed template strings, a context-state sampler and
// a total label rule over (context present/absent, state).
struct Scenario {
  std::string name;
  std::vector<std::string> templates;
  bool requires_context = false;  // non-flow families carry no contextless signal
  double weight = 0.0;            // share of the corpus
  // State mix for context examples. Entries marked dialed scale with the
  // distinct-labels dial; the filler state absorbs the remainder.
  struct StateWeight {
    OrderState state;
    double weight;
    bool dialed = false;
  };
  std::vector<StateWeight> states;
  OrderState filler_state = OrderState::in_transit;
  std::map<OrderState, ScenarioLabels> state_labels;
  ScenarioLabels contextless_labels;  // conversation == utterance by construction

  ScenarioLabels labels_for(const std::optional<RawFeatures>& features) const;
  bool is_distinct(OrderState state) const;
};

// The built-in scenario set: 12 utterance intents (4 non-flow, 8 flow), 8
// conversation intents.
const std::vector<Scenario>& default_scenarios();
const Scenario& find_scenario(const std::string& name);
IntentCatalog catalog_for(const std::vector<Scenario>& scenarios);

struct DatasetManifest {
  int train_count = 10000;
  int validation_count = 1000;
  int test_count = 1000;
  double context_fraction = 0.70;
  double distinct_fraction = 0.45;
  double noise_fraction = 0.05;
  // Expected catalog sizes; 0 skips the check (scenario filters shrink the
  // catalog).
  int utterance_intent_count = 12;
  int conversation_intent_count = 8;
  uint64_t seed = 0;
  // Optional subset of scenario names; empty means all.
  std::vector<std::string> scenario_filter;
};

struct SplitStats {
  int64_t count = 0;
  double context_fraction = 0.0;
  double distinct_fraction = 0.0;
  std::map<std::string, int64_t> utterance_intent_counts;
  std::map<std::string, int64_t> conversation_intent_counts;
};

SplitStats compute_stats(const std::vector<LabeledExample>& examples);

struct GenerationReport {
  SplitStats combined;
  SplitStats train;
  SplitStats validation;
  SplitStats test;
  double solved_context_prob = 0.0;  // context probability for optional-context scenarios
  double solved_distinct_dial = 0.0;
  std::string summary() const;
};

// Writes train/validation/test.jsonl, catalog.json and manifest.json into
// out_dir. Deterministic for a fixed manifest. Rejects manifests whose
// fractions the scenario set cannot reach, before writing anything.
GenerationReport generate_dataset(const DatasetManifest& manifest, const std::string& out_dir);

struct VerifyReport {
  bool ok = false;
  std::vector<std::string> violations;  // one line per offending example
  SplitStats combined;
  int64_t noisy_examples = 0;
  bool matches_manifest_targets = false;  // realized within +/-2 points
  std::string summary() const;
};

// Re-derives every example's labels from its stored transaction through the
// scenario rules (noise-flipped examples are looked up in the manifest) and
// recomputes the dataset statistics.
VerifyReport verify_dataset(const std::string& dir);

// Probe generators for targeted evaluations: n examples of one scenario
// pinned to one state.
std::vector<LabeledExample> sample_scenario_examples(const std::string& scenario_name,
                                                     OrderState state, int n, uint64_t seed);

}  // namespace cnlu
