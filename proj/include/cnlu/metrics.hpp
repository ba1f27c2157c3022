#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cnlu/dataset.hpp"
#include "cnlu/model.hpp"

namespace cnlu {

struct F1Result {
  double micro = 0.0;
  double macro = 0.0;
};

// Micro-F1 from pooled counts (equals accuracy for single-label data) and
// macro-F1 as the unweighted mean of per-class F1 over the classes that
// appear in labels or predictions; classes with neither are excluded.
F1Result f1_scores(const std::vector<int>& predictions, const std::vector<int>& labels,
                   int num_classes);

// Joint score of the predicted pair against both labels, in {0, 0.5, 1}.
// With distinct labels the pair is scored by how many of the two labels it
// covers as a set, so a duplicated prediction can cover at most one.
double top2_score(const std::string& y_u, const std::string& y_c, const std::string& y1,
                  const std::string& y2);

struct PerIntentStats {
  std::string intent;
  int64_t support = 0;
  int64_t predicted = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct HeadReport {
  double micro_f1 = 0.0;
  double macro_f1 = 0.0;
  std::vector<PerIntentStats> per_intent;
  std::vector<std::vector<int64_t>> confusion;  // [label][prediction]
};

struct EvalReport {
  int64_t num_examples = 0;
  HeadReport utterance;
  std::optional<HeadReport> conversation;  // absent for single-head models
  double mean_top2 = 0.0;

  std::string to_csv() const;
  std::string to_table() const;
};

// Runs the model over the labeled set in evaluation mode and aggregates all
// metrics. The dataset labels must belong to the model's catalog.
EvalReport evaluate(const Model& model, const std::vector<LabeledExample>& examples);

}  // namespace cnlu
