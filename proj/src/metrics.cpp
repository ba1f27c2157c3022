#include "cnlu/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace cnlu {

F1Result f1_scores(const std::vector<int>& predictions, const std::vector<int>& labels,
                   int num_classes) {
  if (predictions.empty() || predictions.size() != labels.size()) {
    throw std::invalid_argument("f1_scores: need equal-length nonempty sequences");
  }
  std::vector<int64_t> tp(static_cast<size_t>(num_classes), 0);
  std::vector<int64_t> fp(static_cast<size_t>(num_classes), 0);
  std::vector<int64_t> fn(static_cast<size_t>(num_classes), 0);
  int64_t correct = 0;
  for (size_t i = 0; i < predictions.size(); ++i) {
    const int p = predictions[i], y = labels[i];
    if (p < 0 || p >= num_classes || y < 0 || y >= num_classes) {
      throw std::invalid_argument("f1_scores: class index out of range");
    }
    if (p == y) {
      ++correct;
      ++tp[static_cast<size_t>(p)];
    } else {
      ++fp[static_cast<size_t>(p)];
      ++fn[static_cast<size_t>(y)];
    }
  }

  F1Result result;
  // Pooled counts: in single-label classification every error is one false
  // positive and one false negative, so micro-F1 reduces to accuracy.
  result.micro = static_cast<double>(correct) / static_cast<double>(predictions.size());

  double sum = 0.0;
  int active = 0;
  for (int c = 0; c < num_classes; ++c) {
    const int64_t t = tp[static_cast<size_t>(c)];
    const int64_t denom_p = t + fp[static_cast<size_t>(c)];
    const int64_t denom_r = t + fn[static_cast<size_t>(c)];
    if (denom_p == 0 && denom_r == 0) continue;  // neither labeled nor predicted
    ++active;
    if (t > 0) {
      const double precision = static_cast<double>(t) / static_cast<double>(denom_p);
      const double recall = static_cast<double>(t) / static_cast<double>(denom_r);
      sum += 2.0 * precision * recall / (precision + recall);
    }
  }
  result.macro = active > 0 ? sum / active : 0.0;
  return result;
}

double top2_score(const std::string& y_u, const std::string& y_c, const std::string& y1,
                  const std::string& y2) {
  if (y_u == y_c) {
    return (y1 == y_u || y2 == y_u) ? 1.0 : 0.0;
  }
  // Distinct labels: count how many of {y_u, y_c} the prediction set covers.
  // A duplicated prediction covers one label at most.
  int covered = 0;
  if (y1 == y_u || y2 == y_u) ++covered;
  if (y1 == y_c || y2 == y_c) ++covered;
  if (covered == 2) return 1.0;
  if (covered == 1) return 0.5;
  return 0.0;
}

namespace {

HeadReport build_head_report(const std::vector<int>& predictions, const std::vector<int>& labels,
                             const std::vector<std::string>& intents) {
  const int n = static_cast<int>(intents.size());
  HeadReport report;
  const F1Result f1 = f1_scores(predictions, labels, n);
  report.micro_f1 = f1.micro;
  report.macro_f1 = f1.macro;

  report.confusion.assign(static_cast<size_t>(n), std::vector<int64_t>(static_cast<size_t>(n), 0));
  for (size_t i = 0; i < predictions.size(); ++i) {
    ++report.confusion[static_cast<size_t>(labels[i])][static_cast<size_t>(predictions[i])];
  }
  for (int c = 0; c < n; ++c) {
    PerIntentStats s;
    s.intent = intents[static_cast<size_t>(c)];
    int64_t tp = report.confusion[static_cast<size_t>(c)][static_cast<size_t>(c)];
    for (int j = 0; j < n; ++j) {
      s.support += report.confusion[static_cast<size_t>(c)][static_cast<size_t>(j)];
      s.predicted += report.confusion[static_cast<size_t>(j)][static_cast<size_t>(c)];
    }
    s.precision = s.predicted > 0 ? static_cast<double>(tp) / static_cast<double>(s.predicted) : 0.0;
    s.recall = s.support > 0 ? static_cast<double>(tp) / static_cast<double>(s.support) : 0.0;
    s.f1 = (s.precision + s.recall) > 0.0
               ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
               : 0.0;
    report.per_intent.push_back(std::move(s));
  }
  return report;
}

}  // namespace

EvalReport evaluate(const Model& model, const std::vector<LabeledExample>& examples) {
  if (examples.empty()) throw std::invalid_argument("evaluate: empty dataset");
  const IntentCatalog& catalog = model.catalog();

  std::vector<int> u_preds, u_labels, c_preds, c_labels;
  double top2_sum = 0.0;

  constexpr size_t kEvalBatch = 64;
  std::vector<EncodedExample> batch;
  std::vector<const LabeledExample*> batch_refs;
  EvalReport report;
  report.num_examples = static_cast<int64_t>(examples.size());

  const auto flush = [&] {
    if (batch.empty()) return;
    const std::vector<DualPrediction> preds = model.predict(batch);
    for (size_t i = 0; i < preds.size(); ++i) {
      const LabeledExample& e = *batch_refs[i];
      const int yu = catalog.utterance_index(e.utterance_label);
      const int yc = catalog.conversation_index(e.conversation_label);
      if (yu < 0 || yc < 0) {
        throw std::invalid_argument("evaluate: label '" +
                                    (yu < 0 ? e.utterance_label : e.conversation_label) +
                                    "' is not in the model catalog");
      }
      u_preds.push_back(preds[i].utterance_top);
      u_labels.push_back(yu);
      if (preds[i].conversation_top >= 0) {
        c_preds.push_back(preds[i].conversation_top);
        c_labels.push_back(yc);
      }
      top2_sum += top2_score(e.utterance_label, e.conversation_label, preds[i].y1, preds[i].y2);
    }
    batch.clear();
    batch_refs.clear();
  };

  for (const LabeledExample& e : examples) {
    batch.push_back(model.encode_example(e));
    batch_refs.push_back(&e);
    if (batch.size() == kEvalBatch) flush();
  }
  flush();

  report.utterance = build_head_report(u_preds, u_labels, catalog.utterance_intents);
  if (!c_preds.empty()) {
    report.conversation = build_head_report(c_preds, c_labels, catalog.conversation_intents);
  }
  report.mean_top2 = top2_sum / static_cast<double>(examples.size());
  return report;
}

namespace {

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}

}  // namespace

std::string EvalReport::to_csv() const {
  std::ostringstream os;
  os << "section,name,value\n";
  os << "summary,num_examples," << num_examples << "\n";
  os << "summary,utterance_micro_f1," << pct(utterance.micro_f1) << "\n";
  os << "summary,utterance_macro_f1," << pct(utterance.macro_f1) << "\n";
  os << "summary,conversation_micro_f1," << (conversation ? pct(conversation->micro_f1) : "-")
     << "\n";
  os << "summary,conversation_macro_f1," << (conversation ? pct(conversation->macro_f1) : "-")
     << "\n";
  os << "summary,top2_score," << pct(mean_top2) << "\n";
  const auto emit_head = [&os](const char* head, const HeadReport& r) {
    for (const PerIntentStats& s : r.per_intent) {
      os << head << "_intent," << s.intent << "," << pct(s.f1) << "\n";
    }
  };
  emit_head("utterance", utterance);
  if (conversation) emit_head("conversation", *conversation);
  return os.str();
}

std::string EvalReport::to_table() const {
  std::ostringstream os;
  os << std::left << std::setw(28) << "metric" << std::right << std::setw(10) << "value"
     << "\n";
  const auto line = [&os](const std::string& name, const std::string& value) {
    os << std::left << std::setw(28) << name << std::right << std::setw(10) << value << "\n";
  };
  line("examples", std::to_string(num_examples));
  line("utterance micro F1 (%)", pct(utterance.micro_f1));
  line("utterance macro F1 (%)", pct(utterance.macro_f1));
  line("conversation micro F1 (%)", conversation ? pct(conversation->micro_f1) : "-");
  line("conversation macro F1 (%)", conversation ? pct(conversation->macro_f1) : "-");
  line("top 2 score (%)", pct(mean_top2));
  return os.str();
}

}  // namespace cnlu
