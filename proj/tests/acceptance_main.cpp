// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// fails. Heavy model training is shared across criteria; run with
// --only N[,M...] to execute a subset during development.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <vector>

#include "cnlu/checkpoint.hpp"
#include "cnlu/datagen.hpp"
#include "cnlu/metrics.hpp"
#include "cnlu/training.hpp"

using namespace cnlu;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int id;
  std::string name;
  bool pass;
  std::string detail;
};

std::vector<Outcome> outcomes;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  outcomes.push_back({id, name, pass, detail});
  std::cout << (pass ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": " << detail << "\n"
            << std::flush;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(double v, int digits = 2) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Criterion 1: top-2 oracle equivalence on all 256 combinations.

// Direct interpreter of the published scoring procedure. The conjunction is
// evaluated with match consumption, so a duplicated prediction can satisfy
// only one membership test.
double top2_reference(const std::string& y_u, const std::string& y_c, const std::string& y1,
                      const std::string& y2) {
  if (y_u == y_c) {
    if (y1 == y_u || y2 == y_u) return 1.0;
    return 0.0;
  }
  std::vector<std::string> pool = {y_u, y_c};
  const auto take = [&pool](const std::string& candidate) {
    for (auto it = pool.begin(); it != pool.end(); ++it) {
      if (*it == candidate) {
        pool.erase(it);
        return true;
      }
    }
    return false;
  };
  const bool first = take(y1);
  const bool second = take(y2);
  if (first && second) return 1.0;
  if (first || second) return 0.5;
  return 0.0;
}

void criterion_1() {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::string> alphabet = {"A", "B", "C", "D"};
  int mismatches = 0, cases = 0;
  for (const auto& yu : alphabet) {
    for (const auto& yc : alphabet) {
      for (const auto& y1 : alphabet) {
        for (const auto& y2 : alphabet) {
          ++cases;
          if (top2_score(yu, yc, y1, y2) != top2_reference(yu, yc, y1, y2)) ++mismatches;
        }
      }
    }
  }
  const double elapsed = seconds_since(start);
  report(1, "top-2 oracle equivalence", mismatches == 0 && cases == 256 && elapsed < 1.0,
         std::to_string(cases - mismatches) + "/256 exact, " + fmt(elapsed, 3) + " s");
}

// ---------------------------------------------------------------------------
// Criterion 2: micro/macro F1 vs a brute-force confusion-matrix oracle.

F1Result f1_reference(const std::vector<int>& preds, const std::vector<int>& labels,
                      int classes) {
  std::vector<std::vector<int64_t>> cm(static_cast<size_t>(classes),
                                       std::vector<int64_t>(static_cast<size_t>(classes), 0));
  for (size_t i = 0; i < preds.size(); ++i) {
    ++cm[static_cast<size_t>(labels[i])][static_cast<size_t>(preds[i])];
  }
  int64_t diag = 0;
  double macro = 0.0;
  int active = 0;
  for (int c = 0; c < classes; ++c) {
    const int64_t tp = cm[static_cast<size_t>(c)][static_cast<size_t>(c)];
    diag += tp;
    int64_t support = 0, predicted = 0;
    for (int j = 0; j < classes; ++j) {
      support += cm[static_cast<size_t>(c)][static_cast<size_t>(j)];
      predicted += cm[static_cast<size_t>(j)][static_cast<size_t>(c)];
    }
    if (support == 0 && predicted == 0) continue;
    ++active;
    const double p = predicted > 0 ? double(tp) / double(predicted) : 0.0;
    const double r = support > 0 ? double(tp) / double(support) : 0.0;
    macro += (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
  }
  return {double(diag) / double(preds.size()), active > 0 ? macro / active : 0.0};
}

void criterion_2() {
  Rng rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = static_cast<int>(rng.uniform_int(2, 10));
    const int n = static_cast<int>(rng.uniform_int(1, 50));
    std::vector<int> preds(static_cast<size_t>(n)), labels(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      preds[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(0, classes - 1));
      labels[static_cast<size_t>(i)] = static_cast<int>(rng.uniform_int(0, classes - 1));
    }
    const F1Result got = f1_scores(preds, labels, classes);
    const F1Result ref = f1_reference(preds, labels, classes);
    worst = std::max({worst, std::abs(got.micro - ref.micro), std::abs(got.macro - ref.macro)});
  }
  report(2, "F1 oracle equivalence", worst < 1e-9,
         "1000 random sets, max deviation " + fmt(worst, 12));
}

// ---------------------------------------------------------------------------
// Shared fixtures for the model criteria.

IntentCatalog probe_catalog() { return catalog_for(default_scenarios()); }

Model reduced_model(ModelKind kind, uint64_t seed) {
  // d_q = 8, context 93 (3 x 25 categorical dims), MLP hidden 16, d_p = 8.
  ModelConfig config;
  config.encoder = EncoderConfig{8, 2, 8};
  config.d_p = 8;
  config.mlp_hidden = 16;
  config.cat_emb_dim = 25;
  config.dropout = 0.0;

  std::vector<LabeledExample> sample;
  for (const auto& e : sample_scenario_examples("greet", OrderState::overdue, 3, seed)) {
    sample.push_back(e);
  }
  for (const auto& e :
       sample_scenario_examples("explicit_track", OrderState::in_transit, 3, seed + 1)) {
    sample.push_back(e);
  }
  std::vector<std::string> utterances;
  std::vector<RawFeatures> features;
  for (const auto& e : sample) {
    utterances.push_back(e.utterance);
    features.push_back(derive_raw_features(*e.transaction));
  }
  return Model(kind, config, probe_catalog(), Vocabulary::build(utterances),
               FeaturizerVocabs::build(features), fit_normalization(features), FeatureMask(),
               seed);
}

void criterion_3() {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::string worst_case = "-";
  for (ModelKind kind : all_model_kinds()) {
    Model model = reduced_model(kind, 51);
    std::vector<EncodedExample> batch;
    std::vector<int> u_labels, c_labels;
    std::vector<double> ones, lambda_w;
    int i = 0;
    for (const auto& e : sample_scenario_examples("greet", OrderState::overdue, 2, 52)) {
      batch.push_back(model.encode_example(e));
      u_labels.push_back(model.catalog().utterance_index(e.utterance_label));
      c_labels.push_back(model.catalog().conversation_index(e.conversation_label));
      ones.push_back(1.0);
      lambda_w.push_back(1.0);
      ++i;
    }
    for (const auto& e :
         sample_scenario_examples("amb_when_receive", OrderState::overdue, 1, 53)) {
      batch.push_back(model.encode_example(e));
      u_labels.push_back(model.catalog().utterance_index(e.utterance_label));
      c_labels.push_back(model.catalog().conversation_index(e.conversation_label));
      ones.push_back(1.0);
      lambda_w.push_back(1.0);
    }

    const std::vector<std::optional<bool>> branches =
        is_sawc(kind) ? std::vector<std::optional<bool>>{true, false}
                      : std::vector<std::optional<bool>>{std::nullopt};
    for (const auto& branch : branches) {
      ForwardOptions opts;
      opts.force_flow_branch = branch;
      auto build = [&] {
        auto fwd = model.forward(batch, opts);
        auto loss = ad::softmax_xent(fwd.utterance_logits, u_labels, ones,
                                     1.0 / static_cast<double>(batch.size()));
        if (fwd.conversation_logits) {
          loss = ad::add(loss, ad::softmax_xent(fwd.conversation_logits, c_labels, lambda_w,
                                                1.0 / static_cast<double>(batch.size())));
        }
        return loss;
      };
      Rng rng(54);
      const double err = ad::grad_check(build, model.params().values(), 1e-5, rng, 220);
      if (err > worst) {
        worst = err;
        worst_case = model_kind_name(kind);
      }
    }
  }
  const double elapsed = seconds_since(start);
  report(3, "full-loss gradient checks", worst < 1e-5 && elapsed < 120.0,
         "max rel. error " + fmt(worst, 9) + " (" + worst_case + "), " + fmt(elapsed, 1) + " s");
}

void criterion_5() {
  bool ok = true;
  std::ostringstream detail;
  for (ModelKind kind : {ModelKind::mtl_cnlu, ModelKind::mtl_cnlu_sawc}) {
    Model model = reduced_model(kind, 61);
    // Contextless probes: flow templates with the transaction stripped.
    auto probe = sample_scenario_examples("explicit_cancel", OrderState::pre_ship, 8, 62);
    std::vector<EncodedExample> batch;
    std::vector<int> u_labels, c_labels;
    std::vector<double> ones, lambda_w;
    for (auto& e : probe) {
      e.transaction.reset();
      batch.push_back(model.encode_example(e));
      u_labels.push_back(model.catalog().utterance_index(e.utterance_label));
      c_labels.push_back(model.catalog().conversation_index(e.conversation_label));
      ones.push_back(1.0);
      lambda_w.push_back(0.0);  // no context -> lambda_eff = 0
    }
    ForwardOptions opts;
    auto fwd = model.forward(batch, opts);
    auto loss =
        ad::add(ad::softmax_xent(fwd.utterance_logits, u_labels, ones,
                                 1.0 / static_cast<double>(batch.size())),
                ad::softmax_xent(fwd.conversation_logits, c_labels, lambda_w,
                                 1.0 / static_cast<double>(batch.size())));
    model.params().zero_grad();
    ad::backward(loss);
    double conv_norm = 0.0, utter_norm = 0.0;
    for (const auto& v : model.params().values(Partition::conversation_head)) {
      for (double g : v->grad.data) conv_norm += std::abs(g);
    }
    for (const auto& v : model.params().values(Partition::utterance_head)) {
      for (double g : v->grad.data) utter_norm += std::abs(g);
    }
    ok = ok && conv_norm == 0.0 && utter_norm > 0.0;
    detail << model_kind_name(kind) << " conv-grad " << conv_norm << "; ";
  }
  report(5, "lambda rule zeroes conversation gradients without context", ok, detail.str());
}

// ---------------------------------------------------------------------------
// Benchmark fixtures shared by criteria 4, 6, 7, 8.

struct BenchmarkRun {
  EvalReport test_report;
  std::shared_ptr<Model> model;
};

struct Benchmark {
  std::string dir;
  Dataset dataset;
  std::map<std::pair<std::string, uint64_t>, BenchmarkRun> runs;

  // The benchmark protocol: the spec's defaults except the learning rate,
  // which is raised so every architecture converges inside the runtime
  // budget (the paper's fine-tuned backbone is out of scope).
  static TrainingConfig protocol(uint64_t seed) {
    TrainingConfig config;
    config.learning_rate = 1e-3;
    config.max_epochs = 15;
    config.patience = 5;
    config.seed = seed;
    return config;
  }

  const BenchmarkRun& run(const std::string& kind_name, uint64_t seed,
                          const FeatureMask& mask = FeatureMask()) {
    const auto key = std::make_pair(kind_name + (mask.is_full() ? "" : "#" + mask.masked_names()),
                                    seed);
    auto it = runs.find(key);
    if (it != runs.end()) return it->second;

    const auto start = std::chrono::steady_clock::now();
    const ModelKind kind = model_kind_from_name(kind_name);
    const TrainingConfig config = protocol(seed);
    auto model = std::make_shared<Model>(
        build_model(kind, dataset, config, ModelConfig(), mask));
    const TrainResult result = train(*model, dataset, config);
    BenchmarkRun run;
    run.model = model;
    run.test_report = evaluate(*model, dataset.test);
    std::cout << "  [train] " << key.first << " seed " << seed << ": top2 "
              << fmt(100.0 * run.test_report.mean_top2) << ", u-micro "
              << fmt(100.0 * run.test_report.utterance.micro_f1) << ", epochs "
              << result.history.size() << ", " << fmt(seconds_since(start), 1) << " s\n"
              << std::flush;
    return runs.emplace(key, std::move(run)).first->second;
  }

  double mean_metric(const std::string& kind_name, const std::vector<uint64_t>& seeds,
                     const std::function<double(const EvalReport&)>& metric,
                     const FeatureMask& mask = FeatureMask()) {
    double sum = 0.0;
    for (uint64_t seed : seeds) sum += metric(run(kind_name, seed, mask).test_report);
    return sum / static_cast<double>(seeds.size());
  }
};

Benchmark prepare_benchmark(const std::string& work_dir) {
  Benchmark bench;
  bench.dir = work_dir + "/benchmark_data";
  if (!fs::exists(bench.dir + "/manifest.json")) {
    fs::create_directories(bench.dir);
    DatasetManifest manifest;  // 10000/1000/1000, 70% context, 45% distinct
    manifest.seed = 7;
    generate_dataset(manifest, bench.dir);
  }
  bench.dataset = load_dataset_dir(bench.dir);
  return bench;
}

const std::vector<uint64_t> kSeeds = {1, 2, 3};

void criterion_6(Benchmark& bench) {
  const auto start = std::chrono::steady_clock::now();
  const auto u_micro = [](const EvalReport& r) { return r.utterance.micro_f1; };
  const auto top2 = [](const EvalReport& r) { return r.mean_top2; };

  const double baseline = 100.0 * bench.mean_metric("baseline", kSeeds, u_micro);
  const double concat = 100.0 * bench.mean_metric("concat", kSeeds, u_micro);
  const double cawc_u = 100.0 * bench.mean_metric("cawc", kSeeds, u_micro);
  const bool part_a = cawc_u >= concat && concat >= baseline && (cawc_u - baseline) >= 2.0;
  report(6, "6a top-1 utterance ordering (cawc >= concat >= baseline, gap >= 2)", part_a,
         "cawc " + fmt(cawc_u) + ", concat " + fmt(concat) + ", baseline " + fmt(baseline));

  const double cawc_t = 100.0 * bench.mean_metric("cawc", kSeeds, top2);
  const double mtl_t = 100.0 * bench.mean_metric("mtl-cnlu", kSeeds, top2);
  const double sawc_t = 100.0 * bench.mean_metric("mtl-cnlu-sawc", kSeeds, top2);
  const bool part_b = sawc_t >= mtl_t && mtl_t >= cawc_t && (sawc_t - cawc_t) >= 1.0;
  report(6, "6b top-2 ordering (sawc >= mtl-cnlu >= cawc, gap >= 1)", part_b,
         "sawc " + fmt(sawc_t) + ", mtl-cnlu " + fmt(mtl_t) + ", cawc " + fmt(cawc_t));

  const double mtl_shared = 100.0 * bench.mean_metric("mtl-cnlu-shared", kSeeds, top2);
  const double sawc_shared = 100.0 * bench.mean_metric("mtl-cnlu-sawc-shared", kSeeds, top2);
  const bool part_c = mtl_shared <= mtl_t && sawc_shared <= sawc_t;
  report(6, "6c shared variants do not beat unshared on top-2", part_c,
         "mtl-shared " + fmt(mtl_shared) + " vs " + fmt(mtl_t) + "; sawc-shared " +
             fmt(sawc_shared) + " vs " + fmt(sawc_t) + "; total " +
             fmt(seconds_since(start), 1) + " s");
}

void criterion_7(Benchmark& bench) {
  // The qualitative "hello" + overdue-items family: dual-correct only for
  // the selective architecture.
  const auto probes = sample_scenario_examples("greet", OrderState::overdue, 100, 777);

  const auto case_stats = [&](const Model& model) {
    std::vector<EncodedExample> batch;
    for (const auto& e : probes) batch.push_back(model.encode_example(e));
    const auto preds = model.predict(batch);
    double dual = 0.0, conv = 0.0;
    for (size_t i = 0; i < preds.size(); ++i) {
      const double t2 = top2_score(probes[i].utterance_label, probes[i].conversation_label,
                                   preds[i].y1, preds[i].y2);
      dual += t2 == 1.0 ? 1.0 : 0.0;
      if (preds[i].conversation_top >= 0) {
        conv += model.catalog().conversation_intents[static_cast<size_t>(
                    preds[i].conversation_top)] == probes[i].conversation_label
                    ? 1.0
                    : 0.0;
      }
    }
    return std::make_pair(dual / 100.0, conv / 100.0);
  };

  double sawc_dual = 0.0, mtl_conv = 0.0, cawc_dual = 0.0;
  for (uint64_t seed : kSeeds) {
    const auto sawc = case_stats(*bench.run("mtl-cnlu-sawc", seed).model);
    const auto mtl = case_stats(*bench.run("mtl-cnlu", seed).model);
    const auto cawc = case_stats(*bench.run("cawc", seed).model);
    sawc_dual += sawc.first / 3.0;
    mtl_conv += mtl.second / 3.0;
    cawc_dual += cawc.first / 3.0;
  }
  const bool ok = sawc_dual >= 0.9 && mtl_conv <= 0.5;
  report(7, "hello+overdue case family (sawc dual >= 0.9, mtl-cnlu conv <= 0.5)", ok,
         "sawc dual-correct " + fmt(sawc_dual) + ", mtl-cnlu conversation acc " + fmt(mtl_conv) +
             ", cawc dual-correct " + fmt(cawc_dual));
}

void criterion_8(Benchmark& bench) {
  const auto u_micro = [](const EvalReport& r) { return r.utterance.micro_f1; };
  const double full = 100.0 * bench.mean_metric("cawc", kSeeds, u_micro);
  const double masked = 100.0 * bench.mean_metric("cawc", kSeeds, u_micro,
                                                  FeatureMask::parse("handcrafted"));
  report(8, "ablation direction (masking handcrafted features costs >= 1 point)",
         full - masked >= 1.0,
         "full " + fmt(full) + ", handcrafted masked " + fmt(masked));
}

void criterion_4(Benchmark& bench) {
  // Trained selective model; >= 100 non-flow pairs sharing a transaction.
  const Model& model = *bench.run("mtl-cnlu-sawc", 1).model;
  Rng rng(444);

  int nonflow_pairs = 0, nonflow_identical = 0;
  int flow_pairs = 0, flow_different = 0;
  const auto greet = find_scenario("greet").templates;
  const auto thanks = find_scenario("thanks").templates;
  const auto track = find_scenario("explicit_track").templates;
  const auto late = find_scenario("explicit_late").templates;

  const std::vector<OrderState> states = {OrderState::store_cancelled, OrderState::return_open,
                                          OrderState::overdue, OrderState::substituted};
  int attempts = 0;
  while ((nonflow_pairs < 120 || flow_pairs < 120) && ++attempts < 5000) {
    const OrderState state = states[static_cast<size_t>(rng.uniform_int(0, 3))];
    const TransactionRecord record = sample_state_record(state, rng);

    const auto pick = [&rng](const std::vector<std::string>& pool) {
      return pool[static_cast<size_t>(rng.uniform_int(0, static_cast<int64_t>(pool.size()) - 1))];
    };
    const auto preds = model.predict({model.encode_example(pick(greet), record),
                                      model.encode_example(pick(thanks), record),
                                      model.encode_example(pick(track), record),
                                      model.encode_example(pick(late), record)});

    ForwardOptions eval;
    auto fwd = model.forward({model.encode_example(pick(greet), record),
                              model.encode_example(pick(thanks), record),
                              model.encode_example(pick(track), record),
                              model.encode_example(pick(late), record)},
                             eval);
    // Pair (0,1): both utterances non-flow predictions? Pair (2,3): flow.
    const auto is_flow_pred = [&](size_t i) { return fwd.flow_branch[i]; };
    const Tensor& logits = fwd.conversation_logits->val;
    if (!is_flow_pred(0) && !is_flow_pred(1) && nonflow_pairs < 120) {
      ++nonflow_pairs;
      if (std::memcmp(logits.row_ptr(0), logits.row_ptr(1),
                      sizeof(double) * static_cast<size_t>(logits.cols)) == 0) {
        ++nonflow_identical;
      }
    }
    if (is_flow_pred(2) && is_flow_pred(3) && flow_pairs < 120) {
      ++flow_pairs;
      if (std::memcmp(logits.row_ptr(2), logits.row_ptr(3),
                      sizeof(double) * static_cast<size_t>(logits.cols)) != 0) {
        ++flow_different;
      }
    }
  }
  const bool ok = nonflow_identical == nonflow_pairs && flow_different > flow_pairs * 9 / 10;
  report(4, "sawc gating invariant (non-flow logits bit-identical across utterances)", ok,
         std::to_string(nonflow_identical) + "/" + std::to_string(nonflow_pairs) +
             " non-flow pairs identical; " + std::to_string(flow_different) + "/" +
             std::to_string(flow_pairs) + " flow pairs differ");
}

void criterion_9(const std::string& work_dir) {
  // Determinism of the metric history and checkpoint round-trip fidelity.
  const std::string dir = work_dir + "/determinism_data";
  if (!fs::exists(dir + "/manifest.json")) {
    fs::create_directories(dir);
    DatasetManifest manifest;
    manifest.train_count = 600;
    manifest.validation_count = 120;
    manifest.test_count = 120;
    manifest.seed = 17;
    generate_dataset(manifest, dir);
  }
  const Dataset data = load_dataset_dir(dir);

  TrainingConfig config;
  config.learning_rate = 1e-3;
  config.max_epochs = 4;
  config.seed = 23;

  Model m1 = build_model(ModelKind::mtl_cnlu_sawc, data, config);
  Model m2 = build_model(ModelKind::mtl_cnlu_sawc, data, config);
  const TrainResult r1 = train(m1, data, config);
  const TrainResult r2 = train(m2, data, config);
  const bool histories_equal = r1.history_csv() == r2.history_csv();

  const std::string ckpt = work_dir + "/determinism.ckpt";
  save_checkpoint(ckpt, m1, config);
  LoadedCheckpoint loaded = load_checkpoint(ckpt);
  const std::string direct = evaluate(m1, data.test).to_csv();
  const std::string reloaded = evaluate(loaded.model, data.test).to_csv();

  const std::string ckpt2 = work_dir + "/determinism2.ckpt";
  save_checkpoint(ckpt2, loaded.model, loaded.training_config);
  std::ifstream f1(ckpt, std::ios::binary), f2(ckpt2, std::ios::binary);
  std::stringstream b1, b2;
  b1 << f1.rdbuf();
  b2 << f2.rdbuf();

  const bool ok = histories_equal && direct == reloaded && b1.str() == b2.str();
  report(9, "determinism and persistence", ok,
         std::string("history ") + (histories_equal ? "identical" : "DIFFERS") +
             ", round-trip report " + (direct == reloaded ? "identical" : "DIFFERS") +
             ", re-saved checkpoint " + (b1.str() == b2.str() ? "byte-identical" : "DIFFERS"));
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  std::string work_dir = "acceptance_work";
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string token;
      while (std::getline(ss, token, ',')) only.insert(std::stoi(token));
    } else if (arg == "--work" && i + 1 < argc) {
      work_dir = argv[++i];
    } else {
      std::cerr << "usage: acceptance [--only N,M] [--work DIR]\n";
      return 2;
    }
  }
  const auto wanted = [&only](int id) { return only.empty() || only.count(id) > 0; };
  fs::create_directories(work_dir);

  const auto start = std::chrono::steady_clock::now();
  try {
    if (wanted(1)) criterion_1();
    if (wanted(2)) criterion_2();
    if (wanted(3)) criterion_3();
    if (wanted(5)) criterion_5();

    if (wanted(4) || wanted(6) || wanted(7) || wanted(8)) {
      Benchmark bench = prepare_benchmark(work_dir);
      if (wanted(6)) criterion_6(bench);
      if (wanted(7)) criterion_7(bench);
      if (wanted(8)) criterion_8(bench);
      if (wanted(4)) criterion_4(bench);
    }
    if (wanted(9)) criterion_9(work_dir);
  } catch (const std::exception& e) {
    std::cout << "[FAIL] acceptance suite aborted: " << e.what() << "\n";
    return 1;
  }

  int failures = 0;
  for (const Outcome& o : outcomes) {
    if (!o.pass) ++failures;
  }
  std::cout << "----\n"
            << outcomes.size() - failures << "/" << outcomes.size() << " criteria passed in "
            << fmt(seconds_since(start), 1) << " s\n";
  return failures == 0 ? 0 : 1;
}
