// Command-line entry point: data generation, training, evaluation,
// prediction, model comparison and feature ablations.

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cnlu/checkpoint.hpp"
#include "cnlu/config.hpp"
#include "cnlu/datagen.hpp"
#include "cnlu/dataset.hpp"
#include "cnlu/metrics.hpp"
#include "cnlu/training.hpp"

namespace fs = std::filesystem;
using namespace cnlu;

namespace {

std::string pct(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(2) << 100.0 * v;
  return os.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << content;
}

void require_exists(const std::string& path, const char* what) {
  if (!fs::exists(path)) {
    throw std::invalid_argument(std::string(what) + " not found: " + path);
  }
}

struct CommonOptions {
  std::string config_path;
  std::string data_dir;
  std::string out_dir = ".";
  std::string model_name;
  std::string feature_mask;
  std::string lambda_grid;
  uint64_t seed = 0;
  double lambda = 1.0;
  bool seed_set = false, lambda_set = false, model_set = false, mask_set = false;

  KeyValueConfig file_config;

  void load_config() {
    if (!config_path.empty()) {
      require_exists(config_path, "config file");
      file_config = KeyValueConfig::parse_file(config_path);
    }
  }

  TrainingConfig training_config() const {
    TrainingConfig t;
    apply_to(file_config, t);
    if (seed_set) t.seed = seed;
    if (lambda_set) t.lambda = lambda;
    return t;
  }

  ModelConfig model_config() const {
    ModelConfig m;
    apply_to(file_config, m);
    return m;
  }

  std::string resolved_model() const {
    if (model_set) return model_name;
    return file_config.get_string("model", "");
  }

  FeatureMask resolved_mask() const {
    if (mask_set) return FeatureMask::parse(feature_mask);
    return FeatureMask::parse(file_config.get_string("feature_mask", ""));
  }

  std::string resolved_data_dir() const {
    if (!data_dir.empty()) return data_dir;
    return file_config.get_string("data_dir", "");
  }
};

void add_common(CLI::App* cmd, CommonOptions& opts, bool with_model) {
  cmd->add_option("--config", opts.config_path, "key = value config file; flags override");
  cmd->add_option("--data", opts.data_dir, "dataset directory");
  cmd->add_option("--out", opts.out_dir, "output directory");
  cmd->add_option("--seed", opts.seed, "random seed")->each([&](const std::string&) {
    opts.seed_set = true;
  });
  cmd->add_option("--lambda", opts.lambda, "conversation loss weight")
      ->each([&](const std::string&) { opts.lambda_set = true; });
  cmd->add_option("--feature-mask", opts.feature_mask,
                  "comma list of features or groups to mask out")
      ->each([&](const std::string&) { opts.mask_set = true; });
  if (with_model) {
    cmd->add_option("--model", opts.model_name,
                    "baseline|concat|mlp-concat|cawc|mtl-cnlu|mtl-cnlu-sawc|"
                    "mtl-cnlu-shared|mtl-cnlu-sawc-shared")
        ->each([&](const std::string&) { opts.model_set = true; });
  }
}

Dataset load_data(const CommonOptions& opts) {
  const std::string dir = opts.resolved_data_dir();
  if (dir.empty()) throw std::invalid_argument("--data is required");
  require_exists(dir, "dataset directory");
  require_exists(dir + "/catalog.json", "catalog");
  require_exists(dir + "/train.jsonl", "train split");
  return load_dataset_dir(dir);
}

struct TrainedRun {
  TrainResult result;
  EvalReport test_report;
};

TrainedRun run_training(Model& model, const Dataset& dataset, const TrainingConfig& config) {
  TrainedRun run;
  run.result = train(model, dataset, config);
  run.test_report = evaluate(model, dataset.test);
  return run;
}

int cmd_datagen(CommonOptions& opts, const std::string& verify_dir) {
  opts.load_config();
  if (!verify_dir.empty()) {
    require_exists(verify_dir, "dataset directory");
    const VerifyReport report = verify_dataset(verify_dir);
    std::cout << report.summary();
    return report.ok ? 0 : 1;
  }
  DatasetManifest manifest;
  apply_to(opts.file_config, manifest);
  if (opts.seed_set) manifest.seed = opts.seed;
  fs::create_directories(opts.out_dir);
  const GenerationReport report = generate_dataset(manifest, opts.out_dir);
  std::cout << report.summary();
  const VerifyReport check = verify_dataset(opts.out_dir);
  if (!check.ok) throw std::runtime_error("generated dataset failed verification");
  std::cout << "verification: " << check.summary();
  return 0;
}

int cmd_train(CommonOptions& opts) {
  opts.load_config();
  const std::string name = opts.resolved_model();
  if (name.empty()) throw std::invalid_argument("--model is required");
  const ModelKind kind = model_kind_from_name(name);
  const Dataset dataset = load_data(opts);
  fs::create_directories(opts.out_dir);
  TrainingConfig config = opts.training_config();

  std::vector<double> lambdas;
  const std::string grid =
      !opts.lambda_grid.empty() ? opts.lambda_grid : opts.file_config.get_string("lambda_grid", "");
  if (!grid.empty() && is_dual_head(kind)) {
    std::stringstream ss(grid);
    std::string token;
    while (std::getline(ss, token, ',')) {
      if (!token.empty()) lambdas.push_back(std::stod(token));
    }
  }
  if (lambdas.empty()) lambdas.push_back(config.lambda);

  std::ostringstream grid_csv;
  grid_csv << "lambda,val_top2,val_utterance_micro_f1\n";
  double best_metric = -1.0;
  std::optional<double> best_lambda;
  for (double l : lambdas) {
    TrainingConfig c = config;
    c.lambda = l;
    Model model = build_model(kind, dataset, c, opts.model_config(), opts.resolved_mask());
    TrainResult result = train(model, dataset, c);
    const double metric = is_dual_head(kind) ? result.final_validation.mean_top2
                                             : result.final_validation.utterance.micro_f1;
    grid_csv << l << "," << pct(result.final_validation.mean_top2) << ","
             << pct(result.final_validation.utterance.micro_f1) << "\n";
    if (metric > best_metric) {
      best_metric = metric;
      best_lambda = l;
      save_checkpoint(opts.out_dir + "/checkpoint.bin", model, c);
      write_file(opts.out_dir + "/history.csv", result.history_csv());
      write_file(opts.out_dir + "/final_validation.csv", result.final_validation.to_csv());
      std::cout << "model " << name << " lambda " << l << " best epoch " << result.best_epoch
                << "\n"
                << result.final_validation.to_table();
    }
  }
  if (lambdas.size() > 1) {
    write_file(opts.out_dir + "/lambda_grid.csv", grid_csv.str());
    std::cout << "best lambda " << *best_lambda << "\n";
  }
  return 0;
}

int cmd_eval(CommonOptions& opts, const std::string& checkpoint_path, const std::string& split) {
  opts.load_config();
  require_exists(checkpoint_path, "checkpoint");
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  const Dataset dataset = load_data(opts);
  const std::vector<LabeledExample>* examples = &dataset.test;
  if (split == "validation") examples = &dataset.validation;
  else if (split == "train") examples = &dataset.train;
  else if (split != "test") throw std::invalid_argument("unknown split: " + split);

  const EvalReport report = evaluate(loaded.model, *examples);
  fs::create_directories(opts.out_dir);
  write_file(opts.out_dir + "/eval_report.csv", report.to_csv());
  std::cout << "model " << model_kind_name(loaded.model.kind()) << " on " << split << ":\n"
            << report.to_table();
  return 0;
}

int cmd_predict(CommonOptions& opts, const std::string& checkpoint_path,
                const std::string& input_path, const std::string& output_path) {
  opts.load_config();
  require_exists(checkpoint_path, "checkpoint");
  require_exists(input_path, "input file");
  LoadedCheckpoint loaded = load_checkpoint(checkpoint_path);
  const Model& model = loaded.model;

  const std::vector<LabeledExample> inputs = load_examples_jsonl(input_path);
  std::ofstream out(output_path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + output_path);

  constexpr size_t kBatch = 64;
  for (size_t start = 0; start < inputs.size(); start += kBatch) {
    const size_t end = std::min(inputs.size(), start + kBatch);
    std::vector<EncodedExample> batch;
    for (size_t i = start; i < end; ++i) batch.push_back(model.encode_example(inputs[i]));
    const std::vector<DualPrediction> preds = model.predict(batch);
    for (size_t i = 0; i < preds.size(); ++i) {
      nlohmann::ordered_json j;
      j["utterance"] = inputs[start + i].utterance;
      j["y1"] = preds[i].y1;
      j["y2"] = preds[i].y2;
      j["utterance_top"] =
          model.catalog().utterance_intents[static_cast<size_t>(preds[i].utterance_top)];
      j["utterance_probs"] = preds[i].utterance_probs;
      if (preds[i].conversation_top >= 0) {
        j["conversation_top"] =
            model.catalog().conversation_intents[static_cast<size_t>(preds[i].conversation_top)];
        j["conversation_probs"] = preds[i].conversation_probs;
      } else {
        j["conversation_top"] = nullptr;
        j["conversation_probs"] = nullptr;
      }
      out << j.dump() << "\n";
    }
  }
  std::cout << "wrote " << inputs.size() << " predictions to " << output_path << "\n";
  return 0;
}

int cmd_compare(CommonOptions& opts, const std::string& models_arg) {
  opts.load_config();
  const Dataset dataset = load_data(opts);
  fs::create_directories(opts.out_dir);
  const TrainingConfig base_config = opts.training_config();

  // Table rows in the conventional order; the external fusion architectures
  // are reported as not implemented rather than silently dropped.
  std::vector<std::string> rows = {"baseline",   "concat",
                                   "mlp-concat", "unimodal",
                                   "gating",     "weighted-sum",
                                   "cawc",       "mtl-cnlu",
                                   "mtl-cnlu-shared", "mtl-cnlu-sawc",
                                   "mtl-cnlu-sawc-shared"};
  const std::string models =
      !models_arg.empty() ? models_arg : opts.file_config.get_string("models", "");
  if (!models.empty()) {
    rows.clear();
    std::stringstream ss(models);
    std::string token;
    while (std::getline(ss, token, ',')) {
      if (!token.empty()) rows.push_back(token);
    }
  }

  std::ostringstream csv;
  csv << "architecture,utterance_micro_f1,utterance_macro_f1,conversation_micro_f1,"
         "conversation_macro_f1,top2_score\n";
  std::ostringstream table;
  table << std::left << std::setw(24) << "architecture" << std::right << std::setw(10) << "u-micro"
        << std::setw(10) << "u-macro" << std::setw(10) << "c-micro" << std::setw(10) << "c-macro"
        << std::setw(10) << "top2" << "\n";

  const std::set<std::string> not_implemented = {"unimodal", "gating", "weighted-sum"};
  for (const std::string& row : rows) {
    if (not_implemented.count(row)) {
      csv << row << ",not implemented,not implemented,not implemented,not implemented,"
             "not implemented\n";
      table << std::left << std::setw(24) << row << std::right << std::setw(50)
            << "not implemented" << "\n";
      continue;
    }
    const ModelKind kind = model_kind_from_name(row);
    Model model = build_model(kind, dataset, base_config, opts.model_config(),
                              opts.resolved_mask());
    const TrainedRun run = run_training(model, dataset, base_config);
    const EvalReport& r = run.test_report;
    csv << row << "," << pct(r.utterance.micro_f1) << "," << pct(r.utterance.macro_f1) << ","
        << (r.conversation ? pct(r.conversation->micro_f1) : "-") << ","
        << (r.conversation ? pct(r.conversation->macro_f1) : "-") << "," << pct(r.mean_top2)
        << "\n";
    table << std::left << std::setw(24) << row << std::right << std::setw(10)
          << pct(r.utterance.micro_f1) << std::setw(10) << pct(r.utterance.macro_f1)
          << std::setw(10) << (r.conversation ? pct(r.conversation->micro_f1) : "-")
          << std::setw(10) << (r.conversation ? pct(r.conversation->macro_f1) : "-")
          << std::setw(10) << pct(r.mean_top2) << "\n";
    std::cout << "trained " << row << "\n";
  }
  write_file(opts.out_dir + "/comparison.csv", csv.str());
  std::cout << table.str();
  return 0;
}

int cmd_ablate(CommonOptions& opts) {
  opts.load_config();
  const Dataset dataset = load_data(opts);
  fs::create_directories(opts.out_dir);
  const TrainingConfig config = opts.training_config();

  struct Row {
    std::string label;
    std::string masked;  // features masked OUT of the CAWC context
    bool baseline_model = false;
  };
  std::vector<Row> rows = {
      {"text_only", "", true},
      {"text_plus_order_level", "item_level,handcrafted", false},
      {"text_plus_item_level", "order_level,handcrafted", false},
      {"text_plus_order_item", "handcrafted", false},
      {"full_features", "", false},
      {"full_minus_any_items_left_to_deliver", "any_items_left_to_deliver", false},
      {"full_minus_any_items_cancelled",
       "any_items_cancelled_by_store,any_items_cancelled_by_customer,"
       "any_items_cancelled_by_other",
       false},
  };
  if (opts.mask_set) rows.push_back({"custom_mask", opts.feature_mask, false});

  std::ostringstream csv;
  csv << "configuration,masked_features,top1_micro_f1\n";
  std::ostringstream table;
  table << std::left << std::setw(42) << "configuration" << std::right << std::setw(10)
        << "top1-F1" << "\n";
  for (const Row& row : rows) {
    const ModelKind kind = row.baseline_model ? ModelKind::baseline : ModelKind::cawc;
    Model model = build_model(kind, dataset, config, opts.model_config(),
                              FeatureMask::parse(row.masked));
    const TrainedRun run = run_training(model, dataset, config);
    csv << row.label << ",\"" << row.masked << "\"," << pct(run.test_report.utterance.micro_f1)
        << "\n";
    table << std::left << std::setw(42) << row.label << std::right << std::setw(10)
          << pct(run.test_report.utterance.micro_f1) << "\n";
    std::cout << "trained " << row.label << "\n";
  }
  write_file(opts.out_dir + "/ablation.csv", csv.str());
  std::cout << table.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"contextual intent classification workbench"};
  app.require_subcommand(1);

  CommonOptions opts;
  std::string verify_dir, checkpoint_path, split = "test";
  std::string input_path, output_path = "predictions.jsonl", models_arg;

  CLI::App* datagen = app.add_subcommand("datagen", "generate or verify a synthetic dataset");
  add_common(datagen, opts, false);
  datagen->add_option("--verify", verify_dir, "verify an existing dataset directory instead");

  CLI::App* train_cmd = app.add_subcommand("train", "train one model");
  add_common(train_cmd, opts, true);
  train_cmd->add_option("--lambda-grid", opts.lambda_grid,
                        "comma list of lambda values to sweep");

  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, opts, false);
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  eval_cmd->add_option("--split", split, "test|validation|train");

  CLI::App* predict_cmd = app.add_subcommand("predict", "predict intents for a JSONL file");
  add_common(predict_cmd, opts, false);
  predict_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")->required();
  predict_cmd->add_option("--input", input_path, "JSONL with utterance + transaction")->required();
  predict_cmd->add_option("--output", output_path, "output JSONL path");

  CLI::App* compare_cmd = app.add_subcommand("compare", "train and compare architectures");
  add_common(compare_cmd, opts, false);
  compare_cmd->add_option("--models", models_arg, "comma list of rows to include");

  CLI::App* ablate_cmd = app.add_subcommand("ablate", "context feature ablation (CAWC)");
  add_common(ablate_cmd, opts, false);

  try {
    app.parse(argc, argv);
    if (app.got_subcommand(datagen)) return cmd_datagen(opts, verify_dir);
    if (app.got_subcommand(train_cmd)) return cmd_train(opts);
    if (app.got_subcommand(eval_cmd)) return cmd_eval(opts, checkpoint_path, split);
    if (app.got_subcommand(predict_cmd)) {
      return cmd_predict(opts, checkpoint_path, input_path, output_path);
    }
    if (app.got_subcommand(compare_cmd)) return cmd_compare(opts, models_arg);
    if (app.got_subcommand(ablate_cmd)) return cmd_ablate(opts);
    return 2;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // help/version exit cleanly; parse errors are usage errors
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: usage: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: runtime: " << e.what() << "\n";
    return 1;
  }
}
