#include "cnlu/config.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace cnlu {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      // shared
      "seed", "model", "data_dir", "out_dir",
      // training
      "learning_rate", "batch_size", "dropout", "lambda", "max_epochs", "patience",
      "weight_decay", "beta1", "beta2", "adam_eps", "lambda_grid",
      // model
      "d_q", "heads", "max_len", "d_p", "mlp_hidden", "cat_emb_dim", "append_presence_flag",
      "feature_mask",
      // data generation
      "train_count", "validation_count", "test_count", "context_fraction", "distinct_fraction",
      "noise_fraction", "scenarios", "utterance_intent_count", "conversation_intent_count",
      // compare
      "models",
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValueConfig KeyValueConfig::parse_string(const std::string& text, const std::string& origin) {
  KeyValueConfig config;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (!known_keys().count(key)) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) + ": unknown key '" +
                                  key + "'");
    }
    config.values_[key] = value;
  }
  return config;
}

KeyValueConfig KeyValueConfig::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_string(buffer.str(), path);
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stod(it->second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not a number: " + it->second);
  }
}

int KeyValueConfig::get_int(const std::string& key, int fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoi(it->second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not an integer: " + it->second);
  }
}

uint64_t KeyValueConfig::get_u64(const std::string& key, uint64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return std::stoull(it->second);
  } catch (const std::exception&) {
    throw std::invalid_argument("config key '" + key + "': not an integer: " + it->second);
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1" || it->second == "yes") return true;
  if (it->second == "false" || it->second == "0" || it->second == "no") return false;
  throw std::invalid_argument("config key '" + key + "': not a boolean: " + it->second);
}

void apply_to(const KeyValueConfig& config, TrainingConfig& training) {
  training.learning_rate = config.get_double("learning_rate", training.learning_rate);
  training.batch_size = config.get_int("batch_size", training.batch_size);
  training.dropout = config.get_double("dropout", training.dropout);
  training.lambda = config.get_double("lambda", training.lambda);
  training.max_epochs = config.get_int("max_epochs", training.max_epochs);
  training.patience = config.get_int("patience", training.patience);
  training.seed = config.get_u64("seed", training.seed);
  training.weight_decay = config.get_double("weight_decay", training.weight_decay);
  training.beta1 = config.get_double("beta1", training.beta1);
  training.beta2 = config.get_double("beta2", training.beta2);
  training.adam_eps = config.get_double("adam_eps", training.adam_eps);
}

void apply_to(const KeyValueConfig& config, ModelConfig& model) {
  model.encoder.d_q = config.get_int("d_q", model.encoder.d_q);
  model.encoder.heads = config.get_int("heads", model.encoder.heads);
  model.encoder.max_len = config.get_int("max_len", model.encoder.max_len);
  model.d_p = config.get_int("d_p", model.d_p);
  model.mlp_hidden = config.get_int("mlp_hidden", model.mlp_hidden);
  model.cat_emb_dim = config.get_int("cat_emb_dim", model.cat_emb_dim);
  model.append_presence_flag = config.get_bool("append_presence_flag", model.append_presence_flag);
}

void apply_to(const KeyValueConfig& config, DatasetManifest& manifest) {
  manifest.train_count = config.get_int("train_count", manifest.train_count);
  manifest.validation_count = config.get_int("validation_count", manifest.validation_count);
  manifest.test_count = config.get_int("test_count", manifest.test_count);
  manifest.context_fraction = config.get_double("context_fraction", manifest.context_fraction);
  manifest.distinct_fraction = config.get_double("distinct_fraction", manifest.distinct_fraction);
  manifest.noise_fraction = config.get_double("noise_fraction", manifest.noise_fraction);
  manifest.utterance_intent_count =
      config.get_int("utterance_intent_count", manifest.utterance_intent_count);
  manifest.conversation_intent_count =
      config.get_int("conversation_intent_count", manifest.conversation_intent_count);
  manifest.seed = config.get_u64("seed", manifest.seed);
  const std::string scenarios = config.get_string("scenarios", "");
  if (!scenarios.empty()) {
    manifest.scenario_filter.clear();
    std::stringstream ss(scenarios);
    std::string token;
    while (std::getline(ss, token, ',')) {
      const std::string t = trim(token);
      if (!t.empty()) manifest.scenario_filter.push_back(t);
    }
  }
}

}  // namespace cnlu
