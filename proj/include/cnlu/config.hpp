#pragma once

#include <map>
#include <string>

#include "cnlu/datagen.hpp"
#include "cnlu/model.hpp"
#include "cnlu/training.hpp"

namespace cnlu {

// Plain key = value experiment configuration. '#' starts a comment; blank
// lines are ignored. Unknown keys are rejected so typos surface early.
// Command-line flags override file values.
class KeyValueConfig {
 public:
  static KeyValueConfig parse_file(const std::string& path);
  static KeyValueConfig parse_string(const std::string& text, const std::string& origin);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  uint64_t get_u64(const std::string& key, uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// Documented schema; each applies the keys it owns.
void apply_to(const KeyValueConfig& config, TrainingConfig& training);
void apply_to(const KeyValueConfig& config, ModelConfig& model);
void apply_to(const KeyValueConfig& config, DatasetManifest& manifest);

}  // namespace cnlu
