#pragma once

#include <string>

#include "cnlu/model.hpp"
#include "cnlu/training.hpp"

namespace cnlu {

// Single-file checkpoint: magic, little-endian header length, JSON header
// (metadata plus a tensor directory with byte offsets), then the raw tensor
// payload as 32-bit little-endian floats. Save -> load -> save is
// byte-identical.
void save_checkpoint(const std::string& path, const Model& model,
                     const TrainingConfig& training_config);

struct LoadedCheckpoint {
  Model model;
  TrainingConfig training_config;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace cnlu
