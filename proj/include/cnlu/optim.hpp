#pragma once

#include <cstdint>
#include <vector>

#include "cnlu/params.hpp"
#include "cnlu/tensor.hpp"

namespace cnlu {

struct AdamWOptions {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// AdamW with decoupled weight decay: the decay multiplier is applied to the
// parameter before the bias-corrected moment update.
class AdamW {
 public:
  AdamW(ParamSet& params, AdamWOptions options);

  // Consumes the gradients accumulated by backward(). Scans every gradient
  // first and aborts without touching any parameter if one is non-finite.
  void step();
  void zero_grad() { params_.zero_grad(); }

  int64_t step_count() const { return step_count_; }
  const AdamWOptions& options() const { return options_; }

 private:
  ParamSet& params_;
  AdamWOptions options_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  int64_t step_count_ = 0;
};

}  // namespace cnlu
