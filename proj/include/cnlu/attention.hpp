#pragma once

#include <string>

#include "cnlu/autodiff.hpp"
#include "cnlu/params.hpp"
#include "cnlu/rng.hpp"

namespace cnlu {

struct AttentionConfig {
  int d_q = 64;         // query width
  int d_p = 64;         // projection width for both W_q and W_c
  int context_dim = 93; // attention vector length

  int combined_dim() const { return 2 * d_p; }
  // Neuron counts roughly halve through the hidden layers.
  int h1() const { return combined_dim() / 2; }
  int h2() const { return h1() / 2; }
};

// Query-context gate: projects both inputs, concatenates, runs the tanh
// stack, and squashes to a per-feature sigmoid weight:
//   e = concat(W_q q, W_c c)
//   a = sigmoid(W_l3 tanh(W_l2 tanh(W_l1 e)))
class AttentionModule {
 public:
  AttentionModule(const AttentionConfig& config, ParamSet& params, Partition partition,
                  const std::string& name_prefix, Rng& init_rng);

  // q [B, d_q], c [B, context_dim] -> a [B, context_dim], entries in (0,1).
  ad::Value weights(const ad::Value& q, const ad::Value& c) const;

  const AttentionConfig& config() const { return config_; }

 private:
  AttentionConfig config_;
  ad::Value wq_, bq_;    // [d_q, d_p]
  ad::Value wc_, bc_;    // [context_dim, d_p]
  ad::Value wl1_, bl1_;  // [2*d_p, h1]
  ad::Value wl2_, bl2_;  // [h1, h2]
  ad::Value wl3_, bl3_;  // [h2, context_dim]
};

// c_hat = a (*) c, elementwise.
ad::Value weighted_context(const ad::Value& attention, const ad::Value& context);

}  // namespace cnlu
