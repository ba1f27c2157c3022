#include "cnlu/attention.hpp"

#include <stdexcept>

namespace cnlu {

AttentionModule::AttentionModule(const AttentionConfig& config, ParamSet& params,
                                 Partition partition, const std::string& name_prefix,
                                 Rng& init_rng)
    : config_(config) {
  const auto add_linear = [&](const std::string& tag, int in, int out, ad::Value& w,
                              ad::Value& b) {
    w = params.add(name_prefix + "." + tag + ".w", partition, init_weight(in, out, init_rng));
    b = params.add(name_prefix + "." + tag + ".b", partition, Tensor(1, out));
  };
  add_linear("wq", config.d_q, config.d_p, wq_, bq_);
  add_linear("wc", config.context_dim, config.d_p, wc_, bc_);
  add_linear("l1", config.combined_dim(), config.h1(), wl1_, bl1_);
  add_linear("l2", config.h1(), config.h2(), wl2_, bl2_);
  add_linear("l3", config.h2(), config.context_dim, wl3_, bl3_);
}

ad::Value AttentionModule::weights(const ad::Value& q, const ad::Value& c) const {
  if (q->val.cols != config_.d_q) {
    throw std::invalid_argument("attention_weights: query width " + q->val.shape_str() +
                                " does not match d_q=" + std::to_string(config_.d_q));
  }
  if (c->val.cols != config_.context_dim) {
    throw std::invalid_argument("attention_weights: context width " + c->val.shape_str() +
                                " does not match context_dim=" +
                                std::to_string(config_.context_dim));
  }
  auto e = ad::concat_cols({ad::add(ad::matmul(q, wq_), bq_),
                            ad::add(ad::matmul(c, wc_), bc_)});
  auto h1 = ad::tanh(ad::add(ad::matmul(e, wl1_), bl1_));
  auto h2 = ad::tanh(ad::add(ad::matmul(h1, wl2_), bl2_));
  return ad::sigmoid(ad::add(ad::matmul(h2, wl3_), bl3_));
}

ad::Value weighted_context(const ad::Value& attention, const ad::Value& context) {
  if (!attention->val.same_shape(context->val)) {
    throw std::invalid_argument("weighted_context: shape mismatch " +
                                attention->val.shape_str() + " vs " + context->val.shape_str());
  }
  return ad::mul(attention, context);
}

}  // namespace cnlu
