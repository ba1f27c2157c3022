#include "cnlu/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace cnlu {

AdamW::AdamW(ParamSet& params, AdamWOptions options)
    : params_(params), options_(options) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& e : params.entries()) {
    m_.emplace_back(e.node->val.rows, e.node->val.cols);
    v_.emplace_back(e.node->val.rows, e.node->val.cols);
  }
}

void AdamW::step() {
  for (const auto& e : params_.entries()) {
    if (!e.node->ensure_grad().all_finite()) {
      throw std::runtime_error("AdamW: non-finite gradient in parameter " + e.node->name);
    }
  }
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double bc1 = 1.0 - std::pow(options_.beta1, t);
  const double bc2 = 1.0 - std::pow(options_.beta2, t);
  const double decay_mult = 1.0 - options_.lr * options_.weight_decay;

  for (size_t i = 0; i < params_.size(); ++i) {
    Tensor& p = params_.entries()[i].node->val;
    const Tensor& g = params_.entries()[i].node->grad;
    Tensor& m = m_[i];
    Tensor& v = v_[i];
    for (size_t k = 0; k < p.data.size(); ++k) {
      const double gk = g.data[k];
      if (options_.weight_decay != 0.0) p.data[k] *= decay_mult;
      m.data[k] = options_.beta1 * m.data[k] + (1.0 - options_.beta1) * gk;
      v.data[k] = options_.beta2 * v.data[k] + (1.0 - options_.beta2) * gk * gk;
      const double m_hat = m.data[k] / bc1;
      const double v_hat = v.data[k] / bc2;
      p.data[k] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

}  // namespace cnlu
