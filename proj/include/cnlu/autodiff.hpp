#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "cnlu/rng.hpp"
#include "cnlu/tensor.hpp"

namespace cnlu::ad {

// Reverse-mode tape over dense matrices. A fresh graph is built per forward
// pass; parameter nodes are leaves that persist across passes and accumulate
// gradients until zeroed.
struct Node;
using Value = std::shared_ptr<Node>;

struct Node {
  Tensor val;
  Tensor grad;  // allocated on demand, same shape as val
  bool needs_grad = false;
  const char* op = "leaf";
  std::string name;  // nonempty for parameters
  std::vector<Value> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad() {
    if (grad.numel() != val.numel()) grad = Tensor(val.rows, val.cols);
    return grad;
  }
};

Value constant(Tensor t);
Value param(Tensor t, std::string name);

// --- primitives ---
Value matmul(const Value& a, const Value& b);
Value matmul_nt(const Value& a, const Value& b);  // a * b^T
// Same shape, or b is a 1xC row broadcast over the rows of a.
Value add(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);  // elementwise
Value scale(const Value& a, double s);
Value concat_cols(std::vector<Value> parts);
Value concat_rows(std::vector<Value> parts);
Value relu(const Value& a);
Value tanh(const Value& a);
Value sigmoid(const Value& a);
Value softmax_rows(const Value& a);
// Inverted dropout; identity when !training. rate in [0,1).
Value dropout(const Value& a, double rate, Rng& rng, bool training);
// Gathers rows of a table; gradients scatter back into the table rows.
Value embedding_rows(const Value& table, const std::vector<int>& indices);
Value mean_rows(const Value& a);  // [R,C] -> [1,C]
Value sum_all(const Value& a);    // -> [1,1]

// -sum_{i,c} y_{i,c} log p_{i,c}. Probabilities straight from softmax_rows
// get the fused backward (p - y) into the logits; otherwise the gradient is
// -y / max(p, 1e-12) into probs. Probabilities at the true class are floored
// at 1e-12 in the loss itself.
Value cross_entropy(const Value& probs, const Tensor& onehot);

// Fused softmax + cross entropy over logit rows:
//   loss = scale * sum_i w_i * (logsumexp(z_i) - z_i[label_i])
Value softmax_xent(const Value& logits, const std::vector<int>& labels,
                   const std::vector<double>& row_weights, double scale_factor);

// Runs reverse-mode accumulation from a 1x1 root. Accumulation is additive:
// calling twice doubles leaf gradients.
void backward(const Value& root);

// Max scaled relative error |analytic - numeric| / max(1, |analytic|, |numeric|)
// between analytic gradients and central finite differences on a sampled
// subset of at least min_coords parameter coordinates. build_loss must be
// deterministic (dropout disabled) and rebuild the graph over the same
// parameter nodes on every call.
double grad_check(const std::function<Value()>& build_loss,
                  const std::vector<Value>& params, double eps, Rng& rng,
                  int min_coords = 200);

}  // namespace cnlu::ad
