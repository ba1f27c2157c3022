#include "cnlu/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string_view>
#include <unordered_set>

namespace cnlu::ad {

namespace {

constexpr double kProbFloor = 1e-12;

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + a.shape_str() +
                              " vs " + b.shape_str());
}

Value make_node(const char* op, Tensor val, std::vector<Value> parents,
                std::function<void(Node&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->val = std::move(val);
  n->parents = std::move(parents);
  for (const auto& p : n->parents) {
    if (p->needs_grad) {
      n->needs_grad = true;
      break;
    }
  }
  if (n->needs_grad) n->backward_fn = std::move(backward_fn);
  return n;
}

}  // namespace

Value constant(Tensor t) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  return n;
}

Value param(Tensor t, std::string name) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->needs_grad = true;
  n->name = std::move(name);
  n->ensure_grad();
  return n;
}

Value matmul(const Value& a, const Value& b) {
  if (a->val.cols != b->val.rows) shape_error("matmul", a->val, b->val);
  Tensor out;
  matmul_into(a->val, b->val, out);
  return make_node("matmul", std::move(out), {a, b}, [](Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    const bool na = a.needs_grad, nb = b.needs_grad;
    if (na) a.ensure_grad();
    if (nb) b.ensure_grad();
    matmul_backward(a.val, b.val, n.grad, a.grad, b.grad, na, nb);
  });
}

Value matmul_nt(const Value& a, const Value& b) {
  if (a->val.cols != b->val.cols) shape_error("matmul_nt", a->val, b->val);
  Tensor out;
  matmul_nt_into(a->val, b->val, out);
  return make_node("matmul_nt", std::move(out), {a, b}, [](Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    const bool na = a.needs_grad, nb = b.needs_grad;
    if (na) a.ensure_grad();
    if (nb) b.ensure_grad();
    matmul_nt_backward(a.val, b.val, n.grad, a.grad, b.grad, na, nb);
  });
}

Value add(const Value& a, const Value& b) {
  const bool broadcast = b->val.rows == 1 && a->val.rows > 1 && a->val.cols == b->val.cols;
  if (!broadcast && !a->val.same_shape(b->val)) shape_error("add", a->val, b->val);
  Tensor out = a->val;
  if (broadcast) {
    for (int64_t i = 0; i < out.rows; ++i) {
      double* orow = out.row_ptr(i);
      const double* brow = b->val.row_ptr(0);
      for (int64_t j = 0; j < out.cols; ++j) orow[j] += brow[j];
    }
  } else {
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b->val.data[i];
  }
  return make_node("add", std::move(out), {a, b}, [broadcast](Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    if (a.needs_grad) {
      Tensor& ag = a.ensure_grad();
      for (size_t i = 0; i < ag.data.size(); ++i) ag.data[i] += n.grad.data[i];
    }
    if (b.needs_grad) {
      Tensor& bg = b.ensure_grad();
      if (broadcast) {
        for (int64_t i = 0; i < n.grad.rows; ++i) {
          const double* grow = n.grad.row_ptr(i);
          double* brow = bg.row_ptr(0);
          for (int64_t j = 0; j < n.grad.cols; ++j) brow[j] += grow[j];
        }
      } else {
        for (size_t i = 0; i < bg.data.size(); ++i) bg.data[i] += n.grad.data[i];
      }
    }
  });
}

Value mul(const Value& a, const Value& b) {
  if (!a->val.same_shape(b->val)) shape_error("mul", a->val, b->val);
  Tensor out = a->val;
  for (size_t i = 0; i < out.data.size(); ++i) out.data[i] *= b->val.data[i];
  return make_node("mul", std::move(out), {a, b}, [](Node& n) {
    Node& a = *n.parents[0];
    Node& b = *n.parents[1];
    if (a.needs_grad) {
      Tensor& ag = a.ensure_grad();
      for (size_t i = 0; i < ag.data.size(); ++i) ag.data[i] += n.grad.data[i] * b.val.data[i];
    }
    if (b.needs_grad) {
      Tensor& bg = b.ensure_grad();
      for (size_t i = 0; i < bg.data.size(); ++i) bg.data[i] += n.grad.data[i] * a.val.data[i];
    }
  });
}

Value scale(const Value& a, double s) {
  Tensor out = a->val;
  for (double& v : out.data) v *= s;
  return make_node("scale", std::move(out), {a}, [s](Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    Tensor& ag = a.ensure_grad();
    for (size_t i = 0; i < ag.data.size(); ++i) ag.data[i] += s * n.grad.data[i];
  });
}

Value concat_cols(std::vector<Value> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  const int64_t rows = parts[0]->val.rows;
  int64_t cols = 0;
  for (const auto& p : parts) {
    if (p->val.rows != rows) shape_error("concat_cols", parts[0]->val, p->val);
    cols += p->val.cols;
  }
  Tensor out(rows, cols);
  int64_t off = 0;
  for (const auto& p : parts) {
    for (int64_t i = 0; i < rows; ++i) {
      std::memcpy(out.row_ptr(i) + off, p->val.row_ptr(i),
                  sizeof(double) * static_cast<size_t>(p->val.cols));
    }
    off += p->val.cols;
  }
  return make_node("concat_cols", std::move(out), std::move(parts), [](Node& n) {
    int64_t off = 0;
    for (auto& pp : n.parents) {
      Node& p = *pp;
      if (p.needs_grad) {
        Tensor& pg = p.ensure_grad();
        for (int64_t i = 0; i < n.grad.rows; ++i) {
          const double* grow = n.grad.row_ptr(i) + off;
          double* prow = pg.row_ptr(i);
          for (int64_t j = 0; j < p.val.cols; ++j) prow[j] += grow[j];
        }
      }
      off += p.val.cols;
    }
  });
}

Value concat_rows(std::vector<Value> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
  const int64_t cols = parts[0]->val.cols;
  int64_t rows = 0;
  for (const auto& p : parts) {
    if (p->val.cols != cols) shape_error("concat_rows", parts[0]->val, p->val);
    rows += p->val.rows;
  }
  Tensor out(rows, cols);
  int64_t off = 0;
  for (const auto& p : parts) {
    std::memcpy(out.row_ptr(off), p->val.data.data(),
                sizeof(double) * p->val.data.size());
    off += p->val.rows;
  }
  return make_node("concat_rows", std::move(out), std::move(parts), [](Node& n) {
    int64_t off = 0;
    for (auto& pp : n.parents) {
      Node& p = *pp;
      if (p.needs_grad) {
        Tensor& pg = p.ensure_grad();
        const double* g = n.grad.row_ptr(off);
        for (size_t i = 0; i < pg.data.size(); ++i) pg.data[i] += g[i];
      }
      off += p.val.rows;
    }
  });
}

Value relu(const Value& a) {
  Tensor out = a->val;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return make_node("relu", std::move(out), {a}, [](Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    Tensor& ag = a.ensure_grad();
    for (size_t i = 0; i < ag.data.size(); ++i) {
      if (a.val.data[i] > 0.0) ag.data[i] += n.grad.data[i];
    }
  });
}

Value tanh(const Value& a) {
  Tensor out = a->val;
  for (double& v : out.data) v = std::tanh(v);
  return make_node("tanh", std::move(out), {a}, [](Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    Tensor& ag = a.ensure_grad();
    for (size_t i = 0; i < ag.data.size(); ++i) {
      const double t = n.val.data[i];
      ag.data[i] += n.grad.data[i] * (1.0 - t * t);
    }
  });
}

Value sigmoid(const Value& a) {
  Tensor out = a->val;
  for (double& v : out.data) v = 1.0 / (1.0 + std::exp(-v));
  return make_node("sigmoid", std::move(out), {a}, [](Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    Tensor& ag = a.ensure_grad();
    for (size_t i = 0; i < ag.data.size(); ++i) {
      const double s = n.val.data[i];
      ag.data[i] += n.grad.data[i] * s * (1.0 - s);
    }
  });
}

Value softmax_rows(const Value& a) {
  Tensor out = a->val;
  for (int64_t i = 0; i < out.rows; ++i) {
    double* row = out.row_ptr(i);
    double mx = row[0];
    for (int64_t j = 1; j < out.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < out.cols; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (int64_t j = 0; j < out.cols; ++j) row[j] /= sum;
  }
  return make_node("softmax_rows", std::move(out), {a}, [](Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    Tensor& ag = a.ensure_grad();
    for (int64_t i = 0; i < n.val.rows; ++i) {
      const double* p = n.val.row_ptr(i);
      const double* g = n.grad.row_ptr(i);
      double* out = ag.row_ptr(i);
      double dot = 0.0;
      for (int64_t j = 0; j < n.val.cols; ++j) dot += p[j] * g[j];
      for (int64_t j = 0; j < n.val.cols; ++j) out[j] += p[j] * (g[j] - dot);
    }
  });
}

Value dropout(const Value& a, double rate, Rng& rng, bool training) {
  if (rate < 0.0 || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0,1), got " + std::to_string(rate));
  }
  if (!training || rate == 0.0) return a;
  // Inverted scaling at train time; evaluation is the identity.
  auto mask = std::make_shared<Tensor>(a->val.rows, a->val.cols);
  const double keep = 1.0 - rate;
  Tensor out = a->val;
  for (size_t i = 0; i < out.data.size(); ++i) {
    const double m = rng.uniform01() < rate ? 0.0 : 1.0 / keep;
    mask->data[i] = m;
    out.data[i] *= m;
  }
  return make_node("dropout", std::move(out), {a}, [mask](Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    Tensor& ag = a.ensure_grad();
    for (size_t i = 0; i < ag.data.size(); ++i) ag.data[i] += n.grad.data[i] * mask->data[i];
  });
}

Value embedding_rows(const Value& table, const std::vector<int>& indices) {
  const Tensor& t = table->val;
  Tensor out(static_cast<int64_t>(indices.size()), t.cols);
  for (size_t i = 0; i < indices.size(); ++i) {
    const int idx = indices[i];
    if (idx < 0 || idx >= t.rows) {
      throw std::invalid_argument("embedding_rows: index " + std::to_string(idx) +
                                  " out of range for table " + t.shape_str());
    }
    std::memcpy(out.row_ptr(static_cast<int64_t>(i)), t.row_ptr(idx),
                sizeof(double) * static_cast<size_t>(t.cols));
  }
  auto idx_copy = std::make_shared<std::vector<int>>(indices);
  return make_node("embedding_rows", std::move(out), {table}, [idx_copy](Node& n) {
    Node& t = *n.parents[0];
    if (!t.needs_grad) return;
    Tensor& tg = t.ensure_grad();
    for (size_t i = 0; i < idx_copy->size(); ++i) {
      const double* grow = n.grad.row_ptr(static_cast<int64_t>(i));
      double* trow = tg.row_ptr((*idx_copy)[i]);
      for (int64_t j = 0; j < tg.cols; ++j) trow[j] += grow[j];
    }
  });
}

Value mean_rows(const Value& a) {
  const int64_t r = a->val.rows, c = a->val.cols;
  Tensor out(1, c);
  for (int64_t i = 0; i < r; ++i) {
    const double* row = a->val.row_ptr(i);
    for (int64_t j = 0; j < c; ++j) out.data[static_cast<size_t>(j)] += row[j];
  }
  for (double& v : out.data) v /= static_cast<double>(r);
  return make_node("mean_rows", std::move(out), {a}, [r](Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    Tensor& ag = a.ensure_grad();
    const double inv = 1.0 / static_cast<double>(r);
    for (int64_t i = 0; i < ag.rows; ++i) {
      double* arow = ag.row_ptr(i);
      for (int64_t j = 0; j < ag.cols; ++j) arow[j] += n.grad.data[static_cast<size_t>(j)] * inv;
    }
  });
}

Value sum_all(const Value& a) {
  double s = 0.0;
  for (double v : a->val.data) s += v;
  return make_node("sum_all", Tensor::scalar(s), {a}, [](Node& n) {
    Node& a = *n.parents[0];
    if (!a.needs_grad) return;
    Tensor& ag = a.ensure_grad();
    const double g = n.grad.data[0];
    for (double& v : ag.data) v += g;
  });
}

Value cross_entropy(const Value& probs, const Tensor& onehot) {
  const Tensor& p = probs->val;
  if (!p.same_shape(onehot)) shape_error("cross_entropy", p, onehot);
  double loss = 0.0;
  for (size_t i = 0; i < p.data.size(); ++i) {
    if (onehot.data[i] != 0.0) {
      loss -= onehot.data[i] * std::log(std::max(p.data[i], kProbFloor));
    }
  }
  const bool fused = std::string_view(probs->op) == "softmax_rows";
  auto y = std::make_shared<Tensor>(onehot);
  if (fused) {
    // Backward goes straight to the logits as (p - y); the softmax node is
    // bypassed for this consumer.
    Value logits = probs->parents[0];
    auto pcopy = std::make_shared<Tensor>(p);
    return make_node("cross_entropy", Tensor::scalar(loss), {logits}, [y, pcopy](Node& n) {
      Node& z = *n.parents[0];
      if (!z.needs_grad) return;
      Tensor& zg = z.ensure_grad();
      const double g = n.grad.data[0];
      for (size_t i = 0; i < zg.data.size(); ++i) {
        zg.data[i] += g * (pcopy->data[i] - y->data[i]);
      }
    });
  }
  return make_node("cross_entropy", Tensor::scalar(loss), {probs}, [y](Node& n) {
    Node& p = *n.parents[0];
    if (!p.needs_grad) return;
    Tensor& pg = p.ensure_grad();
    const double g = n.grad.data[0];
    for (size_t i = 0; i < pg.data.size(); ++i) {
      if (y->data[i] != 0.0) {
        pg.data[i] -= g * y->data[i] / std::max(p.val.data[i], kProbFloor);
      }
    }
  });
}

Value softmax_xent(const Value& logits, const std::vector<int>& labels,
                   const std::vector<double>& row_weights, double scale_factor) {
  const Tensor& z = logits->val;
  if (static_cast<int64_t>(labels.size()) != z.rows ||
      static_cast<int64_t>(row_weights.size()) != z.rows) {
    throw std::invalid_argument("softmax_xent: labels/weights length " +
                                std::to_string(labels.size()) + "/" +
                                std::to_string(row_weights.size()) +
                                " does not match logits " + z.shape_str());
  }
  auto probs = std::make_shared<Tensor>(z.rows, z.cols);
  double loss = 0.0;
  for (int64_t i = 0; i < z.rows; ++i) {
    const double* row = z.row_ptr(i);
    double* prow = probs->row_ptr(i);
    double mx = row[0];
    for (int64_t j = 1; j < z.cols; ++j) mx = std::max(mx, row[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < z.cols; ++j) {
      prow[j] = std::exp(row[j] - mx);
      sum += prow[j];
    }
    for (int64_t j = 0; j < z.cols; ++j) prow[j] /= sum;
    const int label = labels[static_cast<size_t>(i)];
    if (label < 0 || label >= z.cols) {
      throw std::invalid_argument("softmax_xent: label " + std::to_string(label) +
                                  " out of range for logits " + z.shape_str());
    }
    loss += row_weights[static_cast<size_t>(i)] * ((mx + std::log(sum)) - row[label]);
  }
  loss *= scale_factor;
  auto lab = std::make_shared<std::vector<int>>(labels);
  auto w = std::make_shared<std::vector<double>>(row_weights);
  return make_node("softmax_xent", Tensor::scalar(loss), {logits},
                   [probs, lab, w, scale_factor](Node& n) {
                     Node& z = *n.parents[0];
                     if (!z.needs_grad) return;
                     Tensor& zg = z.ensure_grad();
                     const double g = n.grad.data[0] * scale_factor;
                     for (int64_t i = 0; i < zg.rows; ++i) {
                       const double wi = (*w)[static_cast<size_t>(i)];
                       if (wi == 0.0) continue;
                       const double* prow = probs->row_ptr(i);
                       double* grow = zg.row_ptr(i);
                       const int label = (*lab)[static_cast<size_t>(i)];
                       for (int64_t j = 0; j < zg.cols; ++j) {
                         grow[j] += g * wi * (prow[j] - (j == label ? 1.0 : 0.0));
                       }
                     }
                   });
}

void backward(const Value& root) {
  if (root->val.numel() != 1) {
    throw std::invalid_argument("backward: root must be a scalar, got " +
                                root->val.shape_str());
  }
  if (!root->needs_grad) return;

  // Iterative post-order DFS; children are visited in parents order so the
  // schedule is deterministic.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->needs_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior nodes start each pass clean; only leaves accumulate across
  // passes, so running backward twice doubles leaf gradients.
  for (Node* n : order) {
    if (n->backward_fn) n->ensure_grad().fill(0.0);
  }
  root->ensure_grad();
  root->grad.data[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

double grad_check(const std::function<Value()>& build_loss,
                  const std::vector<Value>& params, double eps, Rng& rng,
                  int min_coords) {
  if (eps < 1e-7 || eps > 1e-3) {
    throw std::invalid_argument("grad_check: eps must be in [1e-7,1e-3], got " +
                                std::to_string(eps));
  }
  // Analytic pass on clean gradients.
  std::vector<Tensor> saved_grads;
  saved_grads.reserve(params.size());
  for (const auto& p : params) {
    saved_grads.push_back(p->grad);
    p->ensure_grad().fill(0.0);
  }
  Value loss = build_loss();
  backward(loss);
  std::vector<Tensor> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) analytic.push_back(p->grad);

  int64_t total = 0;
  for (const auto& p : params) total += p->val.numel();
  const int64_t want = std::min<int64_t>(total, min_coords);

  // Sample distinct coordinates across the whole parameter vector.
  std::unordered_set<int64_t> chosen;
  while (static_cast<int64_t>(chosen.size()) < want) {
    chosen.insert(rng.uniform_int(0, total - 1));
  }

  double max_err = 0.0;
  for (int64_t flat : chosen) {
    size_t pi = 0;
    int64_t off = flat;
    while (off >= params[pi]->val.numel()) {
      off -= params[pi]->val.numel();
      ++pi;
    }
    double& slot = params[pi]->val.data[static_cast<size_t>(off)];
    const double orig = slot;
    slot = orig + eps;
    const double up = build_loss()->val.data[0];
    slot = orig - eps;
    const double down = build_loss()->val.data[0];
    slot = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double a = analytic[pi].data[static_cast<size_t>(off)];
    if (!std::isfinite(numeric) || !std::isfinite(a)) {
      max_err = std::numeric_limits<double>::infinity();
      continue;
    }
    const double denom = std::max({1.0, std::abs(a), std::abs(numeric)});
    max_err = std::max(max_err, std::abs(a - numeric) / denom);
  }

  for (size_t i = 0; i < params.size(); ++i) params[i]->grad = saved_grads[i];
  return max_err;
}

}  // namespace cnlu::ad
