#include "cnlu/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cnlu {

Tensor Tensor::full(int64_t r, int64_t c, double v) {
  Tensor t(r, c);
  t.fill(v);
  return t;
}

Tensor Tensor::row(std::vector<double> values) {
  Tensor t;
  t.rows = 1;
  t.cols = static_cast<int64_t>(values.size());
  t.data = std::move(values);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t(1, 1);
  t.data[0] = v;
  return t;
}

void Tensor::fill(double v) { std::fill(data.begin(), data.end(), v); }

bool Tensor::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

std::string Tensor::shape_str() const {
  return "[" + std::to_string(rows) + "," + std::to_string(cols) + "]";
}

void matmul_into(const Tensor& a, const Tensor& b, Tensor& c) {
  const int64_t m = a.rows, k = a.cols, n = b.cols;
  c = Tensor(m, n);
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (int64_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b.row_ptr(p);
      for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void matmul_nt_into(const Tensor& a, const Tensor& b, Tensor& c) {
  const int64_t m = a.rows, k = a.cols, n = b.rows;
  c = Tensor(m, n);
  for (int64_t i = 0; i < m; ++i) {
    const double* arow = a.row_ptr(i);
    double* crow = c.row_ptr(i);
    for (int64_t j = 0; j < n; ++j) {
      const double* brow = b.row_ptr(j);
      double acc = 0.0;
      for (int64_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
      crow[j] = acc;
    }
  }
}

void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& c_grad,
                     Tensor& a_grad, Tensor& b_grad, bool need_a, bool need_b) {
  const int64_t m = a.rows, k = a.cols, n = b.cols;
  if (need_a) {
    // a_grad[i,p] += sum_j c_grad[i,j] * b[p,j]
    for (int64_t i = 0; i < m; ++i) {
      const double* grow = c_grad.row_ptr(i);
      double* arow = a_grad.row_ptr(i);
      for (int64_t p = 0; p < k; ++p) {
        const double* brow = b.row_ptr(p);
        double acc = 0.0;
        for (int64_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
        arow[p] += acc;
      }
    }
  }
  if (need_b) {
    // b_grad[p,j] += sum_i a[i,p] * c_grad[i,j]
    for (int64_t i = 0; i < m; ++i) {
      const double* arow = a.row_ptr(i);
      const double* grow = c_grad.row_ptr(i);
      for (int64_t p = 0; p < k; ++p) {
        const double av = arow[p];
        if (av == 0.0) continue;
        double* brow = b_grad.row_ptr(p);
        for (int64_t j = 0; j < n; ++j) brow[j] += av * grow[j];
      }
    }
  }
}

void matmul_nt_backward(const Tensor& a, const Tensor& b, const Tensor& c_grad,
                        Tensor& a_grad, Tensor& b_grad, bool need_a, bool need_b) {
  const int64_t m = a.rows, k = a.cols, n = b.rows;
  if (need_a) {
    // a_grad[i,p] += sum_j c_grad[i,j] * b[j,p]
    for (int64_t i = 0; i < m; ++i) {
      const double* grow = c_grad.row_ptr(i);
      double* arow = a_grad.row_ptr(i);
      for (int64_t j = 0; j < n; ++j) {
        const double gv = grow[j];
        if (gv == 0.0) continue;
        const double* brow = b.row_ptr(j);
        for (int64_t p = 0; p < k; ++p) arow[p] += gv * brow[p];
      }
    }
  }
  if (need_b) {
    // b_grad[j,p] += sum_i c_grad[i,j] * a[i,p]
    for (int64_t i = 0; i < m; ++i) {
      const double* grow = c_grad.row_ptr(i);
      const double* arow = a.row_ptr(i);
      for (int64_t j = 0; j < n; ++j) {
        const double gv = grow[j];
        if (gv == 0.0) continue;
        double* brow = b_grad.row_ptr(j);
        for (int64_t p = 0; p < k; ++p) brow[p] += gv * arow[p];
      }
    }
  }
}

}  // namespace cnlu
