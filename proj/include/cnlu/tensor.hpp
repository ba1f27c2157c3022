#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace cnlu {

// Dense row-major matrix of doubles. Vectors travel as 1xN rows; embedding
// tables as VxD. 64-bit values keep finite-difference checks clean; disk
// checkpoints round to 32-bit.
struct Tensor {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int64_t r, int64_t c) : rows(r), cols(c), data(static_cast<size_t>(r * c), 0.0) {}

  static Tensor zeros(int64_t r, int64_t c) { return Tensor(r, c); }
  static Tensor full(int64_t r, int64_t c, double v);
  static Tensor row(std::vector<double> values);
  static Tensor scalar(double v);

  int64_t numel() const { return rows * cols; }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }

  double& at(int64_t i, int64_t j) { return data[static_cast<size_t>(i * cols + j)]; }
  double at(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * cols + j)]; }
  double* row_ptr(int64_t i) { return data.data() + i * cols; }
  const double* row_ptr(int64_t i) const { return data.data() + i * cols; }

  void fill(double v);
  bool all_finite() const;
  std::string shape_str() const;  // "[rows,cols]"
};

// C = A * B
void matmul_into(const Tensor& a, const Tensor& b, Tensor& c);
// C = A * B^T
void matmul_nt_into(const Tensor& a, const Tensor& b, Tensor& c);
// A_grad += C_grad * B^T ; B_grad += A^T * C_grad  (for C = A * B)
void matmul_backward(const Tensor& a, const Tensor& b, const Tensor& c_grad,
                     Tensor& a_grad, Tensor& b_grad, bool need_a, bool need_b);
// For C = A * B^T: A_grad += C_grad * B ; B_grad += C_grad^T * A
void matmul_nt_backward(const Tensor& a, const Tensor& b, const Tensor& c_grad,
                        Tensor& a_grad, Tensor& b_grad, bool need_a, bool need_b);

}  // namespace cnlu
