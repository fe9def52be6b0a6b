#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <random>
#include <vector>

#include "dhnn/common.hpp"

namespace dhnn::neural {

namespace detail {
struct TensorNode;
}

// Reverse-mode autodiff over dense 2-D values. Every operation returns a new
// Tensor recording its parents and a pull-back closure; backward() replays
// the closures in reverse topological order. Copying a Tensor copies the
// handle, not the node, so parameters keep their identity across steps.
class Tensor {
 public:
  Tensor() = default;

  static Tensor constant(Eigen::MatrixXd value);
  static Tensor parameter(Eigen::MatrixXd value);
  static Tensor zeros(Eigen::Index rows, Eigen::Index cols);

  bool defined() const { return node_ != nullptr; }
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  Eigen::Index size() const { return rows() * cols(); }
  const Eigen::MatrixXd& value() const;
  const Eigen::MatrixXd& grad() const;  // zeros until a backward pass reaches it
  bool requires_grad() const;

  // In-place value update for optimizers; shape must not change. Mutates the
  // shared node, so it is usable through const handles.
  void set_value(const Eigen::MatrixXd& v) const;
  void zero_grad() const;

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;
  friend struct TensorOps;
  friend void backward(const Tensor& root);
};

// Seeds d(root)/d(root) = 1 on a 1x1 root and accumulates gradients into
// every reachable tensor with requires_grad set. Gradients are reset at the
// start of each call.
void backward(const Tensor& root);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor cmul(const Tensor& a, const Tensor& b);  // elementwise
Tensor scale(const Tensor& a, double s);
Tensor add_rows(const Tensor& m, const Tensor& row);  // broadcast a 1 x C row
Tensor transpose(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor elu(const Tensor& a, double alpha);
Tensor abs(const Tensor& a);
Tensor softmax_rows(const Tensor& a);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, Eigen::Index start, Eigen::Index count);
Tensor slice_cols(const Tensor& a, Eigen::Index start, Eigen::Index count);
// Row-major reinterpretation to a new shape of equal size.
Tensor reshape(const Tensor& a, Eigen::Index rows, Eigen::Index cols);
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
Tensor scale_rows(const Tensor& m, const Tensor& col);  // row i scaled by col(i)
Tensor rsqrt(const Tensor& a);                          // x^(-1/2), x must be > 0
Tensor clamp_min(const Tensor& a, double floor);
// Inverted dropout; rate 0 returns the input unchanged (no RNG draw).
Tensor dropout(const Tensor& a, double rate, std::mt19937_64& rng);

}  // namespace dhnn::neural
