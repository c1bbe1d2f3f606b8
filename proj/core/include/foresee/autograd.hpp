#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "foresee/matrix.hpp"
#include "foresee/rng.hpp"

namespace foresee {
namespace ag {

struct Node;
using NodePtr = std::shared_ptr<Node>;

struct Node {
  Mat value;
  Mat grad;  // allocated lazily during backward
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backprop;  // reads this->grad, accumulates into parents

  void ensure_grad() {
    if (grad.empty()) grad = Mat(value.rows(), value.cols());
  }
};

// Lightweight handle to a node in the computation graph.
class Var {
 public:
  Var() = default;
  explicit Var(NodePtr n) : n_(std::move(n)) {}

  bool defined() const { return n_ != nullptr; }
  const Mat& val() const { return n_->value; }
  Mat& val() { return n_->value; }
  const Mat& grad() const { return n_->grad; }
  int rows() const { return n_->value.rows(); }
  int cols() const { return n_->value.cols(); }
  double item() const { return n_->value.at(0); }
  bool requires_grad() const { return n_ && n_->requires_grad; }
  NodePtr node() const { return n_; }

 private:
  NodePtr n_;
};

Var leaf(Mat v, bool requires_grad = true);
Var constant(Mat v);
Var scalar(double v);  // non-grad 1x1

// Runs reverse-mode accumulation from a 1x1 root. Leaf grads are zeroed first
// only if zero_grads is set; otherwise gradients accumulate.
void backward(const Var& root);

// ---- elementwise / structural ops ----
Var add(const Var& a, const Var& b);                  // same shape
Var add_rowvec(const Var& a, const Var& b);           // b is 1xC, broadcast over rows
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);                  // Hadamard
Var mul_rowvec(const Var& a, const Var& g);           // g is 1xC, broadcast over rows
Var mul_scalar(const Var& a, const Var& s);           // s is 1x1 Var
Var scale(const Var& a, double c);
Var neg(const Var& a);

Var matmul(const Var& a, const Var& b);               // A*B
Var matmul_nt(const Var& a, const Var& b);            // A*B^T

Var gelu(const Var& a);                               // exact Phi(x) form
Var tanh_v(const Var& a);
Var sigmoid_v(const Var& a);
Var softshrink(const Var& a, double lambda);          // sign(x)*max(|x|-l,0); subgrad 0 at kink

Var row_softmax(const Var& a);                        // softmax per row, max-stabilized
Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps);

Var concat_rows(const std::vector<Var>& xs);
Var concat_cols(const std::vector<Var>& xs);
Var slice_rows(const Var& x, int r0, int r1);         // [r0, r1)
Var slice_cols(const Var& x, int c0, int c1);
Var gather_rows(const Var& x, std::vector<int> idx);
Var shift_rows(const Var& x, int offset);             // zero-fill shift along rows
Var reshape(const Var& x, int rows, int cols);        // element-order preserving

Var mean_rows(const Var& x);                          // Nx C -> 1xC
Var sum_all(const Var& x);                            // -> 1x1
Var mean_all(const Var& x);                           // -> 1x1

Var dropout(const Var& x, double rate, bool train, RngStream& rng);

// Negative log Cox partial likelihood over a batch; o is Bx1 of model outputs.
// Risk set for event i is { j : t_j >= t_i } (ties included). Stabilized by
// max subtraction inside the log-sum-exp. Returns 1x1.
Var cox_loss(const Var& o, const std::vector<double>& times,
             const std::vector<int>& events);

}  // namespace ag
}  // namespace foresee
