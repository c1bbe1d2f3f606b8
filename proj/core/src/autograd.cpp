#include "foresee/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_set>

namespace foresee {
namespace ag {

namespace {

NodePtr fresh(Mat value) {
  auto n = std::make_shared<Node>();
  n->value = std::move(value);
  return n;
}

bool any_rg(std::initializer_list<const Var*> vars) {
  for (auto* v : vars)
    if (v->requires_grad()) return true;
  return false;
}

void accum(const NodePtr& p, const Mat& g) {
  if (!p->requires_grad) return;
  p->ensure_grad();
  for (size_t k = 0; k < g.size(); ++k) p->grad.at(k) += g.at(k);
}

double phi_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}
double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

}  // namespace

Var leaf(Mat v, bool requires_grad) {
  auto n = fresh(std::move(v));
  n->requires_grad = requires_grad;
  return Var(n);
}

Var constant(Mat v) { return leaf(std::move(v), false); }

Var scalar(double v) { return constant(Mat::scalar(v)); }

void backward(const Var& root) {
  if (root.rows() != 1 || root.cols() != 1)
    throw ShapeError("backward: root must be 1x1, got " + root.val().shape_str());
  // reverse post-order DFS over parent edges: consumers run before producers
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.push_back({root.node().get(), 0});
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root.node()->ensure_grad();
  root.node()->grad.at(0) = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && !n->grad.empty()) n->backprop(*n);
  }
}

// ---- binary elementwise ----

Var add(const Var& a, const Var& b) {
  if (!a.val().same_shape(b.val()))
    throw ShapeError("add: shapes " + a.val().shape_str() + " vs " + b.val().shape_str());
  Mat v = a.val();
  for (size_t k = 0; k < v.size(); ++k) v.at(k) += b.val().at(k);
  auto n = fresh(std::move(v));
  if (any_rg({&a, &b})) {
    n->requires_grad = true;
    n->parents = {a.node(), b.node()};
    n->backprop = [](Node& self) {
      accum(self.parents[0], self.grad);
      accum(self.parents[1], self.grad);
    };
  }
  return Var(n);
}

Var add_rowvec(const Var& a, const Var& b) {
  if (b.rows() != 1 || b.cols() != a.cols())
    throw ShapeError("add_rowvec: " + a.val().shape_str() + " + " + b.val().shape_str());
  Mat v = a.val();
  for (int i = 0; i < v.rows(); ++i)
    for (int j = 0; j < v.cols(); ++j) v(i, j) += b.val()(0, j);
  auto n = fresh(std::move(v));
  if (any_rg({&a, &b})) {
    n->requires_grad = true;
    n->parents = {a.node(), b.node()};
    n->backprop = [](Node& self) {
      accum(self.parents[0], self.grad);
      auto& pb = self.parents[1];
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (int i = 0; i < self.grad.rows(); ++i)
          for (int j = 0; j < self.grad.cols(); ++j) pb->grad(0, j) += self.grad(i, j);
      }
    };
  }
  return Var(n);
}

Var sub(const Var& a, const Var& b) { return add(a, neg(b)); }

Var neg(const Var& a) { return scale(a, -1.0); }

Var scale(const Var& a, double c) {
  Mat v = a.val();
  for (size_t k = 0; k < v.size(); ++k) v.at(k) *= c;
  auto n = fresh(std::move(v));
  if (a.requires_grad()) {
    n->requires_grad = true;
    n->parents = {a.node()};
    n->backprop = [c](Node& self) {
      auto& p = self.parents[0];
      if (!p->requires_grad) return;
      p->ensure_grad();
      for (size_t k = 0; k < self.grad.size(); ++k) p->grad.at(k) += c * self.grad.at(k);
    };
  }
  return Var(n);
}

Var mul(const Var& a, const Var& b) {
  if (!a.val().same_shape(b.val()))
    throw ShapeError("mul: shapes " + a.val().shape_str() + " vs " + b.val().shape_str());
  Mat v = a.val();
  for (size_t k = 0; k < v.size(); ++k) v.at(k) *= b.val().at(k);
  auto n = fresh(std::move(v));
  if (any_rg({&a, &b})) {
    n->requires_grad = true;
    n->parents = {a.node(), b.node()};
    n->backprop = [](Node& self) {
      auto &pa = self.parents[0], &pb = self.parents[1];
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (size_t k = 0; k < self.grad.size(); ++k)
          pa->grad.at(k) += self.grad.at(k) * pb->value.at(k);
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (size_t k = 0; k < self.grad.size(); ++k)
          pb->grad.at(k) += self.grad.at(k) * pa->value.at(k);
      }
    };
  }
  return Var(n);
}

Var mul_rowvec(const Var& a, const Var& g) {
  if (g.rows() != 1 || g.cols() != a.cols())
    throw ShapeError("mul_rowvec: " + a.val().shape_str() + " * " + g.val().shape_str());
  Mat v = a.val();
  for (int i = 0; i < v.rows(); ++i)
    for (int j = 0; j < v.cols(); ++j) v(i, j) *= g.val()(0, j);
  auto n = fresh(std::move(v));
  if (any_rg({&a, &g})) {
    n->requires_grad = true;
    n->parents = {a.node(), g.node()};
    n->backprop = [](Node& self) {
      auto &pa = self.parents[0], &pg = self.parents[1];
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (int i = 0; i < self.grad.rows(); ++i)
          for (int j = 0; j < self.grad.cols(); ++j)
            pa->grad(i, j) += self.grad(i, j) * pg->value(0, j);
      }
      if (pg->requires_grad) {
        pg->ensure_grad();
        for (int i = 0; i < self.grad.rows(); ++i)
          for (int j = 0; j < self.grad.cols(); ++j)
            pg->grad(0, j) += self.grad(i, j) * pa->value(i, j);
      }
    };
  }
  return Var(n);
}

Var mul_scalar(const Var& a, const Var& s) {
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("mul_scalar: s must be 1x1");
  double sv = s.item();
  Mat v = a.val();
  for (size_t k = 0; k < v.size(); ++k) v.at(k) *= sv;
  auto n = fresh(std::move(v));
  if (any_rg({&a, &s})) {
    n->requires_grad = true;
    n->parents = {a.node(), s.node()};
    n->backprop = [](Node& self) {
      auto &pa = self.parents[0], &ps = self.parents[1];
      double sv = ps->value.at(0);
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (size_t k = 0; k < self.grad.size(); ++k)
          pa->grad.at(k) += self.grad.at(k) * sv;
      }
      if (ps->requires_grad) {
        ps->ensure_grad();
        double acc = 0.0;
        for (size_t k = 0; k < self.grad.size(); ++k)
          acc += self.grad.at(k) * pa->value.at(k);
        ps->grad.at(0) += acc;
      }
    };
  }
  return Var(n);
}

// ---- matmul ----

Var matmul(const Var& a, const Var& b) {
  auto n = fresh(foresee::matmul(a.val(), b.val()));
  if (any_rg({&a, &b})) {
    n->requires_grad = true;
    n->parents = {a.node(), b.node()};
    n->backprop = [](Node& self) {
      auto &pa = self.parents[0], &pb = self.parents[1];
      if (pa->requires_grad) {
        pa->ensure_grad();
        matmul_acc(pa->grad, self.grad, pb->value, false, true);  // dA = G B^T
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        matmul_acc(pb->grad, pa->value, self.grad, true, false);  // dB = A^T G
      }
    };
  }
  return Var(n);
}

Var matmul_nt(const Var& a, const Var& b) {
  auto n = fresh(foresee::matmul(a.val(), b.val(), false, true));
  if (any_rg({&a, &b})) {
    n->requires_grad = true;
    n->parents = {a.node(), b.node()};
    n->backprop = [](Node& self) {
      auto &pa = self.parents[0], &pb = self.parents[1];
      if (pa->requires_grad) {
        pa->ensure_grad();
        matmul_acc(pa->grad, self.grad, pb->value, false, false);  // dA = G B
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        matmul_acc(pb->grad, self.grad, pa->value, true, false);  // dB = G^T A
      }
    };
  }
  return Var(n);
}

// ---- nonlinearities ----

Var gelu(const Var& a) {
  Mat v = a.val();
  for (size_t k = 0; k < v.size(); ++k) v.at(k) = v.at(k) * phi_cdf(v.at(k));
  auto n = fresh(std::move(v));
  if (a.requires_grad()) {
    n->requires_grad = true;
    n->parents = {a.node()};
    n->backprop = [](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t k = 0; k < self.grad.size(); ++k) {
        double x = p->value.at(k);
        p->grad.at(k) += self.grad.at(k) * (phi_cdf(x) + x * phi_pdf(x));
      }
    };
  }
  return Var(n);
}

Var tanh_v(const Var& a) {
  Mat v = a.val();
  for (size_t k = 0; k < v.size(); ++k) v.at(k) = std::tanh(v.at(k));
  auto n = fresh(std::move(v));
  if (a.requires_grad()) {
    n->requires_grad = true;
    n->parents = {a.node()};
    n->backprop = [](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t k = 0; k < self.grad.size(); ++k) {
        double y = self.value.at(k);
        p->grad.at(k) += self.grad.at(k) * (1.0 - y * y);
      }
    };
  }
  return Var(n);
}

Var sigmoid_v(const Var& a) {
  Mat v = a.val();
  for (size_t k = 0; k < v.size(); ++k) v.at(k) = 1.0 / (1.0 + std::exp(-v.at(k)));
  auto n = fresh(std::move(v));
  if (a.requires_grad()) {
    n->requires_grad = true;
    n->parents = {a.node()};
    n->backprop = [](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t k = 0; k < self.grad.size(); ++k) {
        double y = self.value.at(k);
        p->grad.at(k) += self.grad.at(k) * y * (1.0 - y);
      }
    };
  }
  return Var(n);
}

Var softshrink(const Var& a, double lambda) {
  if (lambda < 0.0) throw ValidationError("softshrink: lambda must be >= 0");
  Mat v = a.val();
  for (size_t k = 0; k < v.size(); ++k) {
    double x = v.at(k);
    v.at(k) = x > lambda ? x - lambda : (x < -lambda ? x + lambda : 0.0);
  }
  auto n = fresh(std::move(v));
  if (a.requires_grad()) {
    n->requires_grad = true;
    n->parents = {a.node()};
    n->backprop = [lambda](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t k = 0; k < self.grad.size(); ++k)
        if (std::fabs(p->value.at(k)) > lambda) p->grad.at(k) += self.grad.at(k);
    };
  }
  return Var(n);
}

// ---- softmax / layer norm ----

Var row_softmax(const Var& a) {
  if (a.val().empty()) throw ShapeError("row_softmax: empty input");
  Mat v = a.val();
  for (int i = 0; i < v.rows(); ++i) {
    double mx = v(i, 0);
    for (int j = 1; j < v.cols(); ++j) mx = std::max(mx, v(i, j));
    double z = 0.0;
    for (int j = 0; j < v.cols(); ++j) {
      v(i, j) = std::exp(v(i, j) - mx);
      z += v(i, j);
    }
    for (int j = 0; j < v.cols(); ++j) v(i, j) /= z;
  }
  auto n = fresh(std::move(v));
  if (a.requires_grad()) {
    n->requires_grad = true;
    n->parents = {a.node()};
    n->backprop = [](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int i = 0; i < self.grad.rows(); ++i) {
        double dot = 0.0;
        for (int j = 0; j < self.grad.cols(); ++j)
          dot += self.grad(i, j) * self.value(i, j);
        for (int j = 0; j < self.grad.cols(); ++j)
          p->grad(i, j) += self.value(i, j) * (self.grad(i, j) - dot);
      }
    };
  }
  return Var(n);
}

Var layer_norm_rows(const Var& x, const Var& gamma, const Var& beta, double eps) {
  if (eps <= 0.0) throw ValidationError("layer_norm: eps must be > 0");
  int c = x.cols();
  if (gamma.cols() != c || gamma.rows() != 1 || beta.cols() != c || beta.rows() != 1)
    throw ShapeError("layer_norm: affine params must be 1x" + std::to_string(c) +
                     ", got gamma " + gamma.val().shape_str() + ", beta " +
                     beta.val().shape_str());
  Mat v(x.rows(), c);
  Mat xhat(x.rows(), c);
  std::vector<double> inv_sigma(x.rows());
  for (int i = 0; i < x.rows(); ++i) {
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += x.val()(i, j);
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) {
      double d = x.val()(i, j) - mu;
      var += d * d;
    }
    var /= c;
    double is = 1.0 / std::sqrt(var + eps);
    inv_sigma[i] = is;
    for (int j = 0; j < c; ++j) {
      xhat(i, j) = (x.val()(i, j) - mu) * is;
      v(i, j) = gamma.val()(0, j) * xhat(i, j) + beta.val()(0, j);
    }
  }
  auto n = fresh(std::move(v));
  if (any_rg({&x, &gamma, &beta})) {
    n->requires_grad = true;
    n->parents = {x.node(), gamma.node(), beta.node()};
    n->backprop = [xhat = std::move(xhat), inv_sigma = std::move(inv_sigma)](Node& self) {
      auto &px = self.parents[0], &pg = self.parents[1], &pb = self.parents[2];
      int c = self.value.cols();
      if (pg->requires_grad) {
        pg->ensure_grad();
        for (int i = 0; i < self.grad.rows(); ++i)
          for (int j = 0; j < c; ++j) pg->grad(0, j) += self.grad(i, j) * xhat(i, j);
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (int i = 0; i < self.grad.rows(); ++i)
          for (int j = 0; j < c; ++j) pb->grad(0, j) += self.grad(i, j);
      }
      if (px->requires_grad) {
        px->ensure_grad();
        for (int i = 0; i < self.grad.rows(); ++i) {
          double mean_g = 0.0, mean_gx = 0.0;
          std::vector<double> g(c);
          for (int j = 0; j < c; ++j) {
            g[j] = self.grad(i, j) * pg->value(0, j);
            mean_g += g[j];
            mean_gx += g[j] * xhat(i, j);
          }
          mean_g /= c;
          mean_gx /= c;
          for (int j = 0; j < c; ++j)
            px->grad(i, j) += inv_sigma[i] * (g[j] - mean_g - xhat(i, j) * mean_gx);
        }
      }
    };
  }
  return Var(n);
}

// ---- structural ----

Var concat_rows(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_rows: empty input list");
  int c = xs[0].cols(), r = 0;
  for (auto& x : xs) {
    if (x.cols() != c) throw ShapeError("concat_rows: column mismatch");
    r += x.rows();
  }
  Mat v(r, c);
  int off = 0;
  for (auto& x : xs) {
    for (int i = 0; i < x.rows(); ++i)
      for (int j = 0; j < c; ++j) v(off + i, j) = x.val()(i, j);
    off += x.rows();
  }
  auto n = fresh(std::move(v));
  bool rg = false;
  for (auto& x : xs) rg = rg || x.requires_grad();
  if (rg) {
    n->requires_grad = true;
    for (auto& x : xs) n->parents.push_back(x.node());
    n->backprop = [](Node& self) {
      int off = 0;
      for (auto& p : self.parents) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (int i = 0; i < p->value.rows(); ++i)
            for (int j = 0; j < p->value.cols(); ++j)
              p->grad(i, j) += self.grad(off + i, j);
        }
        off += p->value.rows();
      }
    };
  }
  return Var(n);
}

Var concat_cols(const std::vector<Var>& xs) {
  if (xs.empty()) throw ShapeError("concat_cols: empty input list");
  int r = xs[0].rows(), c = 0;
  for (auto& x : xs) {
    if (x.rows() != r) throw ShapeError("concat_cols: row mismatch");
    c += x.cols();
  }
  Mat v(r, c);
  int off = 0;
  for (auto& x : xs) {
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < x.cols(); ++j) v(i, off + j) = x.val()(i, j);
    off += x.cols();
  }
  auto n = fresh(std::move(v));
  bool rg = false;
  for (auto& x : xs) rg = rg || x.requires_grad();
  if (rg) {
    n->requires_grad = true;
    for (auto& x : xs) n->parents.push_back(x.node());
    n->backprop = [](Node& self) {
      int off = 0;
      for (auto& p : self.parents) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (int i = 0; i < p->value.rows(); ++i)
            for (int j = 0; j < p->value.cols(); ++j)
              p->grad(i, j) += self.grad(i, off + j);
        }
        off += p->value.cols();
      }
    };
  }
  return Var(n);
}

Var slice_rows(const Var& x, int r0, int r1) {
  if (r0 < 0 || r1 > x.rows() || r0 >= r1)
    throw ShapeError("slice_rows: bad range [" + std::to_string(r0) + ", " +
                     std::to_string(r1) + ") for " + x.val().shape_str());
  Mat v(r1 - r0, x.cols());
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < x.cols(); ++j) v(i - r0, j) = x.val()(i, j);
  auto n = fresh(std::move(v));
  if (x.requires_grad()) {
    n->requires_grad = true;
    n->parents = {x.node()};
    n->backprop = [r0](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int i = 0; i < self.grad.rows(); ++i)
        for (int j = 0; j < self.grad.cols(); ++j)
          p->grad(r0 + i, j) += self.grad(i, j);
    };
  }
  return Var(n);
}

Var slice_cols(const Var& x, int c0, int c1) {
  if (c0 < 0 || c1 > x.cols() || c0 >= c1)
    throw ShapeError("slice_cols: bad range for " + x.val().shape_str());
  Mat v(x.rows(), c1 - c0);
  for (int i = 0; i < x.rows(); ++i)
    for (int j = c0; j < c1; ++j) v(i, j - c0) = x.val()(i, j);
  auto n = fresh(std::move(v));
  if (x.requires_grad()) {
    n->requires_grad = true;
    n->parents = {x.node()};
    n->backprop = [c0](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int i = 0; i < self.grad.rows(); ++i)
        for (int j = 0; j < self.grad.cols(); ++j)
          p->grad(i, c0 + j) += self.grad(i, j);
    };
  }
  return Var(n);
}

Var gather_rows(const Var& x, std::vector<int> idx) {
  if (idx.empty()) throw ShapeError("gather_rows: empty index set");
  Mat v((int)idx.size(), x.cols());
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= x.rows())
      throw ShapeError("gather_rows: index " + std::to_string(idx[i]) +
                       " out of range for " + x.val().shape_str());
    for (int j = 0; j < x.cols(); ++j) v((int)i, j) = x.val()(idx[i], j);
  }
  auto n = fresh(std::move(v));
  if (x.requires_grad()) {
    n->requires_grad = true;
    n->parents = {x.node()};
    n->backprop = [idx = std::move(idx)](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t i = 0; i < idx.size(); ++i)
        for (int j = 0; j < self.grad.cols(); ++j)
          p->grad(idx[i], j) += self.grad((int)i, j);
    };
  }
  return Var(n);
}

Var shift_rows(const Var& x, int offset) {
  Mat v(x.rows(), x.cols());
  for (int i = 0; i < x.rows(); ++i) {
    int src = i - offset;
    if (src < 0 || src >= x.rows()) continue;
    for (int j = 0; j < x.cols(); ++j) v(i, j) = x.val()(src, j);
  }
  auto n = fresh(std::move(v));
  if (x.requires_grad()) {
    n->requires_grad = true;
    n->parents = {x.node()};
    n->backprop = [offset](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (int i = 0; i < self.grad.rows(); ++i) {
        int src = i - offset;
        if (src < 0 || src >= self.grad.rows()) continue;
        for (int j = 0; j < self.grad.cols(); ++j)
          p->grad(src, j) += self.grad(i, j);
      }
    };
  }
  return Var(n);
}

Var reshape(const Var& x, int rows, int cols) {
  if ((size_t)rows * cols != x.val().size())
    throw ShapeError("reshape: cannot view " + x.val().shape_str() + " as " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  Mat v(rows, cols);
  for (size_t k = 0; k < v.size(); ++k) v.at(k) = x.val().at(k);
  auto n = fresh(std::move(v));
  if (x.requires_grad()) {
    n->requires_grad = true;
    n->parents = {x.node()};
    n->backprop = [](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t k = 0; k < self.grad.size(); ++k) p->grad.at(k) += self.grad.at(k);
    };
  }
  return Var(n);
}

// ---- reductions ----

Var mean_rows(const Var& x) {
  Mat v(1, x.cols());
  for (int i = 0; i < x.rows(); ++i)
    for (int j = 0; j < x.cols(); ++j) v(0, j) += x.val()(i, j);
  for (int j = 0; j < x.cols(); ++j) v(0, j) /= x.rows();
  auto n = fresh(std::move(v));
  if (x.requires_grad()) {
    n->requires_grad = true;
    n->parents = {x.node()};
    n->backprop = [](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      double inv = 1.0 / p->value.rows();
      for (int i = 0; i < p->value.rows(); ++i)
        for (int j = 0; j < p->value.cols(); ++j)
          p->grad(i, j) += self.grad(0, j) * inv;
    };
  }
  return Var(n);
}

Var sum_all(const Var& x) {
  double s = 0.0;
  for (size_t k = 0; k < x.val().size(); ++k) s += x.val().at(k);
  auto n = fresh(Mat::scalar(s));
  if (x.requires_grad()) {
    n->requires_grad = true;
    n->parents = {x.node()};
    n->backprop = [](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      double g = self.grad.at(0);
      for (size_t k = 0; k < p->grad.size(); ++k) p->grad.at(k) += g;
    };
  }
  return Var(n);
}

Var mean_all(const Var& x) {
  return scale(sum_all(x), 1.0 / (double)x.val().size());
}

Var dropout(const Var& x, double rate, bool train, RngStream& rng) {
  if (rate < 0.0 || rate >= 1.0)
    throw ValidationError("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  if (!train || rate == 0.0) return x;
  double keep = 1.0 - rate;
  Mat mask(x.rows(), x.cols());
  for (size_t k = 0; k < mask.size(); ++k)
    mask.at(k) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  Mat v = x.val();
  for (size_t k = 0; k < v.size(); ++k) v.at(k) *= mask.at(k);
  auto n = fresh(std::move(v));
  if (x.requires_grad()) {
    n->requires_grad = true;
    n->parents = {x.node()};
    n->backprop = [mask = std::move(mask)](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      for (size_t k = 0; k < self.grad.size(); ++k)
        p->grad.at(k) += self.grad.at(k) * mask.at(k);
    };
  }
  return Var(n);
}

Var cox_loss(const Var& o, const std::vector<double>& times,
             const std::vector<int>& events) {
  int b = o.rows();
  if (o.cols() != 1) throw ShapeError("cox_loss: outputs must be Bx1");
  if ((int)times.size() != b || (int)events.size() != b)
    throw ShapeError("cox_loss: times/events length mismatch");
  for (double t : times)
    if (!(t > 0.0)) throw ValidationError("cox_loss: times must be positive");
  for (int e : events)
    if (e != 0 && e != 1) throw ValidationError("cox_loss: events must be 0/1");

  // per-event log-sum-exp over the risk set { j : t_j >= t_i }
  std::vector<double> lse(b, 0.0);
  double loss = 0.0;
  for (int i = 0; i < b; ++i) {
    if (!events[i]) continue;
    double mx = -1e308;
    for (int j = 0; j < b; ++j)
      if (times[j] >= times[i]) mx = std::max(mx, o.val()(j, 0));
    double z = 0.0;
    for (int j = 0; j < b; ++j)
      if (times[j] >= times[i]) z += std::exp(o.val()(j, 0) - mx);
    lse[i] = mx + std::log(z);
    loss += -o.val()(i, 0) + lse[i];
  }
  auto n = fresh(Mat::scalar(loss));
  if (o.requires_grad()) {
    n->requires_grad = true;
    n->parents = {o.node()};
    n->backprop = [times, events, lse](Node& self) {
      auto& p = self.parents[0];
      p->ensure_grad();
      double g = self.grad.at(0);
      int b = p->value.rows();
      for (int j = 0; j < b; ++j) {
        double d = events[j] ? -1.0 : 0.0;
        for (int i = 0; i < b; ++i)
          if (events[i] && times[j] >= times[i])
            d += std::exp(p->value(j, 0) - lse[i]);
        p->grad(j, 0) += g * d;
      }
    };
  }
  return Var(n);
}

}  // namespace ag
}  // namespace foresee
