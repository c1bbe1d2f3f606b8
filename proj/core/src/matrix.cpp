#include "foresee/matrix.hpp"

#include <cblas.h>

#include <algorithm>
#include <cmath>

extern "C" void openblas_set_num_threads(int);

namespace foresee {

bool Mat::all_finite() const {
  for (double v : d_)
    if (!std::isfinite(v)) return false;
  return true;
}

double Mat::max_abs() const {
  double m = 0.0;
  for (double v : d_) m = std::max(m, std::fabs(v));
  return m;
}

void matmul_acc(Mat& c, const Mat& a, const Mat& b, bool trans_a, bool trans_b,
                double alpha) {
  int m = trans_a ? a.cols() : a.rows();
  int k = trans_a ? a.rows() : a.cols();
  int kb = trans_b ? b.cols() : b.rows();
  int n = trans_b ? b.rows() : b.cols();
  if (k != kb)
    throw ShapeError("matmul: inner dimensions disagree: " + a.shape_str() +
                     (trans_a ? "^T" : "") + " * " + b.shape_str() + (trans_b ? "^T" : ""));
  if (c.rows() != m || c.cols() != n) throw ShapeError("matmul: output shape mismatch");
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
              trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a.data(), a.cols(),
              b.data(), b.cols(), 1.0, c.data(), c.cols());
}

Mat matmul(const Mat& a, const Mat& b, bool trans_a, bool trans_b) {
  int m = trans_a ? a.cols() : a.rows();
  int n = trans_b ? b.rows() : b.cols();
  Mat c(m, n);
  matmul_acc(c, a, b, trans_a, trans_b, 1.0);
  return c;
}

void blas_single_thread() { openblas_set_num_threads(1); }

}  // namespace foresee
