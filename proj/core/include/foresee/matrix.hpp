#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace foresee {

struct ShapeError : std::runtime_error {
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DivergenceError : std::runtime_error {
  explicit DivergenceError(const std::string& msg) : std::runtime_error(msg) {}
};

// Dense row-major double matrix. Vectors are 1xN or Nx1 matrices.
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols) : rows_(rows), cols_(cols), d_((size_t)rows * cols, 0.0) {}
  Mat(int rows, int cols, std::vector<double> data)
      : rows_(rows), cols_(cols), d_(std::move(data)) {
    if (d_.size() != (size_t)rows * cols) throw ShapeError("Mat: data size mismatch");
  }

  static Mat scalar(double v) {
    Mat m(1, 1);
    m.d_[0] = v;
    return m;
  }
  static Mat row(std::vector<double> v) {
    int n = (int)v.size();
    return Mat(1, n, std::move(v));
  }
  static Mat col(std::vector<double> v) {
    int n = (int)v.size();
    return Mat(n, 1, std::move(v));
  }
  static Mat identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  size_t size() const { return d_.size(); }
  bool empty() const { return d_.empty(); }

  double& operator()(int i, int j) { return d_[(size_t)i * cols_ + j]; }
  double operator()(int i, int j) const { return d_[(size_t)i * cols_ + j]; }
  double& at(size_t k) { return d_[k]; }
  double at(size_t k) const { return d_[k]; }

  double* data() { return d_.data(); }
  const double* data() const { return d_.data(); }

  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }
  std::string shape_str() const {
    return std::to_string(rows_) + "x" + std::to_string(cols_);
  }

  void fill(double v) { std::fill(d_.begin(), d_.end(), v); }
  bool all_finite() const;
  double max_abs() const;

 private:
  int rows_ = 0, cols_ = 0;
  std::vector<double> d_;
};

// C = A*B (optionally transposing either operand), via BLAS dgemm.
Mat matmul(const Mat& a, const Mat& b, bool trans_a = false, bool trans_b = false);
// C += alpha * op(A)*op(B)
void matmul_acc(Mat& c, const Mat& a, const Mat& b, bool trans_a, bool trans_b,
                double alpha = 1.0);

void blas_single_thread();

}  // namespace foresee
