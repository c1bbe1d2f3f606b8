#pragma once

#include <vector>

#include "foresee/autograd.hpp"
#include "foresee/matrix.hpp"

namespace foresee {

enum class ThresholdRule { Universal, Fixed };

struct WaveletConfig {
  int order = 2;       // dbN family order, 1..4 shipped
  int levels = 2;      // decomposition depth
  ThresholdRule rule = ThresholdRule::Universal;
  double fixed_lambda = 0.0;
};

struct DwtCoeffs {
  std::vector<double> approx;                    // coarsest level
  std::vector<std::vector<double>> details;      // details[0] = coarsest
  std::vector<double> flat() const;              // approx then details, coarse->fine
};

// Orthonormal multi-level Daubechies analysis bank with periodic extension.
// The filter pair is checked for the quadrature-mirror conditions at
// construction. Signal length must be divisible by 2^levels.
class DaubechiesBank {
 public:
  DaubechiesBank(const WaveletConfig& cfg, int signal_len);

  DwtCoeffs forward(const std::vector<double>& signal) const;
  std::vector<double> inverse(const DwtCoeffs& coeffs) const;

  // Full analysis map as a signal_len x signal_len orthonormal matrix:
  // y = W x with y laid out as [approx, details coarse..fine].
  const Mat& analysis_matrix() const { return analysis_; }
  int signal_len() const { return n_; }
  int levels() const { return cfg_.levels; }
  int approx_len() const { return n_ >> cfg_.levels; }

  // Universal threshold: sigma_hat * sqrt(2 ln n), sigma_hat from the median
  // absolute finest-level detail coefficient / 0.6745.
  double universal_lambda(const DwtCoeffs& coeffs) const;
  double pick_lambda(const DwtCoeffs& coeffs) const;

 private:
  WaveletConfig cfg_;
  int n_;
  std::vector<double> h_;  // scaling (low-pass) filter
  Mat analysis_;
};

std::vector<double> soft_threshold(const std::vector<double>& coeffs, double lambda);
double soft_threshold(double x, double lambda);

// Analysis -> soft-threshold details (approximation untouched) -> synthesis.
std::vector<double> dwt_denoise(const std::vector<double>& signal,
                                const WaveletConfig& cfg);

// Same pipeline through the autograd tape: the transform participates in the
// backward pass as its exact linear maps, with shrinkage subgradient 0 at kinks.
// The threshold is chosen from the current values and held fixed in the graph.
ag::Var dwt_denoise(const ag::Var& signal, const WaveletConfig& cfg);

}  // namespace foresee
