#include "foresee/wavelet.hpp"

#include <algorithm>
#include <cmath>

namespace foresee {

namespace {

const std::vector<double>& db_filter(int order) {
  static const std::vector<std::vector<double>> filters = {
      // db1 (Haar)
      {0.70710678118654752440, 0.70710678118654752440},
      // db2
      {0.48296291314453414337, 0.83651630373780772185, 0.22414386804201338102,
       -0.12940952255126038117},
      // db3
      {0.33267055295008261599, 0.80689150931109257649, 0.45987750211849157009,
       -0.13501102001025458869, -0.08544127388202666169, 0.03522629188570953660},
      // db4
      {0.23037781330889650086, 0.71484657055291564709, 0.63088076792985890788,
       -0.02798376941685985421, -0.18703481171909308407, 0.03084138183556076362,
       0.03288301166688519973, -0.01059740178506903210}};
  if (order < 1 || order > (int)filters.size())
    throw ValidationError("wavelet: dbN order must be in [1, " +
                          std::to_string(filters.size()) + "], got " +
                          std::to_string(order));
  return filters[order - 1];
}

// one analysis level with periodic extension; in has even length
void analyze_level(const std::vector<double>& h, const std::vector<double>& in,
                   std::vector<double>& approx, std::vector<double>& detail) {
  int m = (int)in.size();
  int half = m / 2;
  int L = (int)h.size();
  approx.assign(half, 0.0);
  detail.assign(half, 0.0);
  for (int k = 0; k < half; ++k) {
    double a = 0.0, d = 0.0;
    for (int i = 0; i < L; ++i) {
      double x = in[(2 * k + i) % m];
      a += h[i] * x;
      d += (i % 2 == 0 ? 1.0 : -1.0) * h[L - 1 - i] * x;
    }
    approx[k] = a;
    detail[k] = d;
  }
}

void synthesize_level(const std::vector<double>& h, const std::vector<double>& approx,
                      const std::vector<double>& detail, std::vector<double>& out) {
  int half = (int)approx.size();
  int m = 2 * half;
  int L = (int)h.size();
  out.assign(m, 0.0);
  for (int k = 0; k < half; ++k) {
    for (int i = 0; i < L; ++i) {
      double g = (i % 2 == 0 ? 1.0 : -1.0) * h[L - 1 - i];
      out[(2 * k + i) % m] += h[i] * approx[k] + g * detail[k];
    }
  }
}

}  // namespace

std::vector<double> DwtCoeffs::flat() const {
  std::vector<double> out = approx;
  for (auto& d : details) out.insert(out.end(), d.begin(), d.end());
  return out;
}

DaubechiesBank::DaubechiesBank(const WaveletConfig& cfg, int signal_len)
    : cfg_(cfg), n_(signal_len), h_(db_filter(cfg.order)) {
  if (cfg.levels < 1) throw ValidationError("wavelet: levels must be >= 1");
  if (signal_len < (1 << cfg.levels) || signal_len % (1 << cfg.levels) != 0)
    throw ValidationError("wavelet: signal length " + std::to_string(signal_len) +
                          " not divisible by 2^levels (levels=" +
                          std::to_string(cfg.levels) + ")");
  // quadrature-mirror sanity: sum h = sqrt(2), shifted self-products orthonormal
  double s = 0.0;
  for (double v : h_) s += v;
  if (std::fabs(s - std::sqrt(2.0)) > 1e-10)
    throw ValidationError("wavelet: filter fails sum rule");
  int L = (int)h_.size();
  for (int k = 0; 2 * k < L; ++k) {
    double dot = 0.0;
    for (int i = 0; i + 2 * k < L; ++i) dot += h_[i] * h_[i + 2 * k];
    if (std::fabs(dot - (k == 0 ? 1.0 : 0.0)) > 1e-10)
      throw ValidationError("wavelet: filter fails orthonormality");
  }
  // materialize the analysis map column by column
  analysis_ = Mat(n_, n_);
  std::vector<double> e(n_, 0.0);
  for (int j = 0; j < n_; ++j) {
    e[j] = 1.0;
    auto coeffs = forward(e).flat();
    for (int i = 0; i < n_; ++i) analysis_(i, j) = coeffs[i];
    e[j] = 0.0;
  }
}

DwtCoeffs DaubechiesBank::forward(const std::vector<double>& signal) const {
  if ((int)signal.size() != n_)
    throw ShapeError("dwt: expected length " + std::to_string(n_) + ", got " +
                     std::to_string(signal.size()));
  DwtCoeffs out;
  std::vector<double> cur = signal;
  std::vector<std::vector<double>> detail_stack;
  for (int lvl = 0; lvl < cfg_.levels; ++lvl) {
    std::vector<double> a, d;
    analyze_level(h_, cur, a, d);
    detail_stack.push_back(std::move(d));
    cur = std::move(a);
  }
  out.approx = std::move(cur);
  // store coarse -> fine
  for (auto it = detail_stack.rbegin(); it != detail_stack.rend(); ++it)
    out.details.push_back(std::move(*it));
  return out;
}

std::vector<double> DaubechiesBank::inverse(const DwtCoeffs& coeffs) const {
  std::vector<double> cur = coeffs.approx;
  for (auto& d : coeffs.details) {
    std::vector<double> next;
    synthesize_level(h_, cur, d, next);
    cur = std::move(next);
  }
  return cur;
}

double DaubechiesBank::universal_lambda(const DwtCoeffs& coeffs) const {
  const auto& finest = coeffs.details.back();
  std::vector<double> mag(finest.size());
  for (size_t i = 0; i < finest.size(); ++i) mag[i] = std::fabs(finest[i]);
  std::sort(mag.begin(), mag.end());
  size_t m = mag.size();
  double median = m % 2 ? mag[m / 2] : 0.5 * (mag[m / 2 - 1] + mag[m / 2]);
  double sigma = median / 0.6745;
  return sigma * std::sqrt(2.0 * std::log((double)n_));
}

double DaubechiesBank::pick_lambda(const DwtCoeffs& coeffs) const {
  return cfg_.rule == ThresholdRule::Universal ? universal_lambda(coeffs)
                                               : cfg_.fixed_lambda;
}

double soft_threshold(double x, double lambda) {
  if (lambda < 0.0) throw ValidationError("soft_threshold: lambda must be >= 0");
  return x > lambda ? x - lambda : (x < -lambda ? x + lambda : 0.0);
}

std::vector<double> soft_threshold(const std::vector<double>& coeffs, double lambda) {
  std::vector<double> out(coeffs.size());
  for (size_t i = 0; i < coeffs.size(); ++i) out[i] = soft_threshold(coeffs[i], lambda);
  return out;
}

std::vector<double> dwt_denoise(const std::vector<double>& signal,
                                const WaveletConfig& cfg) {
  DaubechiesBank bank(cfg, (int)signal.size());
  DwtCoeffs c = bank.forward(signal);
  double lambda = bank.pick_lambda(c);
  for (auto& d : c.details) d = soft_threshold(d, lambda);
  return bank.inverse(c);
}

ag::Var dwt_denoise(const ag::Var& signal, const WaveletConfig& cfg) {
  if (signal.rows() != 1)
    throw ShapeError("dwt_denoise: expected a 1xN row, got " +
                     signal.val().shape_str());
  int n = signal.cols();
  DaubechiesBank bank(cfg, n);
  std::vector<double> vals(signal.val().data(), signal.val().data() + n);
  DwtCoeffs c = bank.forward(vals);
  double lambda = bank.pick_lambda(c);
  // Exactly-flat signal stretches leave detail coefficients that are zero up
  // to floating-point dust; a universal threshold built from their median is
  // dust too. Snap it to the zero (identity) case so those coefficients keep
  // their true unit slope instead of a spurious dead zone of width ~1e-16.
  double max_mag = 0.0;
  for (const auto& d : c.details)
    for (double v : d) max_mag = std::max(max_mag, std::fabs(v));
  if (lambda <= 1e-12 * max_mag) lambda = 0.0;

  ag::Var w = ag::constant(bank.analysis_matrix());
  ag::Var coeffs = ag::matmul_nt(signal, w);  // row form of W x
  int na = bank.approx_len();
  ag::Var approx = ag::slice_cols(coeffs, 0, na);
  ag::Var det = ag::slice_cols(coeffs, na, n);

  // The threshold participates in the graph: for the universal rule it is the
  // scaled median magnitude of the finest details, expressed through a fixed
  // selection vector (the order statistic's position and sign are frozen at
  // the current values, which is valid almost everywhere).
  ag::Var lam;
  if (cfg.rule == ThresholdRule::Universal && lambda > 0.0) {
    int nf = n / 2;  // finest-level details occupy the last n/2 columns
    std::vector<double> flat = bank.forward(vals).flat();
    std::vector<int> idx(nf);
    for (int i = 0; i < nf; ++i) idx[i] = n - nf + i;
    std::sort(idx.begin(), idx.end(), [&](int a, int b) {
      return std::fabs(flat[a]) < std::fabs(flat[b]);
    });
    // Dust-level coefficients sit at the corner of |.| where the two-sided
    // derivative is zero; give them sign 0 instead of the frozen sign so the
    // threshold's gradient matches the symmetric limit.
    auto sgn = [&](int i) {
      if (std::fabs(flat[i]) <= 1e-12 * max_mag) return 0.0;
      return flat[i] > 0.0 ? 1.0 : -1.0;
    };
    Mat sel(n, 1);
    if (nf % 2) {
      sel(idx[nf / 2], 0) = sgn(idx[nf / 2]);
    } else {
      sel(idx[nf / 2 - 1], 0) = 0.5 * sgn(idx[nf / 2 - 1]);
      sel(idx[nf / 2], 0) = 0.5 * sgn(idx[nf / 2]);
    }
    double k = std::sqrt(2.0 * std::log((double)n)) / 0.6745;
    lam = ag::scale(ag::matmul(coeffs, ag::constant(std::move(sel))), k);
  } else {
    lam = ag::scalar(lambda);
  }

  // Soft threshold with a variable lambda: membership and signs are frozen at
  // the current values (exact off the kinks), the retained coefficients keep
  // full gradients in both the coefficient and the threshold.
  int nd = n - na;
  Mat keep(1, nd), sign_row(1, nd);
  for (int j = 0; j < nd; ++j) {
    double cj = det.val()(0, j);
    // lambda == 0 makes the shrink an identity, so everything is kept; a
    // coefficient that is exactly 0 then still needs slope 1, not the dead
    // zone's 0.
    if (std::fabs(cj) > lambda || lambda == 0.0) {
      keep(0, j) = 1.0;
      sign_row(0, j) = cj > 0.0 ? 1.0 : (cj < 0.0 ? -1.0 : 0.0);
    }
  }
  ag::Var shrunk = ag::mul(ag::constant(std::move(keep)),
                           ag::sub(det, ag::mul_scalar(ag::constant(std::move(sign_row)), lam)));
  ag::Var kept = ag::concat_cols({approx, shrunk});
  return ag::matmul(kept, w);  // row form of W^T y
}

}  // namespace foresee
