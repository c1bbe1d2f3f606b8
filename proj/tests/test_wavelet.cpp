#include <doctest.h>

#include <cmath>

#include "foresee/wavelet.hpp"

using namespace foresee;

namespace {

std::vector<double> random_signal(int n, RngStream& rng) {
  std::vector<double> s(n);
  for (double& v : s) v = rng.normal();
  return s;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

double energy(const std::vector<double>& v) {
  double e = 0.0;
  for (double x : v) e += x * x;
  return e;
}

}  // namespace

TEST_CASE("analysis matrix is orthonormal for db1..db4") {
  for (int order = 1; order <= 4; ++order) {
    WaveletConfig cfg;
    cfg.order = order;
    cfg.levels = 2;
    DaubechiesBank bank(cfg, 32);
    const Mat& w = bank.analysis_matrix();
    Mat gram = matmul(w, w, false, true);  // W W^T should be I
    for (int i = 0; i < 32; ++i)
      for (int j = 0; j < 32; ++j)
        CHECK(gram(i, j) == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1).scale(1e-10));
  }
}

TEST_CASE("forward/inverse round-trips exactly for db1..db4") {
  RngStream rng(21, "wavelet_test");
  for (int order = 1; order <= 4; ++order) {
    for (int n : {16, 64, 256}) {
      WaveletConfig cfg;
      cfg.order = order;
      cfg.levels = 2;
      DaubechiesBank bank(cfg, n);
      auto x = random_signal(n, rng);
      auto back = bank.inverse(bank.forward(x));
      CHECK(max_abs_diff(x, back) < 1e-10);
    }
  }
}

TEST_CASE("lambda = 0 denoising is the identity") {
  RngStream rng(22, "wavelet_test");
  WaveletConfig cfg;
  cfg.rule = ThresholdRule::Fixed;
  cfg.fixed_lambda = 0.0;
  for (int order = 1; order <= 4; ++order) {
    cfg.order = order;
    auto x = random_signal(64, rng);
    CHECK(max_abs_diff(dwt_denoise(x, cfg), x) < 1e-10);
  }
}

TEST_CASE("Parseval: coefficient energy equals signal energy") {
  RngStream rng(23, "wavelet_test");
  for (int order = 1; order <= 4; ++order) {
    WaveletConfig cfg;
    cfg.order = order;
    cfg.levels = 3;
    DaubechiesBank bank(cfg, 64);
    auto x = random_signal(64, rng);
    auto coeffs = bank.forward(x);
    CHECK(std::fabs(energy(coeffs.flat()) - energy(x)) < 1e-10);
  }
}

TEST_CASE("soft threshold is odd, 1-Lipschitz, monotone, and a shrinkage") {
  RngStream rng(24, "wavelet_test");
  for (int i = 0; i < 1000; ++i) {
    double x = 4.0 * rng.normal();
    double y = 4.0 * rng.normal();
    double lam = std::fabs(rng.normal());
    double sx = soft_threshold(x, lam), sy = soft_threshold(y, lam);
    CHECK(soft_threshold(-x, lam) == doctest::Approx(-sx).epsilon(1e-15));
    CHECK(std::fabs(sx - sy) <= std::fabs(x - y) + 1e-15);
    if (x <= y) CHECK(sx <= sy + 1e-15);
    CHECK(std::fabs(sx) <= std::fabs(x) + 1e-15);
    if (std::fabs(x) <= lam) CHECK(sx == 0.0);
  }
}

TEST_CASE("bank rejects lengths not divisible by 2^levels") {
  WaveletConfig cfg;
  cfg.levels = 3;
  CHECK_THROWS_AS(DaubechiesBank(cfg, 20), ValidationError);
  CHECK_THROWS_AS([&] { WaveletConfig c; c.order = 9; return DaubechiesBank(c, 16); }(),
                  ValidationError);
}

TEST_CASE("universal threshold scales with the noise level") {
  RngStream rng(25, "wavelet_test");
  WaveletConfig cfg;
  DaubechiesBank bank(cfg, 256);
  auto x = random_signal(256, rng);
  auto loud = x;
  for (double& v : loud) v *= 10.0;
  double lam1 = bank.universal_lambda(bank.forward(x));
  double lam2 = bank.universal_lambda(bank.forward(loud));
  CHECK(lam1 > 0.0);
  CHECK(lam2 == doctest::Approx(10.0 * lam1).epsilon(1e-10));
}

TEST_CASE("denoising recovers a smooth signal from noise") {
  RngStream rng(26, "wavelet_test");
  const int n = 256;
  std::vector<double> clean(n), noisy(n);
  for (int i = 0; i < n; ++i) {
    clean[i] = std::sin(2.0 * M_PI * i / 64.0);
    noisy[i] = clean[i] + 0.4 * rng.normal();
  }
  WaveletConfig cfg;
  cfg.order = 4;
  cfg.levels = 3;
  auto den = dwt_denoise(noisy, cfg);
  double mse_noisy = 0.0, mse_den = 0.0;
  for (int i = 0; i < n; ++i) {
    mse_noisy += (noisy[i] - clean[i]) * (noisy[i] - clean[i]);
    mse_den += (den[i] - clean[i]) * (den[i] - clean[i]);
  }
  CHECK(mse_den < 0.5 * mse_noisy);
}

TEST_CASE("autograd denoise matches the plain vector pipeline") {
  RngStream rng(27, "wavelet_test");
  WaveletConfig cfg;
  cfg.order = 2;
  cfg.levels = 2;
  auto x = random_signal(64, rng);
  auto want = dwt_denoise(x, cfg);
  ag::Var got = dwt_denoise(ag::constant(Mat::row(x)), cfg);
  REQUIRE(got.rows() == 1);
  REQUIRE(got.cols() == 64);
  for (int j = 0; j < 64; ++j)
    CHECK(got.val()(0, j) == doctest::Approx(want[j]).epsilon(1).scale(1e-12));
}
