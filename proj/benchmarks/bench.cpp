#include <benchmark/benchmark.h>

#include "foresee/eval.hpp"
#include "foresee/model.hpp"
#include "foresee/survival.hpp"
#include "foresee/wavelet.hpp"

using namespace foresee;

namespace {

Mat random_mat(int r, int c, RngStream& rng) {
  Mat m(r, c);
  for (size_t k = 0; k < m.size(); ++k) m.at(k) = rng.normal();
  return m;
}

void bm_matmul(benchmark::State& state) {
  int n = (int)state.range(0);
  RngStream rng(1, "bench");
  Mat a = random_mat(n, n, rng), b = random_mat(n, n, rng);
  for (auto _ : state) benchmark::DoNotOptimize(matmul(a, b));
}
BENCHMARK(bm_matmul)->Arg(64)->Arg(128)->Arg(256);

void bm_dwt_denoise(benchmark::State& state) {
  int n = (int)state.range(0);
  RngStream rng(2, "bench");
  std::vector<double> x(n);
  for (double& v : x) v = rng.normal();
  WaveletConfig cfg;
  cfg.order = 2;
  cfg.levels = 2;
  for (auto _ : state) benchmark::DoNotOptimize(dwt_denoise(x, cfg));
}
BENCHMARK(bm_dwt_denoise)->Arg(64)->Arg(256);

void bm_cox_loss(benchmark::State& state) {
  int n = (int)state.range(0);
  RngStream rng(3, "bench");
  std::vector<double> o(n), t(n);
  std::vector<int> e(n);
  for (int i = 0; i < n; ++i) {
    o[i] = rng.normal();
    t[i] = 1.0 + rng.uniform();
    e[i] = i % 3 != 0;
  }
  for (auto _ : state) {
    ag::Var l = foresee::cox_loss(ag::constant(Mat::col(o)), t, e);
    benchmark::DoNotOptimize(l.item());
  }
}
BENCHMARK(bm_cox_loss)->Arg(25)->Arg(200);

void bm_c_index(benchmark::State& state) {
  int n = (int)state.range(0);
  RngStream rng(4, "bench");
  std::vector<double> risk(n), t(n);
  std::vector<int> e(n);
  for (int i = 0; i < n; ++i) {
    risk[i] = rng.normal();
    t[i] = 1.0 + rng.uniform_int(50);
    e[i] = i % 4 != 0;
  }
  for (auto _ : state) benchmark::DoNotOptimize(c_index(risk, t, e));
}
BENCHMARK(bm_c_index)->Arg(50)->Arg(200);

Cohort bench_cohort(int n) {
  CohortSchema s;
  s.d_x = 16;
  s.rna_dim = 64;
  s.cm_dim = 32;
  s.grids = {GridShape{4, 4}, GridShape{3, 3}, GridShape{2, 2}};
  GenerateOptions opt;
  RngStream rng(5, "datagen");
  return generate_cohort(n, s, opt, rng);
}

void bm_forward_eval(benchmark::State& state) {
  Cohort co = bench_cohort(1);
  ModelConfig cfg;
  cfg.dim = 16;
  cfg.cft.heads = 2;
  cfg.cft.fusion_inner = 8;
  cfg.hae.chunk = 8;
  cfg.hae.wavelet.levels = 1;
  cfg.sync_dims();
  ForeseeModel model(cfg, co.schema, 6);
  for (auto _ : state) {
    ModelForward f = model.forward_eval(co.patients[0]);
    benchmark::DoNotOptimize(f.risk().fused_risk);
  }
}
BENCHMARK(bm_forward_eval);

void bm_train_step(benchmark::State& state) {
  Cohort co = bench_cohort(4);
  ModelConfig cfg;
  cfg.dim = 16;
  cfg.cft.heads = 2;
  cfg.cft.fusion_inner = 8;
  cfg.hae.chunk = 8;
  cfg.hae.wavelet.levels = 1;
  cfg.sync_dims();
  ForeseeModel model(cfg, co.schema, 7);
  std::vector<double> t;
  std::vector<int> e;
  for (auto& p : co.patients) {
    t.push_back(p.survival_time);
    e.push_back(p.event);
  }
  uint64_t step = 0;
  for (auto _ : state) {
    std::array<std::vector<ag::Var>, 3> outs;
    std::vector<ag::Var> tri;
    for (auto& p : co.patients) {
      RngStream drop(step, "dropout"), mask(step, "masking");
      ModelForward f = model.forward_train(p, drop, mask);
      for (int m = 0; m < 3; ++m) outs[m].push_back(f.outputs[m]);
      tri.push_back(f.trimae_loss);
    }
    std::array<ag::Var, 3> cox;
    for (int m = 0; m < 3; ++m)
      cox[m] = foresee::cox_loss(ag::concat_rows(outs[m]), t, e);
    ag::Var total = total_loss(cox, ag::mean_all(ag::concat_rows(tri)), cfg.weights);
    model.params().zero_grad();
    ag::backward(total);
    benchmark::DoNotOptimize(total.item());
    ++step;
  }
}
BENCHMARK(bm_train_step);

}  // namespace

BENCHMARK_MAIN();
