#include <doctest.h>

#include <cmath>

#include "foresee/hae.hpp"
#include "foresee/optim.hpp"

using namespace foresee;
using namespace foresee::ag;

namespace {

Mat random_mat(int r, int c, RngStream& rng) {
  Mat m(r, c);
  for (size_t k = 0; k < m.size(); ++k) m.at(k) = rng.normal();
  return m;
}

Var weighted_sum(const Var& x, uint64_t seed) {
  RngStream rng(seed, "loss_weights");
  return sum_all(mul(x, constant(random_mat(x.rows(), x.cols(), rng))));
}

HaeConfig tiny_cfg() {
  HaeConfig c;
  c.chunk = 8;
  c.dim = 8;
  c.heads = 2;
  c.dropout = 0.0;
  c.wavelet.order = 2;
  c.wavelet.levels = 1;
  return c;
}

}  // namespace

TEST_CASE("variant names round-trip") {
  for (HaeVariant v :
       {HaeVariant::Full, HaeVariant::NoCta, HaeVariant::NoCna, HaeVariant::Plain})
    CHECK(hae_variant_from_string(hae_variant_name(v)) == v);
  CHECK_THROWS_AS(hae_variant_from_string("bogus"), ValidationError);
}

TEST_CASE("token count is the padded chunk count") {
  RngStream rng(1, "init");
  ParamStore ps;
  Hae a(ps, "a", tiny_cfg(), 24, rng);  // 24 / 8 -> 3 tokens
  CHECK(a.token_count() == 3);
  Hae b(ps, "b", tiny_cfg(), 20, rng);  // ceil(20 / 8) -> 3 tokens, tail padded
  CHECK(b.token_count() == 3);
  CHECK(b.input_len() == 20);
}

TEST_CASE("forward produces tokens x dim for every variant") {
  RngStream rng(2, "init");
  ParamStore ps;
  Hae hae(ps, "h", tiny_cfg(), 24, rng);
  RngStream data(3, "hae_test"), drop(0, "unused");
  Var x = constant(random_mat(1, 24, data));
  for (HaeVariant v :
       {HaeVariant::Full, HaeVariant::NoCta, HaeVariant::NoCna, HaeVariant::Plain}) {
    Var y = hae.forward(x, v, false, drop);
    CHECK(y.rows() == 3);
    CHECK(y.cols() == 8);
    CHECK(y.val().all_finite());
  }
}

TEST_CASE("ablated variants change the output") {
  RngStream rng(4, "init");
  ParamStore ps;
  Hae hae(ps, "h", tiny_cfg(), 24, rng);
  RngStream data(5, "hae_test"), drop(0, "unused");
  Var x = constant(random_mat(1, 24, data));
  Var full = hae.forward(x, HaeVariant::Full, false, drop);
  Var plain = hae.forward(x, HaeVariant::Plain, false, drop);
  Var no_cta = hae.forward(x, HaeVariant::NoCta, false, drop);
  double d1 = 0, d2 = 0;
  for (size_t k = 0; k < full.val().size(); ++k) {
    d1 = std::max(d1, std::fabs(full.val().at(k) - plain.val().at(k)));
    d2 = std::max(d2, std::fabs(full.val().at(k) - no_cta.val().at(k)));
  }
  CHECK(d1 > 1e-6);
  CHECK(d2 > 1e-6);
}

TEST_CASE("eval forward is deterministic") {
  RngStream rng(6, "init");
  ParamStore ps;
  Hae hae(ps, "h", tiny_cfg(), 16, rng);
  RngStream data(7, "hae_test"), d1(1, "a"), d2(2, "b");
  Var x = constant(random_mat(1, 16, data));
  Var y1 = hae.forward(x, HaeVariant::Full, false, d1);
  Var y2 = hae.forward(x, HaeVariant::Full, false, d2);
  for (size_t k = 0; k < y1.val().size(); ++k)
    CHECK(y1.val().at(k) == y2.val().at(k));
}

TEST_CASE("gradients pass sampled finite differences for all variants") {
  RngStream rng(8, "init");
  ParamStore ps;
  Hae hae(ps, "h", tiny_cfg(), 16, rng);
  Var x = ps.create("x", 1, 16, rng, 1);
  RngStream drop(0, "unused");
  int seed = 0;
  for (HaeVariant v :
       {HaeVariant::Full, HaeVariant::NoCta, HaeVariant::NoCna, HaeVariant::Plain}) {
    auto loss = [&] { return weighted_sum(hae.forward(x, v, false, drop), 10 + seed); };
    CHECK(finite_difference_check_sampled(loss, ps, 5, 55 + seed) < 1e-4);
    ++seed;
  }
}

TEST_CASE("config validation rejects bad dims") {
  HaeConfig c = tiny_cfg();
  c.dim = 7;  // not divisible by heads
  CHECK_THROWS_AS(c.validate(), ValidationError);
  HaeConfig c2 = tiny_cfg();
  c2.chunk = 0;
  CHECK_THROWS_AS(c2.validate(), ValidationError);
}
