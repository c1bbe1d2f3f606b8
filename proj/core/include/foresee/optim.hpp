#pragma once

#include <functional>

#include "foresee/nn.hpp"

namespace foresee {

// Adam with bias correction and decoupled weight decay.
class Adam {
 public:
  struct Config {
    double lr = 5e-3;
    double weight_decay = 1e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  Adam(ParamStore& params, Config cfg);

  // Applies one update from the gradients currently held by the parameters.
  // Throws DivergenceError on non-finite gradients or resulting values.
  void step();

  long step_count() const { return t_; }
  const Config& config() const { return cfg_; }

 private:
  ParamStore& params_;
  Config cfg_;
  long t_ = 0;
  std::vector<Mat> m_, v_;
};

// Central finite-difference gradient verification. `loss` must rebuild the
// graph and return a scalar; it is evaluated repeatedly with perturbed
// parameter values. Returns max over coordinates of
// |analytic - numeric| / max(1, |numeric|).
double finite_difference_check(const std::function<ag::Var()>& loss,
                               ParamStore& params, double h = 1e-5);

// Same check restricted to `coords_per_param` randomly chosen coordinates of
// each parameter, for models too large for the full sweep.
double finite_difference_check_sampled(const std::function<ag::Var()>& loss,
                                       ParamStore& params, int coords_per_param,
                                       uint64_t seed, double h = 1e-5);

}  // namespace foresee
