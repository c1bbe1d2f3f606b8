#include "foresee/optim.hpp"

#include <cmath>

namespace foresee {

Adam::Adam(ParamStore& params, Config cfg) : params_(params), cfg_(cfg) {
  for (auto& [name, p] : params_.all()) {
    m_.emplace_back(p.rows(), p.cols());
    v_.emplace_back(p.rows(), p.cols());
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, (double)t_);
  double bc2 = 1.0 - std::pow(cfg_.beta2, (double)t_);
  size_t pi = 0;
  for (auto& [name, p] : params_.all()) {
    Mat& val = p.node()->value;
    const Mat& g = p.node()->grad;
    Mat& m = m_[pi];
    Mat& v = v_[pi];
    ++pi;
    if (g.empty()) {
      // parameter not touched this step: decay still applies
      for (size_t k = 0; k < val.size(); ++k)
        val.at(k) -= cfg_.lr * cfg_.weight_decay * val.at(k);
      continue;
    }
    for (size_t k = 0; k < val.size(); ++k) {
      double gk = g.at(k);
      if (!std::isfinite(gk))
        throw DivergenceError("adam: non-finite gradient in parameter '" + name + "'");
      m.at(k) = cfg_.beta1 * m.at(k) + (1.0 - cfg_.beta1) * gk;
      v.at(k) = cfg_.beta2 * v.at(k) + (1.0 - cfg_.beta2) * gk * gk;
      double mhat = m.at(k) / bc1;
      double vhat = v.at(k) / bc2;
      val.at(k) -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps) +
                   cfg_.lr * cfg_.weight_decay * val.at(k);
      if (!std::isfinite(val.at(k)))
        throw DivergenceError("adam: non-finite value in parameter '" + name + "'");
    }
  }
}

double finite_difference_check(const std::function<ag::Var()>& loss,
                               ParamStore& params, double h) {
  if (h <= 0.0) throw ValidationError("finite_difference_check: h must be > 0");
  params.zero_grad();
  ag::Var l0 = loss();
  if (!l0.val().all_finite())
    throw ValidationError("finite_difference_check: non-finite loss");
  ag::backward(l0);

  double max_rel = 0.0;
  for (auto& [name, p] : params.all()) {
    Mat analytic = p.node()->grad.empty() ? Mat(p.rows(), p.cols()) : p.node()->grad;
    Mat& val = p.node()->value;
    for (size_t k = 0; k < val.size(); ++k) {
      double orig = val.at(k);
      val.at(k) = orig + h;
      double lp = loss().item();
      val.at(k) = orig - h;
      double lm = loss().item();
      val.at(k) = orig;
      double numeric = (lp - lm) / (2.0 * h);
      double rel = std::fabs(analytic.at(k) - numeric) /
                   std::max(1.0, std::fabs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

double finite_difference_check_sampled(const std::function<ag::Var()>& loss,
                                       ParamStore& params, int coords_per_param,
                                       uint64_t seed, double h) {
  if (h <= 0.0) throw ValidationError("finite_difference_check: h must be > 0");
  if (coords_per_param < 1)
    throw ValidationError("finite_difference_check: coords_per_param must be >= 1");
  params.zero_grad();
  ag::Var l0 = loss();
  if (!l0.val().all_finite())
    throw ValidationError("finite_difference_check: non-finite loss");
  ag::backward(l0);

  RngStream rng(seed, "fdcheck");
  double max_rel = 0.0;
  for (auto& [name, p] : params.all()) {
    Mat analytic = p.node()->grad.empty() ? Mat(p.rows(), p.cols()) : p.node()->grad;
    Mat& val = p.node()->value;
    int n = (int)val.size();
    std::vector<int> coords;
    if (n <= coords_per_param) {
      coords.resize(n);
      for (int k = 0; k < n; ++k) coords[k] = k;
    } else {
      for (int k = 0; k < coords_per_param; ++k) coords.push_back(rng.uniform_int(n));
    }
    for (int k : coords) {
      double orig = val.at(k);
      val.at(k) = orig + h;
      double lp = loss().item();
      val.at(k) = orig - h;
      double lm = loss().item();
      val.at(k) = orig;
      double numeric = (lp - lm) / (2.0 * h);
      double rel =
          std::fabs(analytic.at(k) - numeric) / std::max(1.0, std::fabs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

}  // namespace foresee
