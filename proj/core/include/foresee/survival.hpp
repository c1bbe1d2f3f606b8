#pragma once

#include <array>

#include "foresee/nn.hpp"

namespace foresee {

struct RiskOutput {
  double o_pathology = 0.0;
  double o_rna = 0.0;
  double o_cnv_mut = 0.0;
  double fused_risk = 0.0;
};

struct LossWeights {
  double lambda_trimae = 5.0;
  std::array<double, 3> lambda_modality = {1.0, 1.0, 1.0};

  void validate() const {
    if (lambda_trimae < 0.0) throw ValidationError("loss weights must be >= 0");
    for (double l : lambda_modality)
      if (l < 0.0) throw ValidationError("loss weights must be >= 0");
  }
};

// Token-wise residual fusion trunk: MLP(LN(MLP(x) + x) + x), shape preserving.
struct ModalityFusion {
  Mlp mlp1, mlp2;
  LayerNorm ln;
  ModalityFusion() = default;
  ModalityFusion(ParamStore& ps, const std::string& name, int dim, RngStream& rng);
  Var operator()(const Var& x) const;
};

// Mean-pool readout followed by an MLP down to a scalar risk output.
struct RiskHead {
  Mlp mlp;
  RiskHead() = default;
  RiskHead(ParamStore& ps, const std::string& name, int dim, RngStream& rng);
  Var operator()(const Var& tokens) const;  // -> 1x1
};

// Negative log Cox partial likelihood (risk sets use t_j >= t_i, ties
// included). All-censored batches contribute zero; `warned` reports that case.
ag::Var cox_loss(const ag::Var& outputs, const std::vector<double>& times,
                 const std::vector<int>& events, bool* no_events = nullptr);

ag::Var total_loss(const std::array<ag::Var, 3>& cox_terms, const ag::Var& trimae_term,
                   const LossWeights& w);

double inference_risk(const RiskOutput& out);

}  // namespace foresee
