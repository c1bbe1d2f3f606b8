#include "foresee/survival.hpp"

namespace foresee {

using namespace ag;

ModalityFusion::ModalityFusion(ParamStore& ps, const std::string& name, int dim,
                               RngStream& rng)
    : mlp1(ps, name + ".mlp1", dim, dim, dim, rng),
      mlp2(ps, name + ".mlp2", dim, dim, dim, rng),
      ln(ps, name + ".ln", dim) {}

Var ModalityFusion::operator()(const Var& x) const {
  if (x.rows() < 1) throw ShapeError("fuse_modalities: empty input");
  return mlp2(add(ln(add(mlp1(x), x)), x));
}

RiskHead::RiskHead(ParamStore& ps, const std::string& name, int dim, RngStream& rng)
    : mlp(ps, name + ".mlp", dim, dim, 1, rng) {}

Var RiskHead::operator()(const Var& tokens) const {
  if (tokens.rows() < 1) throw ShapeError("modality_risk: empty token matrix");
  return mlp(mean_rows(tokens));
}

Var cox_loss(const Var& outputs, const std::vector<double>& times,
             const std::vector<int>& events, bool* no_events) {
  bool any_event = false;
  for (int e : events) any_event = any_event || e == 1;
  if (no_events) *no_events = !any_event;
  return ag::cox_loss(outputs, times, events);
}

Var total_loss(const std::array<Var, 3>& cox_terms, const Var& trimae_term,
               const LossWeights& w) {
  w.validate();
  Var total = scale(trimae_term, w.lambda_trimae);
  for (int m = 0; m < 3; ++m)
    total = add(total, scale(cox_terms[m], w.lambda_modality[m]));
  return total;
}

double inference_risk(const RiskOutput& out) {
  return (out.o_pathology + out.o_rna + out.o_cnv_mut) / 3.0;
}

}  // namespace foresee
