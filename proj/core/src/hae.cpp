#include "foresee/hae.hpp"

#include <cmath>

namespace foresee {

using namespace ag;

HaeVariant hae_variant_from_string(const std::string& s) {
  if (s == "full") return HaeVariant::Full;
  if (s == "no_cta") return HaeVariant::NoCta;
  if (s == "no_cna") return HaeVariant::NoCna;
  if (s == "plain") return HaeVariant::Plain;
  throw ValidationError("unknown hae variant '" + s + "'");
}

const char* hae_variant_name(HaeVariant v) {
  switch (v) {
    case HaeVariant::Full: return "full";
    case HaeVariant::NoCta: return "no_cta";
    case HaeVariant::NoCna: return "no_cna";
    case HaeVariant::Plain: return "plain";
  }
  return "?";
}

void HaeConfig::validate() const {
  if (chunk < 1 || dim < 1) throw ValidationError("hae: dims must be positive");
  if (dim % heads != 0) throw ValidationError("hae: dim not divisible by heads");
  if (beta <= 0.0 || beta > 1.0)
    throw ValidationError("hae: beta must be in (0, 1], got " + std::to_string(beta));
  if ((int)(dim * beta) < 1) throw ValidationError("hae: dim*beta must be >= 1");
}

Hae::Hae(ParamStore& ps, const std::string& name, const HaeConfig& cfg, int input_len,
         RngStream& rng)
    : cfg_(cfg), len_(input_len) {
  cfg_.validate();
  if (input_len < 4 || input_len < (1 << cfg.wavelet.levels))
    throw ValidationError("hae: input length " + std::to_string(input_len) +
                          " too short for config");
  tokens_ = (input_len + cfg.chunk - 1) / cfg.chunk;
  padded_ = tokens_ * cfg.chunk;
  int inner = (int)(cfg.dim * cfg.beta);
  ln_in_ = LayerNorm(ps, name + ".ln_in", input_len);
  embed_ = Linear(ps, name + ".embed", cfg.chunk, cfg.dim, rng);
  lstm_ = Lstm(ps, name + ".lstm", cfg.dim, cfg.dim, rng);
  ln_cat_ = LayerNorm(ps, name + ".ln_cat", cfg.dim);
  ln_base_ = LayerNorm(ps, name + ".ln_base", cfg.dim);
  ln_out_ = LayerNorm(ps, name + ".ln_out", cfg.dim);
  msa_cat_ = MultiHeadAttention(ps, name + ".msa_cat", cfg.dim, cfg.heads, rng);
  msa_out_ = MultiHeadAttention(ps, name + ".msa_out", cfg.dim, cfg.heads, rng);
  squeeze_ = Linear(ps, name + ".squeeze", cfg.dim, inner, rng);
  expand_ = Linear(ps, name + ".expand", inner, cfg.dim, rng);
  alpha_ = ps.create_const(name + ".alpha", 1, 1, 1.0);
}

Var Hae::tokenize(const Var& flat) const {
  if (flat.rows() != 1 || flat.cols() != len_)
    throw ShapeError("hae: expected 1x" + std::to_string(len_) + " input, got " +
                     flat.val().shape_str());
  Var padded = flat;
  if (padded_ != len_)
    padded = concat_cols({flat, constant(Mat(1, padded_ - len_))});
  return embed_(reshape(padded, tokens_, cfg_.chunk));
}

Var Hae::cta_path(const Var& x_flat, bool train, RngStream& drop_rng) const {
  // denoise first, then normalize: the threshold is a pure function of the
  // raw signal instead of tracking the evolving normalization parameters,
  // which keeps it stable across training
  Var denoised = ln_in_(dwt_denoise(x_flat, cfg_.wavelet));
  Var seq = lstm_(tokenize(denoised));
  Var normed = ln_cat_(seq);
  return dropout(msa_cat_(normed, normed), cfg_.dropout, train, drop_rng);
}

Var Hae::cna_path(const Var& x_flat) const {
  Var t = tokenize(ln_in_(x_flat));
  Var gate = sigmoid_v(expand_(gelu(squeeze_(mean_rows(t)))));
  return mul_scalar(mul_rowvec(t, gate), alpha_);
}

Var Hae::forward(const Var& x_flat, HaeVariant variant, bool train,
                 RngStream& drop_rng) const {
  Var sum = ln_base_(tokenize(x_flat));
  if (variant == HaeVariant::Full || variant == HaeVariant::NoCna)
    sum = add(sum, cta_path(x_flat, train, drop_rng));
  if (variant == HaeVariant::Full || variant == HaeVariant::NoCta)
    sum = add(sum, cna_path(x_flat));
  // final output norm keeps token scale bounded for the downstream consumers
  return ln_out_(msa_out_(sum, sum));
}

}  // namespace foresee
