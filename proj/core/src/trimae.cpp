#include "foresee/trimae.hpp"

#include <algorithm>
#include <cmath>

namespace foresee {

using namespace ag;

MaskSpec sample_mask(int n, double ratio, int branch, RngStream& rng,
                     bool allow_low_mask) {
  if (n < 2) throw ValidationError("sample_mask: n must be >= 2");
  if (ratio <= 0.0 || ratio >= 1.0)
    throw ValidationError("sample_mask: ratio must be in (0, 1)");
  if (ratio < 0.8 && !allow_low_mask)
    throw ValidationError("sample_mask: ratio " + std::to_string(ratio) +
                          " below 0.8; set allow_low_mask to override");
  int m = (int)std::ceil(ratio * n);
  if (m >= n) m = n - 1;  // keep at least one visible token
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  for (int i = n - 1; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
  std::vector<int> masked(idx.begin(), idx.begin() + m);
  return mask_from_indices(n, std::move(masked), branch);
}

MaskSpec mask_from_indices(int n, std::vector<int> masked, int branch) {
  std::sort(masked.begin(), masked.end());
  if (std::adjacent_find(masked.begin(), masked.end()) != masked.end())
    throw ValidationError("mask: duplicate masked index");
  if (!masked.empty() && (masked.front() < 0 || masked.back() >= n))
    throw ValidationError("mask: index out of range");
  MaskSpec spec;
  spec.branch = branch;
  spec.n = n;
  spec.ratio = (double)masked.size() / n;
  spec.masked = std::move(masked);
  size_t mi = 0;
  for (int i = 0; i < n; ++i) {
    if (mi < spec.masked.size() && spec.masked[mi] == i)
      ++mi;
    else
      spec.visible.push_back(i);
  }
  return spec;
}

TokenStats token_stats(const Mat& tokens) {
  int n = tokens.rows(), d = tokens.cols();
  TokenStats s;
  s.mu = Mat(1, d);
  s.sd = Mat(1, d);
  std::vector<double> var(d, 0.0);
  double mean_var = 0.0;
  for (int j = 0; j < d; ++j) {
    double mu = 0.0;
    for (int i = 0; i < n; ++i) mu += tokens(i, j);
    mu /= n;
    s.mu(0, j) = mu;
    for (int i = 0; i < n; ++i) {
      double dv = tokens(i, j) - mu;
      var[j] += dv * dv;
    }
    var[j] /= n;
    mean_var += var[j] / d;
  }
  for (int j = 0; j < d; ++j)
    s.sd(0, j) = std::sqrt(var[j] + 0.1 * mean_var + 1e-12);
  return s;
}

Var trimae_loss(const std::array<Var, 3>& reconstructed,
                const std::array<Var, 3>& originals,
                const std::array<MaskSpec, 3>& specs) {
  std::vector<Var> terms;
  for (int b = 0; b < 3; ++b) {
    if (specs[b].masked.empty())
      throw ValidationError("trimae_loss: branch " + std::to_string(b) +
                            " has no masked positions");
    if (!reconstructed[b].val().same_shape(originals[b].val()))
      throw ShapeError("trimae_loss: shape mismatch in branch " + std::to_string(b));
    // Targets are detached: the reconstruction objective trains the
    // autoencoder toward the tokens, never the tokens toward the decoder.
    // They are standardized across tokens, which (a) keeps the objective
    // invariant to token scale, so collapsing the tokens stops being a
    // trivial minimum, and (b) keeps the decoder's output O(1) no matter
    // what the encoders do.
    const Mat& ov = originals[b].val();
    int d = ov.cols();
    TokenStats st = token_stats(ov);
    Mat target((int)specs[b].masked.size(), d);
    for (size_t i = 0; i < specs[b].masked.size(); ++i)
      for (int j = 0; j < d; ++j)
        target((int)i, j) = (ov(specs[b].masked[i], j) - st.mu(0, j)) / st.sd(0, j);
    Var diff =
        sub(gather_rows(reconstructed[b], specs[b].masked), constant(std::move(target)));
    terms.push_back(mean_all(mul(diff, diff)));
  }
  return scale(add(add(terms[0], terms[1]), terms[2]), 1.0 / 3.0);
}

TriMae::TriMae(ParamStore& ps, const std::string& name, const TriMaeConfig& cfg,
               const std::array<int, 3>& token_counts, RngStream& rng)
    : cfg_(cfg), counts_(token_counts) {
  if (cfg.dim % cfg.heads != 0 || cfg.decoder_dim % cfg.heads != 0)
    throw ValidationError("trimae: dims not divisible by heads");
  static const char* bn[3] = {"p", "r", "cm"};
  for (int b = 0; b < 3; ++b) {
    std::string base = name + "." + bn[b];
    int n = token_counts[b];
    if (n < 2) throw ValidationError("trimae: branch needs >= 2 tokens");
    encoder_[b] = TransformerStack(ps, base + ".enc", cfg.encoder_depth, cfg.dim,
                                   cfg.heads, 4 * cfg.dim, cfg.dropout, rng);
    enc_pos_[b] = ps.create(base + ".enc_pos", n, cfg.dim, rng, cfg.dim);
    dec_pos_[b] = ps.create(base + ".dec_pos", n, cfg.decoder_dim, rng, cfg.decoder_dim);
    mask_token_[b] = ps.create(base + ".mask_token", 1, cfg.decoder_dim, rng, cfg.decoder_dim);
    to_decoder_[b] = Linear(ps, base + ".to_dec", cfg.dim, cfg.decoder_dim, rng);
    head_[b] = Linear(ps, base + ".head", cfg.decoder_dim, cfg.dim, rng);
    ln_q_[b] = LayerNorm(ps, base + ".ln_q", cfg.decoder_dim);
    ln_kv_[b] = LayerNorm(ps, base + ".ln_kv", cfg.decoder_dim);
    cross_[b] = MultiHeadAttention(ps, base + ".cross", cfg.decoder_dim, cfg.heads, rng);
    self_[b] = TransformerBlock(ps, base + ".self", cfg.decoder_dim, cfg.heads,
                                4 * cfg.decoder_dim, cfg.dropout, rng);
  }
}

Var TriMae::encode_visible(int branch, const Var& tokens, const MaskSpec& spec,
                           bool train, RngStream& drop_rng) const {
  if (spec.visible.empty())
    throw ValidationError("trimae: all tokens masked in branch " +
                          std::to_string(branch));
  if (spec.n != tokens.rows())
    throw ShapeError("trimae: mask spec length mismatch");
  Var vis = add(gather_rows(tokens, spec.visible),
                gather_rows(enc_pos_[branch], spec.visible));
  return encoder_[branch](vis, train, drop_rng);
}

Var TriMae::scatter_decoder_input(int branch, const Var& latent,
                                  const MaskSpec& spec) const {
  Var proj = to_decoder_[branch](latent);  // v x d_dec
  Var pool = concat_rows({proj, mask_token_[branch]});
  int v = (int)spec.visible.size();
  std::vector<int> route(spec.n, v);  // default: shared mask token row
  for (int i = 0; i < v; ++i) route[spec.visible[i]] = i;
  return add(gather_rows(pool, route), dec_pos_[branch]);
}

std::array<Var, 3> TriMae::decode_reconstruct(const std::array<Var, 3>& latents,
                                              const std::array<MaskSpec, 3>& specs,
                                              bool train, RngStream& drop_rng) const {
  std::array<Var, 3> seq;
  for (int b = 0; b < 3; ++b) seq[b] = scatter_decoder_input(b, latents[b], specs[b]);
  std::array<Var, 3> out;
  for (int b = 0; b < 3; ++b) {
    Var others = concat_rows({seq[(b + 1) % 3], seq[(b + 2) % 3]});
    Var attended =
        add(seq[b], cross_[b](ln_q_[b](seq[b]), ln_kv_[b](others)));
    out[b] = head_[b](self_[b](attended, train, drop_rng));
  }
  return out;
}

TriMaeResult TriMae::passthrough(const std::array<Var, 3>& tokens) {
  TriMaeResult r;
  r.refined = tokens;
  r.loss = ag::scalar(0.0);
  for (int b = 0; b < 3; ++b) {
    r.specs[b].branch = b;
    r.specs[b].n = tokens[b].rows();
  }
  return r;
}

TriMaeResult TriMae::run(const std::array<Var, 3>& tokens,
                         const std::array<MaskSpec, 3>& specs, bool train,
                         RngStream& drop_rng) const {
  std::array<Var, 3> latents;
  for (int b = 0; b < 3; ++b)
    latents[b] = encode_visible(b, tokens[b], specs[b], train, drop_rng);
  std::array<Var, 3> recon = decode_reconstruct(latents, specs, train, drop_rng);

  TriMaeResult r;
  r.specs = specs;
  r.loss = trimae_loss(recon, tokens, specs);
  for (int b = 0; b < 3; ++b) {
    // originals at visible positions, reconstructions at masked positions;
    // the decoder predicts standardized tokens, so map back to token space
    TokenStats st = token_stats(tokens[b].val());
    Var rec_tok = add_rowvec(mul_rowvec(recon[b], constant(st.sd)), constant(st.mu));
    int n = specs[b].n;
    std::vector<int> route(n);
    size_t mi = 0;
    for (int i = 0; i < n; ++i) {
      if (mi < specs[b].masked.size() && specs[b].masked[mi] == i) {
        route[i] = n + i;  // reconstruction row
        ++mi;
      } else {
        route[i] = i;
      }
    }
    r.refined[b] = gather_rows(concat_rows({tokens[b], rec_tok}), route);
  }
  return r;
}

TriMaeResult TriMae::forward_train(const std::array<Var, 3>& tokens,
                                   RngStream& mask_rng, RngStream& drop_rng) const {
  std::array<MaskSpec, 3> specs;
  for (int b = 0; b < 3; ++b)
    specs[b] = sample_mask(tokens[b].rows(), cfg_.mask_ratio, b, mask_rng,
                           cfg_.allow_low_mask);
  return run(tokens, specs, true, drop_rng);
}

TriMaeResult TriMae::forward_missing(const std::array<Var, 3>& tokens,
                                     const std::array<std::vector<int>, 3>& missing,
                                     RngStream& drop_rng) const {
  bool any = false;
  for (auto& m : missing) any = any || !m.empty();
  if (!any) return passthrough(tokens);
  // Branches with nothing missing still participate as context providers;
  // give them an empty mask so the encoder sees every token.
  std::array<MaskSpec, 3> specs;
  for (int b = 0; b < 3; ++b)
    specs[b] = mask_from_indices(tokens[b].rows(), missing[b], b);
  std::array<Var, 3> latents;
  for (int b = 0; b < 3; ++b)
    latents[b] = encode_visible(b, tokens[b], specs[b], false, drop_rng);
  std::array<Var, 3> recon = decode_reconstruct(latents, specs, false, drop_rng);
  TriMaeResult r;
  r.specs = specs;
  r.loss = ag::scalar(0.0);
  for (int b = 0; b < 3; ++b) {
    if (specs[b].masked.empty()) {
      r.refined[b] = tokens[b];
      continue;
    }
    TokenStats st = token_stats(tokens[b].val());
    Var rec_tok = add_rowvec(mul_rowvec(recon[b], constant(st.sd)), constant(st.mu));
    int n = specs[b].n;
    std::vector<int> route(n);
    size_t mi = 0;
    for (int i = 0; i < n; ++i) {
      if (mi < specs[b].masked.size() && specs[b].masked[mi] == i) {
        route[i] = n + i;
        ++mi;
      } else {
        route[i] = i;
      }
    }
    r.refined[b] = gather_rows(concat_rows({tokens[b], rec_tok}), route);
  }
  return r;
}

}  // namespace foresee
