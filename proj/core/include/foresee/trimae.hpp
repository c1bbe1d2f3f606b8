#pragma once

#include <array>

#include "foresee/nn.hpp"

namespace foresee {

// Branch k masks modality k: 0 = pathology, 1 = rna, 2 = cnv_mut.
struct MaskSpec {
  int branch = 0;
  std::vector<int> masked;   // sorted, unique
  std::vector<int> visible;  // complement, sorted
  double ratio = 0.0;
  int n = 0;
};

// Uniform sample of ceil(ratio*n) masked indices without replacement. Ratios
// below 0.8 are rejected unless allow_low_mask is set.
MaskSpec sample_mask(int n, double ratio, int branch, RngStream& rng,
                     bool allow_low_mask = false);

MaskSpec mask_from_indices(int n, std::vector<int> masked, int branch);

// Per-feature column statistics of a token matrix. The spread is floored at
// a tenth of the mean feature variance, so normalizing by it is invariant to
// the overall token scale but no single near-constant feature can dominate.
struct TokenStats {
  Mat mu, sd;  // 1 x d each
};
TokenStats token_stats(const Mat& tokens);

// Mean squared error over masked positions only, averaged across branches.
// Reconstructions live in the normalized token space: they are compared to
// (original - mu) / sd with the statistics taken across the original tokens.
ag::Var trimae_loss(const std::array<ag::Var, 3>& reconstructed,
                    const std::array<ag::Var, 3>& originals,
                    const std::array<MaskSpec, 3>& specs);

struct TriMaeConfig {
  int dim = 64;          // incoming token dim
  int decoder_dim = 32;  // lightweight decoder width (half encoder by default)
  int heads = 4;
  int encoder_depth = 1;
  double mask_ratio = 0.85;
  bool allow_low_mask = false;
  double dropout = 0.2;
};

struct TriMaeResult {
  std::array<ag::Var, 3> refined;
  ag::Var loss;  // 1x1; zero when disabled or nothing masked
  std::array<MaskSpec, 3> specs;
};

// Triplet masked autoencoder: three asymmetric branches, each encoding only the
// visible tokens of its own modality and decoding the full sequence through one
// cross-attention layer over the other branches plus one self-attention layer.
class TriMae {
 public:
  TriMae(ParamStore& ps, const std::string& name, const TriMaeConfig& cfg,
         const std::array<int, 3>& token_counts, RngStream& rng);

  // Training entry: samples one mask per branch and refines masked positions.
  TriMaeResult forward_train(const std::array<ag::Var, 3>& tokens, RngStream& mask_rng,
                             RngStream& drop_rng) const;

  // Inference over (possibly) incomplete inputs: positions listed in `missing`
  // are reconstructed, the rest pass through. All-empty missing is passthrough.
  TriMaeResult forward_missing(const std::array<ag::Var, 3>& tokens,
                               const std::array<std::vector<int>, 3>& missing,
                               RngStream& drop_rng) const;

  static TriMaeResult passthrough(const std::array<ag::Var, 3>& tokens);

  ag::Var encode_visible(int branch, const ag::Var& tokens, const MaskSpec& spec,
                         bool train, RngStream& drop_rng) const;
  std::array<ag::Var, 3> decode_reconstruct(const std::array<ag::Var, 3>& latents,
                                            const std::array<MaskSpec, 3>& specs,
                                            bool train, RngStream& drop_rng) const;

  const TriMaeConfig& config() const { return cfg_; }

 private:
  TriMaeResult run(const std::array<ag::Var, 3>& tokens,
                   const std::array<MaskSpec, 3>& specs, bool train,
                   RngStream& drop_rng) const;
  ag::Var scatter_decoder_input(int branch, const ag::Var& latent,
                                const MaskSpec& spec) const;

  TriMaeConfig cfg_;
  std::array<int, 3> counts_;
  std::array<TransformerStack, 3> encoder_;
  std::array<Var, 3> enc_pos_, dec_pos_, mask_token_;
  std::array<Linear, 3> to_decoder_, head_;
  std::array<LayerNorm, 3> ln_q_, ln_kv_;
  std::array<MultiHeadAttention, 3> cross_;
  std::array<TransformerBlock, 3> self_;
};

}  // namespace foresee
