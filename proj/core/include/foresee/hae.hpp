#pragma once

#include "foresee/nn.hpp"
#include "foresee/wavelet.hpp"

namespace foresee {

enum class HaeVariant { Full, NoCta, NoCna, Plain };

HaeVariant hae_variant_from_string(const std::string& s);
const char* hae_variant_name(HaeVariant v);

struct HaeConfig {
  int chunk = 16;   // values per token; tail zero-padded
  int dim = 64;     // model dim after chunk projection
  int heads = 4;
  double beta = 0.25;  // channel compression ratio for the squeeze block
  double dropout = 0.2;
  WaveletConfig wavelet;

  void validate() const;
};

// Hybrid attention encoder for one molecular vector: a contextual path
// (denoise -> LSTM -> self-attention), a channel-attention path, and their
// combination through a final self-attention over the summed tokens.
class Hae {
 public:
  Hae(ParamStore& ps, const std::string& name, const HaeConfig& cfg, int input_len,
      RngStream& rng);

  Var cta_path(const Var& x_flat, bool train, RngStream& drop_rng) const;
  Var cna_path(const Var& x_flat) const;
  Var forward(const Var& x_flat, HaeVariant variant, bool train,
              RngStream& drop_rng) const;  // tokens: n x dim

  int token_count() const { return tokens_; }
  int input_len() const { return len_; }

 private:
  Var tokenize(const Var& flat) const;  // 1 x len -> n x chunk, zero-padded
  HaeConfig cfg_;
  int len_ = 0, tokens_ = 0, padded_ = 0;
  LayerNorm ln_in_;    // vector-wise, over the flat input
  Linear embed_;       // chunk -> dim, shared by all three terms
  Lstm lstm_;
  LayerNorm ln_cat_, ln_base_, ln_out_;
  MultiHeadAttention msa_cat_, msa_out_;
  Linear squeeze_, expand_;
  Var alpha_;
};

}  // namespace foresee
