#pragma once

#include <map>
#include <string>
#include <vector>

#include "foresee/autograd.hpp"

namespace foresee {

using ag::Var;

// Named parameter registry. Modules create their tensors here once at
// construction; the optimizer and checkpoint I/O walk the registry.
class ParamStore {
 public:
  // Fan-in scaled uniform init for weights, zeros for biases.
  Var create(const std::string& name, int rows, int cols, RngStream& rng, int fan_in);
  Var create_zeros(const std::string& name, int rows, int cols);
  Var create_ones(const std::string& name, int rows, int cols);
  Var create_const(const std::string& name, int rows, int cols, double value);

  Var get(const std::string& name) const;
  bool has(const std::string& name) const { return index_.count(name) > 0; }
  const std::vector<std::pair<std::string, Var>>& all() const { return params_; }
  size_t count() const { return params_.size(); }

  void zero_grad();

 private:
  Var insert(const std::string& name, Mat value);
  std::vector<std::pair<std::string, Var>> params_;
  std::map<std::string, size_t> index_;
};

struct Linear {
  Var w, b;  // w: in x out
  Linear() = default;
  Linear(ParamStore& ps, const std::string& name, int in, int out, RngStream& rng);
  Var operator()(const Var& x) const;  // x: N x in -> N x out
  int out_dim() const { return w.cols(); }
};

struct LayerNorm {
  Var gamma, beta;
  double eps = 1e-5;
  LayerNorm() = default;
  LayerNorm(ParamStore& ps, const std::string& name, int dim);
  Var operator()(const Var& x) const;
};

// Two-layer MLP with GELU, shape preserving unless dims say otherwise.
struct Mlp {
  Linear fc1, fc2;
  Mlp() = default;
  Mlp(ParamStore& ps, const std::string& name, int in, int hidden, int out,
      RngStream& rng);
  Var operator()(const Var& x) const;
};

// Multi-head attention; self-attention when q and kv coincide, cross-attention
// otherwise. Scale 1/sqrt(head_dim).
struct MultiHeadAttention {
  Linear wq, wk, wv, wo;
  int heads = 1;
  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, const std::string& name, int dim, int heads,
                     RngStream& rng);
  Var operator()(const Var& q_tokens, const Var& kv_tokens) const;
};

// Pre-norm transformer encoder block: x + MSA(LN(x)), then x + FFN(LN(x)).
struct TransformerBlock {
  LayerNorm ln1, ln2;
  MultiHeadAttention msa;
  Linear ffn1, ffn2;
  double drop_rate = 0.0;
  TransformerBlock() = default;
  TransformerBlock(ParamStore& ps, const std::string& name, int dim, int heads,
                   int ffn_dim, double drop_rate, RngStream& rng);
  Var operator()(const Var& x, bool train, RngStream& drop_rng) const;
};

struct TransformerStack {
  std::vector<TransformerBlock> blocks;
  TransformerStack() = default;
  TransformerStack(ParamStore& ps, const std::string& name, int depth, int dim,
                   int heads, int ffn_dim, double drop_rate, RngStream& rng);
  Var operator()(const Var& x, bool train, RngStream& drop_rng) const;
};

// Single-layer LSTM over the row (token) axis; returns per-step hidden states.
struct Lstm {
  Var wx, wh, b;  // wx: in x 4h, wh: h x 4h, gate order [i f o g]
  int hidden = 0;
  Lstm() = default;
  Lstm(ParamStore& ps, const std::string& name, int in, int hidden, RngStream& rng);
  Var operator()(const Var& seq) const;  // T x in -> T x hidden
};

}  // namespace foresee
