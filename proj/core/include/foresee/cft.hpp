#pragma once

#include <array>
#include <vector>

#include "foresee/graph.hpp"
#include "foresee/nn.hpp"

namespace foresee {

struct CftConfig {
  int gnn_layers = 2;
  int hidden = 64;       // node embedding and transformer dim (paper-scale: 500)
  int heads = 4;
  int ffn_mult = 4;
  int tf_depth = 1;      // blocks per encoder stack
  int fusion_inner = 32; // conv mixing channels
  double dropout = 0.2;

  void validate() const;
};

// Test hooks for the aggregation pipeline: Identity passes embeddings through
// untouched, AggregateOnly returns the plain neighbor mean.
enum class GnnDebug { None, Identity, AggregateOnly };

// Sample-and-aggregate layer: per-node neighbor messages, mean aggregation,
// concat-update with the raw node features, GELU. Isolated nodes aggregate zero.
struct GnnLayer {
  Linear msg;     // d_in -> d_out
  Linear update;  // (d_in + d_out + d_x) -> d_out
  GnnDebug debug = GnnDebug::None;

  GnnLayer() = default;
  GnnLayer(ParamStore& ps, const std::string& name, int d_in, int d_x, int d_out,
           RngStream& rng);
  Var operator()(const ScaleGraph& graph, const Var& h_prev, const Var& x) const;
};

// Kernel-3 convolution along the token axis with channel mixing; zero padding.
struct Conv1d3 {
  Var wl, wc, wr, b;
  Conv1d3() = default;
  Conv1d3(ParamStore& ps, const std::string& name, int in, int out, RngStream& rng);
  Var operator()(const Var& x) const;
};

// Shared machinery for both cross-fusion schemes: align token counts to the
// smallest input by adaptive average pooling, splice channels, mix with a
// two-layer convolutional block, refine through a pooled channel gate,
// upsample back, and recombine with the originals under learnable weights.
struct CrossFuse {
  int arity = 2;
  Conv1d3 mix1, mix2;
  Linear gate1, gate2;
  std::vector<Var> w_fused, w_orig;  // learnable 1x1 scalars, init 1

  CrossFuse() = default;
  CrossFuse(ParamStore& ps, const std::string& name, int arity, int dim, int inner,
            RngStream& rng);
  std::vector<Var> operator()(const std::vector<Var>& inputs) const;
};

// Builds the token-axis average-pooling / nearest-upsampling maps as constant
// matrices (exposed for the straight-line test oracles).
Mat adaptive_pool_matrix(int n_in, int n_out);
Mat nearest_upsample_matrix(int n_in, int n_out);

struct CftOutput {
  Var tokens;                       // concat of per-scale tokens, small->large
  Var pooled;                       // 1 x d global mean
  std::vector<int> scale_offsets;   // token row offset per active scale
};

// Cross Fusion Transformer over up to three fields of view.
class Cft {
 public:
  Cft(ParamStore& ps, const std::string& name, const CftConfig& cfg,
      const CohortSchema& schema, std::vector<Scale> views, RngStream& rng);

  CftOutput forward(const std::array<ScaleGraph, 3>& graphs, bool train,
                    RngStream& drop_rng) const;

  const std::vector<Scale>& views() const { return views_; }
  int token_count() const;  // total tokens across active views

 private:
  bool active(Scale s) const;
  CftConfig cfg_;
  CohortSchema schema_;
  std::vector<Scale> views_;
  std::array<std::vector<GnnLayer>, 3> gnn_;
  std::array<Var, 3> pos_;
  std::array<TransformerStack, 3> stack1_, stack2_;
  LayerNorm ln_out_;  // final pre-norm-convention output norm; bounds token scale
  CrossFuse fuse_lm_, fuse_ms_, fuse_triple_;
  bool has_lm_ = false, has_ms_ = false, has_triple_ = false;
};

}  // namespace foresee
