#include "foresee/cft.hpp"

#include <algorithm>
#include <cmath>

namespace foresee {

using namespace ag;

void CftConfig::validate() const {
  if (gnn_layers < 1) throw ValidationError("cft: gnn_layers must be >= 1");
  if (hidden < 1 || fusion_inner < 1 || tf_depth < 1 || ffn_mult < 1)
    throw ValidationError("cft: dims must be positive");
  if (hidden % heads != 0)
    throw ValidationError("cft: hidden not divisible by heads");
}

GnnLayer::GnnLayer(ParamStore& ps, const std::string& name, int d_in, int d_x,
                   int d_out, RngStream& rng)
    : msg(ps, name + ".msg", d_in, d_out, rng),
      update(ps, name + ".update", d_in + d_out + d_x, d_out, rng) {}

Var GnnLayer::operator()(const ScaleGraph& graph, const Var& h_prev,
                         const Var& x) const {
  if (h_prev.rows() != graph.nodes())
    throw ShapeError("gnn_layer: embeddings " + h_prev.val().shape_str() + " vs " +
                     std::to_string(graph.nodes()) + " graph nodes");
  if (debug == GnnDebug::Identity) return h_prev;

  // row-normalized adjacency: mean aggregation, zero row for isolated nodes
  int o = graph.nodes();
  Mat norm_adj(o, o);
  for (int i = 0; i < o; ++i) {
    int deg = graph.degree(i);
    if (deg == 0) continue;
    for (int j = 0; j < o; ++j)
      if (graph.adjacency(i, j) != 0.0) norm_adj(i, j) = 1.0 / deg;
  }
  Var abar = constant(std::move(norm_adj));
  if (debug == GnnDebug::AggregateOnly) return matmul(abar, h_prev);

  Var aggregated = matmul(abar, msg(h_prev));
  return gelu(update(concat_cols({h_prev, aggregated, x})));
}

Conv1d3::Conv1d3(ParamStore& ps, const std::string& name, int in, int out,
                 RngStream& rng) {
  wl = ps.create(name + ".wl", in, out, rng, 3 * in);
  wc = ps.create(name + ".wc", in, out, rng, 3 * in);
  wr = ps.create(name + ".wr", in, out, rng, 3 * in);
  b = ps.create_zeros(name + ".b", 1, out);
}

Var Conv1d3::operator()(const Var& x) const {
  Var y = add(add(matmul(shift_rows(x, 1), wl), matmul(x, wc)),
              matmul(shift_rows(x, -1), wr));
  return add_rowvec(y, b);
}

Mat adaptive_pool_matrix(int n_in, int n_out) {
  Mat p(n_out, n_in);
  for (int j = 0; j < n_out; ++j) {
    int lo = (int)((long)j * n_in / n_out);
    int hi = (int)((long)(j + 1) * n_in / n_out);
    if (hi <= lo) hi = lo + 1;
    for (int i = lo; i < hi; ++i) p(j, i) = 1.0 / (hi - lo);
  }
  return p;
}

Mat nearest_upsample_matrix(int n_in, int n_out) {
  Mat u(n_out, n_in);
  for (int j = 0; j < n_out; ++j) {
    int src = (int)((long)j * n_in / n_out);
    u(j, std::min(src, n_in - 1)) = 1.0;
  }
  return u;
}

CrossFuse::CrossFuse(ParamStore& ps, const std::string& name, int arity_, int dim,
                     int inner, RngStream& rng)
    : arity(arity_),
      mix1(ps, name + ".mix1", arity_ * dim, inner, rng),
      mix2(ps, name + ".mix2", inner, dim, rng),
      gate1(ps, name + ".gate1", dim, dim, rng),
      gate2(ps, name + ".gate2", dim, dim, rng) {
  for (int i = 0; i < arity_; ++i) {
    w_fused.push_back(ps.create_const(name + ".wf" + std::to_string(i), 1, 1, 1.0));
    w_orig.push_back(ps.create_const(name + ".wo" + std::to_string(i), 1, 1, 1.0));
  }
}

std::vector<Var> CrossFuse::operator()(const std::vector<Var>& inputs) const {
  if ((int)inputs.size() != arity)
    throw ShapeError("cross_fuse: expected " + std::to_string(arity) + " inputs");
  int d = inputs[0].cols();
  int n_min = inputs[0].rows();
  for (auto& x : inputs) {
    if (x.cols() != d)
      throw ShapeError("cross_fuse: feature dim mismatch: " + x.val().shape_str() +
                       " vs d=" + std::to_string(d));
    n_min = std::min(n_min, x.rows());
  }

  std::vector<Var> pooled;
  for (auto& x : inputs)
    pooled.push_back(x.rows() == n_min
                         ? x
                         : matmul(constant(adaptive_pool_matrix(x.rows(), n_min)), x));
  Var spliced = concat_cols(pooled);
  Var fused = mix2(gelu(mix1(spliced)));
  Var gate = sigmoid_v(gate2(gelu(gate1(mean_rows(fused)))));

  std::vector<Var> out;
  for (int i = 0; i < arity; ++i) {
    Var up = inputs[i].rows() == n_min
                 ? fused
                 : matmul(constant(nearest_upsample_matrix(n_min, inputs[i].rows())),
                          fused);
    Var refined = mul_rowvec(up, gate);
    out.push_back(add(mul_scalar(refined, w_fused[i]),
                      mul_scalar(inputs[i], w_orig[i])));
  }
  return out;
}

Cft::Cft(ParamStore& ps, const std::string& name, const CftConfig& cfg,
         const CohortSchema& schema, std::vector<Scale> views, RngStream& rng)
    : cfg_(cfg), schema_(schema), views_(std::move(views)) {
  cfg_.validate();
  if (views_.empty()) throw ValidationError("cft: at least one view required");
  std::sort(views_.begin(), views_.end());
  for (Scale s : views_) {
    std::string sn = name + "." + scale_name(s);
    int o = schema.grid(s).nodes();
    for (int l = 0; l < cfg_.gnn_layers; ++l) {
      int d_in = l == 0 ? schema.d_x : cfg_.hidden;
      gnn_[(int)s].emplace_back(ps, sn + ".gnn" + std::to_string(l), d_in, schema.d_x,
                                cfg_.hidden, rng);
    }
    pos_[(int)s] = ps.create(sn + ".pos", o, cfg_.hidden, rng, cfg_.hidden);
    stack1_[(int)s] = TransformerStack(ps, sn + ".enc1", cfg_.tf_depth, cfg_.hidden,
                                       cfg_.heads, cfg_.ffn_mult * cfg_.hidden,
                                       cfg_.dropout, rng);
    stack2_[(int)s] = TransformerStack(ps, sn + ".enc2", cfg_.tf_depth, cfg_.hidden,
                                       cfg_.heads, cfg_.ffn_mult * cfg_.hidden,
                                       cfg_.dropout, rng);
  }
  has_lm_ = active(Scale::Large) && active(Scale::Medium);
  has_ms_ = active(Scale::Medium) && active(Scale::Small);
  has_triple_ = (int)views_.size() == 3;
  if (has_lm_)
    fuse_lm_ = CrossFuse(ps, name + ".fuse_lm", 2, cfg_.hidden, cfg_.fusion_inner, rng);
  if (has_ms_)
    fuse_ms_ = CrossFuse(ps, name + ".fuse_ms", 2, cfg_.hidden, cfg_.fusion_inner, rng);
  if (has_triple_)
    fuse_triple_ =
        CrossFuse(ps, name + ".fuse_lms", 3, cfg_.hidden, cfg_.fusion_inner, rng);
  ln_out_ = LayerNorm(ps, name + ".ln_out", cfg_.hidden);
}

bool Cft::active(Scale s) const {
  return std::find(views_.begin(), views_.end(), s) != views_.end();
}

int Cft::token_count() const {
  int n = 0;
  for (Scale s : views_) n += schema_.grid(s).nodes();
  return n;
}

CftOutput Cft::forward(const std::array<ScaleGraph, 3>& graphs, bool train,
                       RngStream& drop_rng) const {
  std::array<Var, 3> tok;
  for (Scale s : views_) {
    const ScaleGraph& g = graphs[(int)s];
    Var x = constant(g.node_features);
    Var h = x;
    for (auto& layer : gnn_[(int)s]) h = layer(g, h, x);
    if (h.rows() != pos_[(int)s].rows())
      throw ShapeError("cft: node count " + std::to_string(h.rows()) +
                       " does not match positional table " +
                       pos_[(int)s].val().shape_str());
    h = add(h, pos_[(int)s]);
    tok[(int)s] = stack1_[(int)s](h, train, drop_rng);
  }

  // scheme 1: large<->medium, then medium<->small; medium passes through both
  if (has_lm_) {
    auto f = fuse_lm_({tok[(int)Scale::Large], tok[(int)Scale::Medium]});
    tok[(int)Scale::Large] = f[0];
    tok[(int)Scale::Medium] = f[1];
  }
  if (has_ms_) {
    auto f = fuse_ms_({tok[(int)Scale::Medium], tok[(int)Scale::Small]});
    tok[(int)Scale::Medium] = f[0];
    tok[(int)Scale::Small] = f[1];
  }

  for (Scale s : views_)
    tok[(int)s] = stack2_[(int)s](tok[(int)s], train, drop_rng);

  // scheme 2: three-way splice
  if (has_triple_) {
    auto f = fuse_triple_({tok[(int)Scale::Large], tok[(int)Scale::Medium],
                           tok[(int)Scale::Small]});
    tok[(int)Scale::Large] = f[0];
    tok[(int)Scale::Medium] = f[1];
    tok[(int)Scale::Small] = f[2];
  }

  CftOutput out;
  std::vector<Var> parts;
  int off = 0;
  for (Scale s : views_) {
    out.scale_offsets.push_back(off);
    parts.push_back(tok[(int)s]);
    off += tok[(int)s].rows();
  }
  out.tokens = ln_out_(parts.size() == 1 ? parts[0] : concat_rows(parts));
  out.pooled = mean_rows(out.tokens);
  return out;
}

}  // namespace foresee
