#include "foresee/nn.hpp"

#include <cmath>

namespace foresee {

using namespace ag;

Var ParamStore::insert(const std::string& name, Mat value) {
  if (index_.count(name))
    throw ValidationError("ParamStore: duplicate parameter name '" + name + "'");
  Var v = ag::leaf(std::move(value), true);
  index_[name] = params_.size();
  params_.emplace_back(name, v);
  return v;
}

Var ParamStore::create(const std::string& name, int rows, int cols, RngStream& rng,
                       int fan_in) {
  double bound = 1.0 / std::sqrt((double)fan_in);
  Mat m(rows, cols);
  for (size_t k = 0; k < m.size(); ++k) m.at(k) = (2.0 * rng.uniform() - 1.0) * bound;
  return insert(name, std::move(m));
}

Var ParamStore::create_zeros(const std::string& name, int rows, int cols) {
  return insert(name, Mat(rows, cols));
}

Var ParamStore::create_ones(const std::string& name, int rows, int cols) {
  Mat m(rows, cols);
  m.fill(1.0);
  return insert(name, std::move(m));
}

Var ParamStore::create_const(const std::string& name, int rows, int cols, double value) {
  Mat m(rows, cols);
  m.fill(value);
  return insert(name, std::move(m));
}

Var ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end())
    throw ValidationError("ParamStore: unknown parameter '" + name + "'");
  return params_[it->second].second;
}

void ParamStore::zero_grad() {
  for (auto& [name, v] : params_) v.node()->grad = Mat();
}

Linear::Linear(ParamStore& ps, const std::string& name, int in, int out,
               RngStream& rng) {
  w = ps.create(name + ".w", in, out, rng, in);
  b = ps.create_zeros(name + ".b", 1, out);
}

Var Linear::operator()(const Var& x) const {
  if (x.cols() != w.rows())
    throw ShapeError("linear: input " + x.val().shape_str() + " vs weight " +
                     w.val().shape_str());
  return add_rowvec(matmul(x, w), b);
}

LayerNorm::LayerNorm(ParamStore& ps, const std::string& name, int dim) {
  gamma = ps.create_ones(name + ".gamma", 1, dim);
  beta = ps.create_zeros(name + ".beta", 1, dim);
}

Var LayerNorm::operator()(const Var& x) const {
  return layer_norm_rows(x, gamma, beta, eps);
}

Mlp::Mlp(ParamStore& ps, const std::string& name, int in, int hidden, int out,
         RngStream& rng)
    : fc1(ps, name + ".fc1", in, hidden, rng), fc2(ps, name + ".fc2", hidden, out, rng) {}

Var Mlp::operator()(const Var& x) const { return fc2(gelu(fc1(x))); }

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, const std::string& name, int dim,
                                       int heads_, RngStream& rng)
    : wq(ps, name + ".wq", dim, dim, rng),
      wk(ps, name + ".wk", dim, dim, rng),
      wv(ps, name + ".wv", dim, dim, rng),
      wo(ps, name + ".wo", dim, dim, rng),
      heads(heads_) {
  if (dim % heads != 0)
    throw ValidationError("attention: dim " + std::to_string(dim) +
                          " not divisible by heads " + std::to_string(heads));
}

Var MultiHeadAttention::operator()(const Var& q_tokens, const Var& kv_tokens) const {
  if (q_tokens.rows() < 1 || kv_tokens.rows() < 1)
    throw ShapeError("attention: empty token sequence");
  Var q = wq(q_tokens), k = wk(kv_tokens), v = wv(kv_tokens);
  int dim = q.cols();
  int hd = dim / heads;
  double inv_scale = 1.0 / std::sqrt((double)hd);
  std::vector<Var> head_outs;
  head_outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Var qh = slice_cols(q, h * hd, (h + 1) * hd);
    Var kh = slice_cols(k, h * hd, (h + 1) * hd);
    Var vh = slice_cols(v, h * hd, (h + 1) * hd);
    Var att = row_softmax(scale(matmul_nt(qh, kh), inv_scale));
    head_outs.push_back(matmul(att, vh));
  }
  return wo(concat_cols(head_outs));
}

TransformerBlock::TransformerBlock(ParamStore& ps, const std::string& name, int dim,
                                   int heads, int ffn_dim, double drop, RngStream& rng)
    : ln1(ps, name + ".ln1", dim),
      ln2(ps, name + ".ln2", dim),
      msa(ps, name + ".msa", dim, heads, rng),
      ffn1(ps, name + ".ffn1", dim, ffn_dim, rng),
      ffn2(ps, name + ".ffn2", ffn_dim, dim, rng),
      drop_rate(drop) {}

Var TransformerBlock::operator()(const Var& x, bool train, RngStream& drop_rng) const {
  Var nx = ln1(x);
  Var h = add(x, dropout(msa(nx, nx), drop_rate, train, drop_rng));
  return add(h, dropout(ffn2(gelu(ffn1(ln2(h)))), drop_rate, train, drop_rng));
}

TransformerStack::TransformerStack(ParamStore& ps, const std::string& name, int depth,
                                   int dim, int heads, int ffn_dim, double drop,
                                   RngStream& rng) {
  for (int i = 0; i < depth; ++i)
    blocks.emplace_back(ps, name + ".blk" + std::to_string(i), dim, heads, ffn_dim,
                        drop, rng);
}

Var TransformerStack::operator()(const Var& x, bool train, RngStream& drop_rng) const {
  Var h = x;
  for (auto& b : blocks) h = b(h, train, drop_rng);
  return h;
}

Lstm::Lstm(ParamStore& ps, const std::string& name, int in, int hidden_, RngStream& rng)
    : hidden(hidden_) {
  wx = ps.create(name + ".wx", in, 4 * hidden_, rng, in);
  wh = ps.create(name + ".wh", hidden_, 4 * hidden_, rng, hidden_);
  b = ps.create_zeros(name + ".b", 1, 4 * hidden_);
}

Var Lstm::operator()(const Var& seq) const {
  int steps = seq.rows();
  Var h = ag::constant(Mat(1, hidden));
  Var c = ag::constant(Mat(1, hidden));
  std::vector<Var> outs;
  outs.reserve(steps);
  for (int t = 0; t < steps; ++t) {
    Var xt = slice_rows(seq, t, t + 1);
    Var gates = add_rowvec(add(matmul(xt, wx), matmul(h, wh)), b);
    Var i = sigmoid_v(slice_cols(gates, 0, hidden));
    Var f = sigmoid_v(slice_cols(gates, hidden, 2 * hidden));
    Var o = sigmoid_v(slice_cols(gates, 2 * hidden, 3 * hidden));
    Var g = tanh_v(slice_cols(gates, 3 * hidden, 4 * hidden));
    c = add(mul(f, c), mul(i, g));
    h = mul(o, tanh_v(c));
    outs.push_back(h);
  }
  return concat_rows(outs);
}

}  // namespace foresee
