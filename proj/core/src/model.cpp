#include "foresee/model.hpp"

#include <cmath>

#include <cstring>
#include <fstream>

namespace foresee {

using namespace ag;

void ModelConfig::validate() const {
  if (dim < 1) throw ValidationError("model: dim must be positive");
  if (views.empty()) throw ValidationError("model: at least one view required");
  cft.validate();
  hae.validate();
  weights.validate();
}

void ModelConfig::sync_dims() {
  cft.hidden = dim;
  hae.dim = dim;
  hae.heads = cft.heads;
  trimae.dim = dim;
  trimae.heads = cft.heads;
  int dd = std::max(1, dim / 2);
  trimae.decoder_dim = (dd + trimae.heads - 1) / trimae.heads * trimae.heads;
}

const char* modality_name(Modality m) {
  switch (m) {
    case Modality::Pathology: return "P";
    case Modality::Rna: return "R";
    case Modality::CnvMut: return "CM";
  }
  return "?";
}

Modality modality_from_string(const std::string& s) {
  if (s == "P") return Modality::Pathology;
  if (s == "R") return Modality::Rna;
  if (s == "CM") return Modality::CnvMut;
  throw ValidationError("unknown modality '" + s + "' (expected P, R, or CM)");
}

RiskOutput ModelForward::risk() const {
  RiskOutput out;
  out.o_pathology = outputs[0].item();
  out.o_rna = outputs[1].item();
  out.o_cnv_mut = outputs[2].item();
  out.fused_risk = inference_risk(out);
  return out;
}

ForeseeModel::ForeseeModel(const ModelConfig& cfg, const CohortSchema& schema,
                           uint64_t seed)
    : cfg_(cfg), schema_(schema) {
  cfg_.sync_dims();
  cfg_.validate();
  RngStream rng(seed, "init");
  cft_ = std::make_unique<Cft>(params_, "cft", cfg_.cft, schema, cfg_.views, rng);
  hae_rna_ = std::make_unique<Hae>(params_, "hae_r", cfg_.hae, schema.rna_dim, rng);
  hae_cm_ = std::make_unique<Hae>(params_, "hae_cm", cfg_.hae, schema.cm_dim, rng);
  counts_ = {cft_->token_count(), hae_rna_->token_count(), hae_cm_->token_count()};
  trimae_ = std::make_unique<TriMae>(params_, "trimae", cfg_.trimae, counts_, rng);
  fusion_ = ModalityFusion(params_, "fusion", cfg_.dim, rng);
  heads_[0] = RiskHead(params_, "head_p", cfg_.dim, rng);
  heads_[1] = RiskHead(params_, "head_r", cfg_.dim, rng);
  heads_[2] = RiskHead(params_, "head_cm", cfg_.dim, rng);
}

ModelForward ForeseeModel::run(const PatientRecord& patient, bool train,
                               RngStream* drop_rng, RngStream* mask_rng,
                               const MissingSpec* missing) const {
  RngStream null_rng(0, "unused");
  RngStream& drop = drop_rng ? *drop_rng : null_rng;

  auto graphs = build_multiscale(patient);
  CftOutput cft_out = cft_->forward(graphs, train, drop);
  Var rna = constant(Mat::row(patient.rna));
  Var cm = constant(Mat::row(patient.cnv_mut));
  std::array<Var, 3> tokens = {
      cft_out.tokens,
      hae_rna_->forward(rna, cfg_.hae_variant, train, drop),
      hae_cm_->forward(cm, cfg_.hae_variant, train, drop)};

  TriMaeResult tri;
  if (!cfg_.trimae_enabled) {
    tri = TriMae::passthrough(tokens);
    if (missing && missing->any()) {
      // mean-imputation fallback: absent tokens take the visible-token mean
      for (int b = 0; b < 3; ++b) {
        const auto& gone = missing->missing[b];
        if (gone.empty()) continue;
        auto spec = mask_from_indices(tokens[b].rows(), gone, b);
        if (spec.visible.empty())
          throw ValidationError("model: all tokens missing in modality " +
                                std::to_string(b));
        Var mean_tok = mean_rows(gather_rows(tokens[b], spec.visible));
        int n = tokens[b].rows();
        std::vector<int> route(n, 0);
        size_t mi = 0;
        for (int i = 0; i < n; ++i) {
          if (mi < spec.masked.size() && spec.masked[mi] == i) {
            route[i] = n;
            ++mi;
          } else {
            route[i] = i;
          }
        }
        tri.refined[b] = gather_rows(concat_rows({tokens[b], mean_tok}), route);
      }
    }
  } else if (train) {
    tri = trimae_->forward_train(tokens, *mask_rng, drop);
  } else {
    MissingSpec none;
    tri = trimae_->forward_missing(tokens, (missing ? *missing : none).missing, drop);
  }

  Var all = concat_rows({tri.refined[0], tri.refined[1], tri.refined[2]});
  Var fused = fusion_(all);

  ModelForward out;
  int off = 0;
  for (int m = 0; m < 3; ++m) {
    Var slice = slice_rows(fused, off, off + counts_[m]);
    off += counts_[m];
    out.outputs[m] = heads_[m](slice);
    out.tokens[m] = tri.refined[m];
  }
  out.trimae_loss = tri.loss;
  return out;
}

ModelForward ForeseeModel::forward_train(const PatientRecord& patient,
                                         RngStream& drop_rng,
                                         RngStream& mask_rng) const {
  return run(patient, true, &drop_rng, &mask_rng, nullptr);
}

ModelForward ForeseeModel::forward_eval(const PatientRecord& patient,
                                        const MissingSpec& missing) const {
  return run(patient, false, nullptr, nullptr, &missing);
}

std::pair<double, double> ForeseeModel::masked_reconstruction_mse(
    const PatientRecord& patient, uint64_t seed) const {
  RngStream drop(seed, "unused");
  RngStream mask_rng(seed, "recon_mask");

  auto graphs = build_multiscale(patient);
  CftOutput cft_out = cft_->forward(graphs, false, drop);
  Var rna = constant(Mat::row(patient.rna));
  Var cm = constant(Mat::row(patient.cnv_mut));
  std::array<Var, 3> tokens = {
      cft_out.tokens, hae_rna_->forward(rna, cfg_.hae_variant, false, drop),
      hae_cm_->forward(cm, cfg_.hae_variant, false, drop)};

  std::array<MaskSpec, 3> specs;
  std::array<Var, 3> latents;
  for (int b = 0; b < 3; ++b) {
    specs[b] = sample_mask(tokens[b].rows(), cfg_.trimae.mask_ratio, b, mask_rng,
                           cfg_.trimae.allow_low_mask);
    latents[b] = trimae_->encode_visible(b, tokens[b], specs[b], false, drop);
  }
  auto recon = trimae_->decode_reconstruct(latents, specs, false, drop);

  double recon_mse = 0.0, impute_mse = 0.0;
  for (int b = 0; b < 3; ++b) {
    const Mat& orig = tokens[b].val();
    const Mat& rec = recon[b].val();
    int d = orig.cols();
    // both the reconstruction and the imputation baseline are scored in the
    // standardized token space the decoder predicts in, so the numbers are
    // comparable across checkpoints regardless of token scale
    TokenStats st = token_stats(orig);
    std::vector<double> mean_tok(d, 0.0);
    for (int i : specs[b].visible)
      for (int j = 0; j < d; ++j)
        mean_tok[j] += (orig(i, j) - st.mu(0, j)) / st.sd(0, j);
    for (int j = 0; j < d; ++j) mean_tok[j] /= (double)specs[b].visible.size();
    double se_r = 0.0, se_i = 0.0;
    for (int i : specs[b].masked) {
      for (int j = 0; j < d; ++j) {
        double target = (orig(i, j) - st.mu(0, j)) / st.sd(0, j);
        double dr = rec(i, j) - target;
        double di = mean_tok[j] - target;
        se_r += dr * dr;
        se_i += di * di;
      }
    }
    double denom = (double)specs[b].masked.size() * d;
    recon_mse += se_r / denom;
    impute_mse += se_i / denom;
  }
  return {recon_mse / 3.0, impute_mse / 3.0};
}

// ---- checkpoints ----

namespace {
constexpr char kMagic[4] = {'F', 'S', 'E', 'E'};
constexpr uint8_t kVersion = 1;

template <typename T>
void write_raw(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <typename T>
void read_raw(std::istream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
}
}  // namespace

void save_checkpoint(const ParamStore& params, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("save_checkpoint: cannot write " + path);
  f.write(kMagic, 4);
  write_raw(f, kVersion);
  uint32_t count = (uint32_t)params.count();
  write_raw(f, count);
  for (const auto& [name, p] : params.all()) {
    uint16_t len = (uint16_t)name.size();
    write_raw(f, len);
    f.write(name.data(), len);
    int32_t r = p.rows(), c = p.cols();
    write_raw(f, r);
    write_raw(f, c);
    f.write(reinterpret_cast<const char*>(p.val().data()),
            (std::streamsize)(p.val().size() * sizeof(double)));
  }
}

void load_checkpoint(ParamStore& params, const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("load_checkpoint: cannot open " + path);
  char magic[4];
  f.read(magic, 4);
  if (!f || std::memcmp(magic, kMagic, 4) != 0)
    throw ValidationError("load_checkpoint: bad magic in " + path);
  uint8_t version = 0;
  read_raw(f, version);
  if (version != kVersion)
    throw ValidationError("load_checkpoint: unsupported version " +
                          std::to_string(version));
  uint32_t count = 0;
  read_raw(f, count);
  if (count != params.count())
    throw ValidationError("load_checkpoint: parameter count mismatch (file " +
                          std::to_string(count) + ", model " +
                          std::to_string(params.count()) + ")");
  for (uint32_t i = 0; i < count; ++i) {
    uint16_t len = 0;
    read_raw(f, len);
    std::string name(len, '\0');
    f.read(name.data(), len);
    int32_t r = 0, c = 0;
    read_raw(f, r);
    read_raw(f, c);
    if (!params.has(name))
      throw ValidationError("load_checkpoint: unknown parameter '" + name + "'");
    Var p = params.get(name);
    if (p.rows() != r || p.cols() != c)
      throw ValidationError("load_checkpoint: shape mismatch for '" + name + "'");
    f.read(reinterpret_cast<char*>(p.val().data()),
           (std::streamsize)(p.val().size() * sizeof(double)));
    if (!f) throw ValidationError("load_checkpoint: truncated file " + path);
  }
}

}  // namespace foresee
