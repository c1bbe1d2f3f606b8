#pragma once

#include "foresee/cft.hpp"
#include "foresee/hae.hpp"
#include "foresee/survival.hpp"
#include "foresee/trimae.hpp"

namespace foresee {

struct ModelConfig {
  int dim = 64;  // shared token width across encoders and fusion
  CftConfig cft;
  HaeConfig hae;
  TriMaeConfig trimae;
  bool trimae_enabled = true;
  HaeVariant hae_variant = HaeVariant::Full;
  std::vector<Scale> views = {Scale::Small, Scale::Medium, Scale::Large};
  LossWeights weights;

  void validate() const;
  void sync_dims();  // pushes `dim` into the sub-configs
};

enum class Modality { Pathology = 0, Rna = 1, CnvMut = 2 };
const char* modality_name(Modality m);
Modality modality_from_string(const std::string& s);

// Per-modality token deletion applied before TriMAE refinement at inference.
struct MissingSpec {
  std::array<std::vector<int>, 3> missing;
  bool any() const {
    return !missing[0].empty() || !missing[1].empty() || !missing[2].empty();
  }
};

struct ModelForward {
  std::array<Var, 3> outputs;      // 1x1 survival output per modality
  Var trimae_loss;                 // 1x1
  std::array<Var, 3> tokens;       // refined per-modality tokens
  RiskOutput risk() const;
};

// End-to-end FORESEE network: multi-scale pathology graph encoder, two hybrid
// attention molecular encoders, triplet masked autoencoder refinement, a shared
// fusion trunk, and three per-modality survival heads.
class ForeseeModel {
 public:
  ForeseeModel(const ModelConfig& cfg, const CohortSchema& schema, uint64_t seed);

  ModelForward forward_train(const PatientRecord& patient, RngStream& drop_rng,
                             RngStream& mask_rng) const;
  ModelForward forward_eval(const PatientRecord& patient,
                            const MissingSpec& missing = {}) const;

  // TriMAE reconstruction MSE on freshly sampled masks vs the mean-imputation
  // baseline on identical masks; both over masked positions only.
  std::pair<double, double> masked_reconstruction_mse(const PatientRecord& patient,
                                                      uint64_t seed) const;

  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const ModelConfig& config() const { return cfg_; }
  const CohortSchema& schema() const { return schema_; }
  std::array<int, 3> token_counts() const { return counts_; }

 private:
  ModelForward run(const PatientRecord& patient, bool train, RngStream* drop_rng,
                   RngStream* mask_rng, const MissingSpec* missing) const;

  ModelConfig cfg_;
  CohortSchema schema_;
  ParamStore params_;
  std::array<int, 3> counts_;
  std::unique_ptr<Cft> cft_;
  std::unique_ptr<Hae> hae_rna_, hae_cm_;
  std::unique_ptr<TriMae> trimae_;
  ModalityFusion fusion_;
  std::array<RiskHead, 3> heads_;
};

// Versioned binary checkpoint of named parameter tensors.
void save_checkpoint(const ParamStore& params, const std::string& path);
void load_checkpoint(ParamStore& params, const std::string& path);

}  // namespace foresee
