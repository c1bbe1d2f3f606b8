#pragma once

#include <string>

#include <json.hpp>

#include "foresee/eval.hpp"
#include "foresee/model.hpp"
#include "foresee/optim.hpp"

namespace foresee {

struct TrainConfig {
  ModelConfig model;
  Adam::Config opt;       // lr 5e-3, weight decay 1e-5
  int epochs = 50;
  // Reconstruction-only pretraining epochs before the joint objective. The
  // survival loss pulls token representations toward a low-dimensional risk
  // direction; giving the masked autoencoder a head start keeps the tokens
  // informative enough for it to beat the imputation baseline.
  int warmup_epochs = 0;
  int batch_size = 50;
  int folds = 5;
  double dropout = 0.2;
  uint64_t seed = 7;
  std::string preset;     // "desk" | "paper" | ""

  void apply_dropout();   // pushes the dropout knob into the sub-configs
};

// CI-sized configuration: small dims, few epochs.
TrainConfig desk_preset();
// Paper-sized hyperparameters: hidden 500, batch 50, epoch 50.
TrainConfig paper_preset();

nlohmann::json config_to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const nlohmann::json& j);

// Parses a comma-separated subset of "s,m,l" into sorted unique scales.
std::vector<Scale> parse_views(const std::string& s);

struct FoldMetrics {
  int fold = 0;
  bool skipped = false;
  std::string note;
  double c_index = 0.0;
  double trimae_mse = 0.0;      // masked-position reconstruction MSE on held-out
  double imputation_mse = 0.0;  // mean-imputation baseline on the same masks
  std::vector<double> epoch_losses;
  std::vector<int> test_indices;
  std::vector<double> risks;    // aligned with test_indices
};

struct TrainReport {
  std::vector<FoldMetrics> folds;
  double mean_c_index = 0.0;
  double std_c_index = 0.0;
  double log_rank_chi2 = 0.0;
  double log_rank_p = 1.0;
  bool split_degenerate = false;
  uint64_t seed = 0;
  nlohmann::json config;

  nlohmann::json to_json() const;
};

// 5-fold CV training; writes report.json, per-fold risks_fold<k>.csv and
// fold<k>.ckpt into out_dir. Wall time is reported on stdout only so the
// report bytes are a pure function of (config, seed).
TrainReport train_cv(const Cohort& cohort, const TrainConfig& cfg,
                     const std::string& out_dir, bool verbose = true);

struct EvalOptions {
  // Simulated intra-modality missingness applied to held-out patients.
  bool drop_enabled = false;
  Modality drop_modality = Modality::Rna;
  double drop_frac = 0.0;
  uint64_t drop_seed = 0;
};

struct EvalResult {
  std::vector<double> risks;
  double c_index = 0.0;
  bool c_index_defined = false;  // false when no pair is comparable
  double log_rank_chi2 = 0.0;
  double log_rank_p = 1.0;
  bool split_degenerate = false;
};

EvalResult evaluate_model(const ForeseeModel& model, const Cohort& cohort,
                          const std::vector<int>& indices,
                          const EvalOptions& opt = {});

// Masked-reconstruction quality on a patient subset: TriMAE reconstruction MSE
// and the mean-imputation baseline on identical masks.
std::pair<double, double> reconstruction_mse(const ForeseeModel& model,
                                             const Cohort& cohort,
                                             const std::vector<int>& indices,
                                             uint64_t seed);

}  // namespace foresee
