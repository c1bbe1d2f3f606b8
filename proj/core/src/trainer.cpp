#include "foresee/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace foresee {

void TrainConfig::apply_dropout() {
  model.cft.dropout = dropout;
  model.hae.dropout = dropout;
  model.trimae.dropout = dropout;
}

TrainConfig desk_preset() {
  TrainConfig cfg;
  cfg.preset = "desk";
  cfg.model.dim = 64;
  cfg.model.cft.fusion_inner = 32;
  cfg.epochs = 8;
  cfg.warmup_epochs = 8;
  cfg.batch_size = 25;
  cfg.folds = 5;
  cfg.apply_dropout();
  cfg.model.sync_dims();
  return cfg;
}

TrainConfig paper_preset() {
  TrainConfig cfg;
  cfg.preset = "paper";
  cfg.model.dim = 500;
  cfg.model.cft.fusion_inner = 125;
  cfg.epochs = 50;
  cfg.warmup_epochs = 10;
  cfg.batch_size = 50;
  cfg.folds = 5;
  cfg.apply_dropout();
  cfg.model.sync_dims();
  return cfg;
}

json config_to_json(const TrainConfig& cfg) {
  json j;
  j["preset"] = cfg.preset;
  j["seed"] = cfg.seed;
  j["epochs"] = cfg.epochs;
  j["warmup_epochs"] = cfg.warmup_epochs;
  j["batch_size"] = cfg.batch_size;
  j["folds"] = cfg.folds;
  j["dropout"] = cfg.dropout;
  j["optimizer"] = {{"lr", cfg.opt.lr},
                    {"weight_decay", cfg.opt.weight_decay},
                    {"beta1", cfg.opt.beta1},
                    {"beta2", cfg.opt.beta2},
                    {"eps", cfg.opt.eps}};
  j["model"]["dim"] = cfg.model.dim;
  j["model"]["gnn_layers"] = cfg.model.cft.gnn_layers;
  j["model"]["heads"] = cfg.model.cft.heads;
  j["model"]["ffn_mult"] = cfg.model.cft.ffn_mult;
  j["model"]["tf_depth"] = cfg.model.cft.tf_depth;
  j["model"]["fusion_inner"] = cfg.model.cft.fusion_inner;
  j["model"]["hae_chunk"] = cfg.model.hae.chunk;
  j["model"]["hae_beta"] = cfg.model.hae.beta;
  j["model"]["hae_variant"] = hae_variant_name(cfg.model.hae_variant);
  j["model"]["wavelet_order"] = cfg.model.hae.wavelet.order;
  j["model"]["wavelet_levels"] = cfg.model.hae.wavelet.levels;
  j["model"]["trimae_enabled"] = cfg.model.trimae_enabled;
  j["model"]["mask_ratio"] = cfg.model.trimae.mask_ratio;
  j["model"]["allow_low_mask"] = cfg.model.trimae.allow_low_mask;
  std::string views;
  for (Scale s : cfg.model.views) {
    if (!views.empty()) views += ',';
    views += scale_suffix(s);
  }
  j["model"]["views"] = views;
  j["loss"]["lambda_trimae"] = cfg.model.weights.lambda_trimae;
  j["loss"]["lambda_modality"] = cfg.model.weights.lambda_modality;
  return j;
}

std::vector<Scale> parse_views(const std::string& s) {
  std::vector<Scale> out;
  for (char c : s) {
    if (c == ',' || c == ' ') continue;
    if (c == 's')
      out.push_back(Scale::Small);
    else if (c == 'm')
      out.push_back(Scale::Medium);
    else if (c == 'l')
      out.push_back(Scale::Large);
    else
      throw ValidationError(std::string("bad view '") + c + "' (expected s, m, l)");
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (out.empty()) throw ValidationError("views: at least one of s,m,l required");
  return out;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig cfg;
  cfg.preset = j.value("preset", "");
  cfg.seed = j.value("seed", (uint64_t)7);
  cfg.epochs = j.value("epochs", cfg.epochs);
  cfg.warmup_epochs = j.value("warmup_epochs", cfg.warmup_epochs);
  cfg.batch_size = j.value("batch_size", cfg.batch_size);
  cfg.folds = j.value("folds", cfg.folds);
  cfg.dropout = j.value("dropout", cfg.dropout);
  if (j.contains("optimizer")) {
    const auto& o = j["optimizer"];
    cfg.opt.lr = o.value("lr", cfg.opt.lr);
    cfg.opt.weight_decay = o.value("weight_decay", cfg.opt.weight_decay);
    cfg.opt.beta1 = o.value("beta1", cfg.opt.beta1);
    cfg.opt.beta2 = o.value("beta2", cfg.opt.beta2);
    cfg.opt.eps = o.value("eps", cfg.opt.eps);
  }
  if (j.contains("model")) {
    const auto& m = j["model"];
    cfg.model.dim = m.value("dim", cfg.model.dim);
    cfg.model.cft.gnn_layers = m.value("gnn_layers", cfg.model.cft.gnn_layers);
    cfg.model.cft.heads = m.value("heads", cfg.model.cft.heads);
    cfg.model.cft.ffn_mult = m.value("ffn_mult", cfg.model.cft.ffn_mult);
    cfg.model.cft.tf_depth = m.value("tf_depth", cfg.model.cft.tf_depth);
    cfg.model.cft.fusion_inner = m.value("fusion_inner", cfg.model.cft.fusion_inner);
    cfg.model.hae.chunk = m.value("hae_chunk", cfg.model.hae.chunk);
    cfg.model.hae.beta = m.value("hae_beta", cfg.model.hae.beta);
    if (m.contains("hae_variant"))
      cfg.model.hae_variant = hae_variant_from_string(m["hae_variant"]);
    cfg.model.hae.wavelet.order = m.value("wavelet_order", 2);
    cfg.model.hae.wavelet.levels = m.value("wavelet_levels", 2);
    cfg.model.trimae_enabled = m.value("trimae_enabled", true);
    cfg.model.trimae.mask_ratio = m.value("mask_ratio", 0.85);
    cfg.model.trimae.allow_low_mask = m.value("allow_low_mask", false);
    if (m.contains("views")) cfg.model.views = parse_views(m["views"]);
  }
  if (j.contains("loss")) {
    cfg.model.weights.lambda_trimae = j["loss"].value("lambda_trimae", 5.0);
    if (j["loss"].contains("lambda_modality"))
      cfg.model.weights.lambda_modality =
          j["loss"]["lambda_modality"].get<std::array<double, 3>>();
  }
  cfg.apply_dropout();
  cfg.model.sync_dims();
  return cfg;
}

json TrainReport::to_json() const {
  json j;
  j["seed"] = seed;
  j["config"] = config;
  j["mean_c_index"] = mean_c_index;
  j["std_c_index"] = std_c_index;
  j["log_rank_chi2"] = log_rank_chi2;
  j["log_rank_p"] = log_rank_p;
  j["split_degenerate"] = split_degenerate;
  j["folds"] = json::array();
  for (const auto& f : folds) {
    json jf;
    jf["fold"] = f.fold;
    jf["skipped"] = f.skipped;
    jf["note"] = f.note;
    jf["c_index"] = f.c_index;
    jf["trimae_mse"] = f.trimae_mse;
    jf["imputation_mse"] = f.imputation_mse;
    jf["epoch_losses"] = f.epoch_losses;
    j["folds"].push_back(jf);
  }
  return j;
}

namespace {

uint64_t fold_seed(uint64_t seed, int fold) {
  return seed + 0x51ed270f3ull * (uint64_t)(fold + 1);
}

}  // namespace

TrainReport train_cv(const Cohort& cohort, const TrainConfig& cfg_in,
                     const std::string& out_dir, bool verbose) {
  TrainConfig cfg = cfg_in;
  cfg.apply_dropout();
  cfg.model.sync_dims();
  cfg.model.validate();
  cohort.validate();
  fs::create_directories(out_dir);

  int n = (int)cohort.size();
  RngStream fold_rng(cfg.seed, "folds");
  FoldSplit split = kfold_split(n, cfg.folds, fold_rng);

  TrainReport report;
  report.seed = cfg.seed;
  report.config = config_to_json(cfg);

  std::vector<double> pooled_risks, pooled_times;
  std::vector<int> pooled_events;

  for (int fold = 0; fold < cfg.folds; ++fold) {
    FoldMetrics fm;
    fm.fold = fold;
    fm.test_indices = split.test_indices(fold);
    std::vector<int> train_idx = split.train_indices(fold);

    uint64_t fseed = fold_seed(cfg.seed, fold);
    ForeseeModel model(cfg.model, cohort.schema, fseed);
    Adam optimizer(model.params(), cfg.opt);
    RngStream drop_rng(fseed, "dropout");
    RngStream mask_rng(fseed, "masking");
    RngStream shuffle_rng(fseed, "batch_shuffle");

    bool diverged = false;
    int warmup = cfg.model.trimae_enabled ? cfg.warmup_epochs : 0;
    for (int epoch = 0; epoch < warmup + cfg.epochs && !diverged; ++epoch) {
      bool warm = epoch < warmup;
      // epoch shuffle
      for (int i = (int)train_idx.size() - 1; i > 0; --i)
        std::swap(train_idx[i], train_idx[shuffle_rng.uniform_int(i + 1)]);
      double epoch_loss = 0.0;
      int batches = 0;
      for (size_t start = 0; start < train_idx.size(); start += cfg.batch_size) {
        size_t end = std::min(train_idx.size(), start + cfg.batch_size);
        std::vector<double> times;
        std::vector<int> events;
        std::array<std::vector<Var>, 3> outs;
        std::vector<Var> tri_losses;
        for (size_t k = start; k < end; ++k) {
          const PatientRecord& p = cohort.patients[train_idx[k]];
          ModelForward f = model.forward_train(p, drop_rng, mask_rng);
          for (int m = 0; m < 3; ++m) outs[m].push_back(f.outputs[m]);
          tri_losses.push_back(f.trimae_loss);
          times.push_back(p.survival_time);
          events.push_back(p.event);
        }
        std::array<Var, 3> cox_terms;
        for (int m = 0; m < 3; ++m)
          cox_terms[m] = foresee::cox_loss(ag::concat_rows(outs[m]), times, events);
        Var tri = ag::mean_all(ag::concat_rows(tri_losses));
        Var total = warm ? ag::scale(tri, cfg.model.weights.lambda_trimae)
                         : total_loss(cox_terms, tri, cfg.model.weights);
        model.params().zero_grad();
        try {
          ag::backward(total);
          optimizer.step();
        } catch (const DivergenceError& e) {
          fm.note = std::string("diverged at epoch ") + std::to_string(epoch) + ": " +
                    e.what();
          fm.skipped = true;
          diverged = true;
          break;
        }
        epoch_loss += total.item();
        ++batches;
      }
      if (!diverged) {
        fm.epoch_losses.push_back(batches ? epoch_loss / batches : 0.0);
        if (verbose)
          std::cout << "fold " << fold << " epoch " << epoch << " loss "
                    << fm.epoch_losses.back() << std::endl;
      }
    }

    if (!fm.skipped) {
      std::vector<double> test_times;
      std::vector<int> test_events;
      for (int i : fm.test_indices) {
        test_times.push_back(cohort.patients[i].survival_time);
        test_events.push_back(cohort.patients[i].event);
      }
      EvalResult ev = evaluate_model(model, cohort, fm.test_indices);
      fm.risks = ev.risks;
      try {
        fm.c_index = c_index(ev.risks, test_times, test_events);
      } catch (const ValidationError& e) {
        fm.skipped = true;
        fm.note = std::string("insufficient events in fold: ") + e.what();
      }
      if (!fm.skipped) {
        if (cfg.model.trimae_enabled) {
          double rm = 0.0, im = 0.0;
          for (int i : fm.test_indices) {
            auto [r, m2] = model.masked_reconstruction_mse(cohort.patients[i], fseed);
            rm += r;
            im += m2;
          }
          fm.trimae_mse = rm / fm.test_indices.size();
          fm.imputation_mse = im / fm.test_indices.size();
        }
        // Cox outputs are identifiable only up to a per-model shift, so center
        // each fold's held-out risks at the fold median before pooling.
        std::vector<double> sorted_risks = fm.risks;
        std::nth_element(sorted_risks.begin(),
                         sorted_risks.begin() + (sorted_risks.size() - 1) / 2,
                         sorted_risks.end());
        double fold_median = sorted_risks[(sorted_risks.size() - 1) / 2];
        for (size_t k = 0; k < fm.test_indices.size(); ++k) {
          pooled_risks.push_back(fm.risks[k] - fold_median);
          pooled_times.push_back(test_times[k]);
          pooled_events.push_back(test_events[k]);
        }
        // artifacts
        std::ofstream rf(fs::path(out_dir) /
                         ("risks_fold" + std::to_string(fold) + ".csv"));
        rf << "id,risk,time,event\n";
        for (size_t k = 0; k < fm.test_indices.size(); ++k) {
          const auto& p = cohort.patients[fm.test_indices[k]];
          rf << p.id << ',' << format_double(fm.risks[k]) << ','
             << format_double(p.survival_time) << ',' << p.event << '\n';
        }
        save_checkpoint(model.params(),
                        (fs::path(out_dir) / ("fold" + std::to_string(fold) + ".ckpt"))
                            .string());
      }
    }
    if (verbose && fm.skipped)
      std::cout << "fold " << fold << " skipped: " << fm.note << std::endl;
    report.folds.push_back(std::move(fm));
  }

  // aggregate
  std::vector<double> cs;
  for (const auto& f : report.folds)
    if (!f.skipped) cs.push_back(f.c_index);
  if (!cs.empty()) {
    double mean = 0.0;
    for (double c : cs) mean += c;
    mean /= cs.size();
    double var = 0.0;
    for (double c : cs) var += (c - mean) * (c - mean);
    report.mean_c_index = mean;
    report.std_c_index = cs.size() > 1 ? std::sqrt(var / (cs.size() - 1)) : 0.0;
  }

  if (pooled_risks.size() >= 2) {
    RiskSplit rs = median_risk_split(pooled_risks);
    report.split_degenerate = rs.degenerate;
    if (!rs.degenerate) {
      std::vector<double> ta, tb;
      std::vector<int> ea, eb;
      for (int i : rs.low) {
        ta.push_back(pooled_times[i]);
        ea.push_back(pooled_events[i]);
      }
      for (int i : rs.high) {
        tb.push_back(pooled_times[i]);
        eb.push_back(pooled_events[i]);
      }
      try {
        LogRankResult lr = log_rank_p(ta, ea, tb, eb);
        report.log_rank_chi2 = lr.chi_square;
        report.log_rank_p = lr.p_value;
      } catch (const ValidationError&) {
        report.split_degenerate = true;
      }
    }
  }

  std::ofstream out(fs::path(out_dir) / "report.json");
  out << report.to_json().dump(2) << '\n';
  return report;
}

EvalResult evaluate_model(const ForeseeModel& model, const Cohort& cohort,
                          const std::vector<int>& indices, const EvalOptions& opt) {
  EvalResult res;
  std::vector<double> times;
  std::vector<int> events;
  RngStream drop_rng(opt.drop_seed, "dropmask");
  auto counts = model.token_counts();
  for (int i : indices) {
    const PatientRecord& p = cohort.patients[i];
    MissingSpec missing;
    if (opt.drop_enabled && opt.drop_frac > 0.0) {
      int b = (int)opt.drop_modality;
      int n = counts[b];
      int m = std::min(n - 1, (int)std::floor(opt.drop_frac * n));
      if (m > 0) {
        std::vector<int> idx(n);
        for (int k = 0; k < n; ++k) idx[k] = k;
        for (int k = n - 1; k > 0; --k)
          std::swap(idx[k], idx[drop_rng.uniform_int(k + 1)]);
        missing.missing[b].assign(idx.begin(), idx.begin() + m);
        std::sort(missing.missing[b].begin(), missing.missing[b].end());
      }
    }
    ModelForward f = model.forward_eval(p, missing);
    res.risks.push_back(f.risk().fused_risk);
    times.push_back(p.survival_time);
    events.push_back(p.event);
  }
  try {
    res.c_index = c_index(res.risks, times, events);
    res.c_index_defined = true;
  } catch (const ValidationError&) {
    // fully censored or degenerate subset: leave c_index undefined
  }
  RiskSplit rs = median_risk_split(res.risks);
  res.split_degenerate = rs.degenerate;
  if (!rs.degenerate) {
    std::vector<double> ta, tb;
    std::vector<int> ea, eb;
    for (int i : rs.low) {
      ta.push_back(times[i]);
      ea.push_back(events[i]);
    }
    for (int i : rs.high) {
      tb.push_back(times[i]);
      eb.push_back(events[i]);
    }
    try {
      LogRankResult lr = log_rank_p(ta, ea, tb, eb);
      res.log_rank_chi2 = lr.chi_square;
      res.log_rank_p = lr.p_value;
    } catch (const ValidationError&) {
      // event-free group: keep the p = 1 default
    }
  }
  return res;
}

std::pair<double, double> reconstruction_mse(const ForeseeModel& model,
                                             const Cohort& cohort,
                                             const std::vector<int>& indices,
                                             uint64_t seed) {
  double rm = 0.0, im = 0.0;
  for (int i : indices) {
    auto [r, m] = model.masked_reconstruction_mse(cohort.patients[i], seed);
    rm += r;
    im += m;
  }
  return {rm / indices.size(), im / indices.size()};
}

}  // namespace foresee
