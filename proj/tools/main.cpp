// foresee: batch front end for the multimodal survival pipeline.
// Subcommands: generate, train, eval, km.
// Exit codes: 0 success, 1 validation error, 2 runtime/divergence error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "foresee/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace foresee;

namespace {

uint64_t resolve_seed(uint64_t cli_seed, bool seed_given) {
  if (seed_given) return cli_seed;
  if (const char* env = std::getenv("FORESEE_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ValidationError(std::string("FORESEE_SEED is not an integer: ") + env);
    }
  }
  return 7;
}

TrainConfig preset_config(const std::string& preset) {
  if (preset == "desk") return desk_preset();
  if (preset == "paper") return paper_preset();
  if (preset.empty()) return desk_preset();
  throw ValidationError("unknown preset '" + preset + "' (expected desk or paper)");
}

struct RiskRow {
  std::string id;
  double risk = 0.0;
  double time = 0.0;
  int event = 0;
};

std::vector<RiskRow> read_risk_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open risk CSV " + path);
  std::string line;
  std::getline(f, line);
  if (line.rfind("id,risk", 0) != 0)
    throw ValidationError("risk CSV " + path + ": expected header id,risk[,time,event]");
  bool has_surv = line == "id,risk,time,event";
  std::vector<RiskRow> rows;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    RiskRow r;
    std::string field;
    std::getline(ss, r.id, ',');
    std::getline(ss, field, ',');
    r.risk = parse_double(field);
    if (has_surv) {
      std::getline(ss, field, ',');
      r.time = parse_double(field);
      std::getline(ss, field, ',');
      r.event = std::stoi(field);
    }
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw ValidationError("risk CSV " + path + " has no rows");
  return rows;
}

void join_survival_csv(std::vector<RiskRow>& rows, const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ValidationError("cannot open survival CSV " + path);
  std::string line;
  std::getline(f, line);
  if (line != "id,time,event")
    throw ValidationError("survival CSV " + path + ": expected header id,time,event");
  std::map<std::string, std::pair<double, int>> table;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string id, t, e;
    std::getline(ss, id, ',');
    std::getline(ss, t, ',');
    std::getline(ss, e, ',');
    table[id] = {parse_double(t), std::stoi(e)};
  }
  for (auto& r : rows) {
    auto it = table.find(r.id);
    if (it == table.end())
      throw ValidationError("survival CSV has no entry for patient '" + r.id + "'");
    r.time = it->second.first;
    r.event = it->second.second;
  }
}

int cmd_generate(int n, uint64_t seed, double censoring, const std::string& out) {
  CohortSchema schema;
  GenerateOptions opt;
  opt.censoring_rate = censoring;
  RngStream rng(seed, "datagen");
  Cohort cohort = generate_cohort(n, schema, opt, rng);
  write_cohort(cohort, out);
  int events = 0;
  for (const auto& p : cohort.patients) events += p.event;
  std::cout << "wrote " << n << " patients to " << out << "\n"
            << "schema: grids " << schema.grid(Scale::Large).rows << "x"
            << schema.grid(Scale::Large).cols << "/" << schema.grid(Scale::Medium).rows
            << "x" << schema.grid(Scale::Medium).cols << "/"
            << schema.grid(Scale::Small).rows << "x" << schema.grid(Scale::Small).cols
            << ", d_x " << schema.d_x << ", rna " << schema.rna_dim << ", cnv_mut "
            << schema.cm_dim << "\n"
            << "events: " << events << "/" << n << " (censored fraction "
            << format_double(1.0 - (double)events / n) << ")" << std::endl;
  return 0;
}

void apply_overrides(TrainConfig& cfg, const std::string& views, int epochs,
                     int warmup_epochs, int batch_size, int folds, double lr,
                     double dropout, bool no_trimae,
                     const std::string& hae_variant, double mask_ratio) {
  if (!views.empty()) cfg.model.views = parse_views(views);
  if (epochs > 0) cfg.epochs = epochs;
  if (warmup_epochs >= 0) cfg.warmup_epochs = warmup_epochs;
  if (batch_size > 0) cfg.batch_size = batch_size;
  if (folds > 0) cfg.folds = folds;
  if (lr > 0) cfg.opt.lr = lr;
  if (dropout >= 0) cfg.dropout = dropout;
  if (no_trimae) cfg.model.trimae_enabled = false;
  if (!hae_variant.empty()) cfg.model.hae_variant = hae_variant_from_string(hae_variant);
  if (mask_ratio >= 0) cfg.model.trimae.mask_ratio = mask_ratio;
  cfg.apply_dropout();
  cfg.model.sync_dims();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FORESEE multimodal survival pipeline"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic cohort");
  int gen_n = 200;
  uint64_t gen_seed = 7;
  double gen_cens = 0.3;
  std::string gen_out = "cohort";
  gen->add_option("--n", gen_n, "number of patients");
  auto* gen_seed_opt = gen->add_option("--seed", gen_seed, "generator seed");
  gen->add_option("--censoring", gen_cens, "target censoring fraction");
  gen->add_option("--out", gen_out, "output directory");

  // shared train/eval options
  std::string cohort_dir, preset, config_path, out_dir = "run", views, hae_variant;
  uint64_t seed = 7;
  int epochs = -1, warmup_epochs = -1, batch_size = -1, folds = -1;
  double lr = -1, dropout = -1, mask_ratio = -1;
  bool no_trimae = false, quiet = false;

  auto* train = app.add_subcommand("train", "5-fold cross-validated training");
  train->add_option("--cohort", cohort_dir, "cohort directory")->required();
  train->add_option("--preset", preset, "desk | paper");
  train->add_option("--config", config_path, "JSON config; flags override it");
  auto* train_seed_opt = train->add_option("--seed", seed, "experiment seed");
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--views", views, "pathology views, subset of s,m,l");
  train->add_option("--epochs", epochs, "training epochs");
  train->add_option("--warmup-epochs", warmup_epochs,
                    "reconstruction-only epochs before the joint objective");
  train->add_option("--batch-size", batch_size, "Cox batch size");
  train->add_option("--folds", folds, "CV folds");
  train->add_option("--lr", lr, "learning rate");
  train->add_option("--dropout", dropout, "dropout rate");
  train->add_option("--mask-ratio", mask_ratio, "TriMAE mask ratio");
  train->add_flag("--no-trimae", no_trimae, "disable TriMAE refinement");
  train->add_option("--hae-variant", hae_variant, "full | no_cta | no_cna | plain");
  train->add_flag("--quiet", quiet, "suppress per-epoch output");

  // eval
  std::string ckpt_path, report_path, drop_modality;
  int eval_fold = -1;
  double drop_frac = 0.0;
  uint64_t drop_seed = 0;
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a cohort");
  ev->add_option("--cohort", cohort_dir, "cohort directory")->required();
  ev->add_option("--checkpoint", ckpt_path, "model checkpoint")->required();
  ev->add_option("--config", config_path, "JSON config (e.g. a report.json)");
  ev->add_option("--report", report_path, "training report.json; supplies config");
  ev->add_option("--fold", eval_fold,
                 "restrict to this fold's held-out patients (needs --report)");
  auto* eval_seed_opt = ev->add_option("--seed", seed, "model seed override");
  ev->add_option("--out", out_dir, "output directory");
  ev->add_option("--drop-modality", drop_modality, "P | R | CM");
  ev->add_option("--drop-frac", drop_frac, "fraction of tokens to delete");
  ev->add_option("--drop-seed", drop_seed, "seed for the deletion mask");
  ev->add_flag("--no-trimae", no_trimae, "disable TriMAE refinement");

  // km
  std::string km_risks, km_survival, km_out = "km";
  auto* km = app.add_subcommand("km", "Median-split Kaplan-Meier curves + log-rank");
  km->add_option("--risks", km_risks, "risk CSV (id,risk[,time,event])")->required();
  km->add_option("--survival", km_survival, "survival CSV (id,time,event)");
  km->add_option("--out", km_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) {
      return cmd_generate(gen_n, resolve_seed(gen_seed, gen_seed_opt->count() > 0),
                          gen_cens, gen_out);
    }

    if (train->parsed()) {
      TrainConfig cfg;
      if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw ValidationError("cannot open config " + config_path);
        cfg = config_from_json(json::parse(f));
        if (!preset.empty()) cfg = preset_config(preset);  // preset flag wins whole
      } else {
        cfg = preset_config(preset);
      }
      cfg.seed = resolve_seed(seed, train_seed_opt->count() > 0);
      apply_overrides(cfg, views, epochs, warmup_epochs, batch_size, folds, lr,
                      dropout, no_trimae,
                      hae_variant, mask_ratio);
      Cohort cohort = read_cohort(cohort_dir);
      TrainReport report = train_cv(cohort, cfg, out_dir, !quiet);
      std::cout << "mean c-index " << format_double(report.mean_c_index) << " +/- "
                << format_double(report.std_c_index) << ", log-rank p "
                << format_double(report.log_rank_p) << std::endl;
      return 0;
    }

    if (ev->parsed()) {
      TrainConfig cfg;
      json jc;
      std::vector<int> indices;
      if (!report_path.empty()) {
        std::ifstream f(report_path);
        if (!f) throw ValidationError("cannot open report " + report_path);
        json rep = json::parse(f);
        jc = rep.at("config");
        cfg = config_from_json(jc);
        cfg.seed = rep.value("seed", cfg.seed);
        if (eval_fold >= 0) {
          if (eval_fold >= (int)rep.at("folds").size())
            throw ValidationError("--fold out of range for report");
          json jf = rep["folds"][eval_fold];
          // risks CSVs carry ids; the report carries raw indices
          for (const auto& f2 : rep["folds"])
            if (f2["fold"] == eval_fold && f2.contains("test_indices"))
              indices = f2["test_indices"].get<std::vector<int>>();
        }
      } else if (!config_path.empty()) {
        std::ifstream f(config_path);
        if (!f) throw ValidationError("cannot open config " + config_path);
        json j = json::parse(f);
        jc = j.contains("config") ? j["config"] : j;
        cfg = config_from_json(jc);
      } else {
        cfg = preset_config(preset);
      }
      if (eval_seed_opt->count() > 0) cfg.seed = seed;
      if (no_trimae) cfg.model.trimae_enabled = false;
      cfg.model.sync_dims();

      Cohort cohort = read_cohort(cohort_dir);
      if (indices.empty()) {
        indices.resize(cohort.size());
        for (size_t i = 0; i < cohort.size(); ++i) indices[i] = (int)i;
      }
      ForeseeModel model(cfg.model, cohort.schema, cfg.seed);
      load_checkpoint(model.params(), ckpt_path);

      EvalOptions opt;
      if (!drop_modality.empty()) {
        opt.drop_enabled = true;
        opt.drop_modality = modality_from_string(drop_modality);
        opt.drop_frac = drop_frac;
        opt.drop_seed = drop_seed;
      }
      EvalResult res = evaluate_model(model, cohort, indices, opt);

      fs::create_directories(out_dir);
      json jr;
      jr["c_index"] = res.c_index;
      jr["log_rank_chi2"] = res.log_rank_chi2;
      jr["log_rank_p"] = res.log_rank_p;
      jr["split_degenerate"] = res.split_degenerate;
      jr["n"] = indices.size();
      jr["drop_modality"] = drop_modality;
      jr["drop_frac"] = drop_frac;
      jr["config"] = jc.is_null() ? config_to_json(cfg) : jc;
      jr["seed"] = cfg.seed;
      std::ofstream jf(fs::path(out_dir) / "eval.json");
      jf << jr.dump(2) << '\n';
      std::ofstream rf(fs::path(out_dir) / "risks.csv");
      rf << "id,risk,time,event\n";
      for (size_t k = 0; k < indices.size(); ++k) {
        const auto& p = cohort.patients[indices[k]];
        rf << p.id << ',' << format_double(res.risks[k]) << ','
           << format_double(p.survival_time) << ',' << p.event << '\n';
      }
      std::cout << "c-index " << format_double(res.c_index) << ", log-rank p "
                << format_double(res.log_rank_p) << std::endl;
      return 0;
    }

    if (km->parsed()) {
      std::vector<RiskRow> rows = read_risk_csv(km_risks);
      if (!km_survival.empty()) join_survival_csv(rows, km_survival);
      std::vector<double> risks;
      for (const auto& r : rows) risks.push_back(r.risk);
      RiskSplit split = median_risk_split(risks);
      fs::create_directories(km_out);
      if (split.degenerate) {
        std::cout << "warning: degenerate median split (all risks equal); "
                     "no test performed"
                  << std::endl;
        return 0;
      }
      std::vector<double> ta, tb;
      std::vector<int> ea, eb;
      for (int i : split.low) {
        ta.push_back(rows[i].time);
        ea.push_back(rows[i].event);
      }
      for (int i : split.high) {
        tb.push_back(rows[i].time);
        eb.push_back(rows[i].event);
      }
      write_km_csv(km_curve(ta, ea), "low", (fs::path(km_out) / "km_low.csv").string());
      write_km_csv(km_curve(tb, eb), "high",
                   (fs::path(km_out) / "km_high.csv").string());
      LogRankResult lr = log_rank_p(ta, ea, tb, eb);
      json j;
      j["chi_square"] = lr.chi_square;
      j["p_value"] = lr.p_value;
      j["n_low"] = ta.size();
      j["n_high"] = tb.size();
      std::ofstream jf(fs::path(km_out) / "logrank.json");
      jf << j.dump(2) << '\n';
      std::cout << "log-rank chi2 " << format_double(lr.chi_square) << ", p "
                << format_double(lr.p_value) << std::endl;
      return 0;
    }
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const json::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
  return 0;
}
