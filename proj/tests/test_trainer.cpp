#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "foresee/trainer.hpp"

using namespace foresee;
namespace fs = std::filesystem;

namespace {

Cohort small_cohort(int n = 14) {
  CohortSchema s;
  s.d_x = 4;
  s.rna_dim = 16;
  s.cm_dim = 16;
  s.grids = {GridShape{3, 3}, GridShape{2, 2}, GridShape{2, 2}};
  GenerateOptions opt;
  RngStream rng(3, "datagen");
  return generate_cohort(n, s, opt, rng);
}

TrainConfig small_config() {
  TrainConfig cfg = desk_preset();
  cfg.model.dim = 8;
  cfg.model.cft.heads = 2;
  cfg.model.cft.ffn_mult = 2;
  cfg.model.cft.fusion_inner = 4;
  cfg.model.hae.chunk = 8;
  cfg.model.hae.wavelet.levels = 1;
  cfg.epochs = 1;
  cfg.warmup_epochs = 1;
  cfg.batch_size = 7;
  cfg.folds = 2;
  cfg.apply_dropout();
  cfg.model.sync_dims();
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("presets carry the documented hyperparameters") {
  TrainConfig desk = desk_preset();
  CHECK(desk.preset == "desk");
  CHECK(desk.folds == 5);
  CHECK(desk.opt.lr == 5e-3);
  CHECK(desk.opt.weight_decay == 1e-5);
  CHECK(desk.dropout == 0.2);
  CHECK(desk.warmup_epochs == 8);
  TrainConfig paper = paper_preset();
  CHECK(paper.model.dim == 500);
  CHECK(paper.batch_size == 50);
  CHECK(paper.epochs == 50);
}

TEST_CASE("config json round-trips") {
  TrainConfig cfg = small_config();
  cfg.seed = 123;
  cfg.model.hae_variant = HaeVariant::NoCna;
  cfg.model.trimae_enabled = false;
  cfg.model.views = {Scale::Small, Scale::Large};
  auto j = config_to_json(cfg);
  TrainConfig back = config_from_json(j);
  CHECK(config_to_json(back) == j);
  CHECK(back.seed == 123);
  CHECK(back.model.hae_variant == HaeVariant::NoCna);
  CHECK(back.model.trimae_enabled == false);
  CHECK(back.model.views == cfg.model.views);
}

TEST_CASE("parse_views handles subsets, dedup, and rejects junk") {
  CHECK(parse_views("s") == std::vector<Scale>{Scale::Small});
  CHECK(parse_views("l,s") == std::vector<Scale>{Scale::Small, Scale::Large});
  CHECK(parse_views("s,s,m") == std::vector<Scale>{Scale::Small, Scale::Medium});
  CHECK_THROWS_AS(parse_views("x"), ValidationError);
  CHECK_THROWS_AS(parse_views(""), ValidationError);
}

TEST_CASE("train_cv writes a complete, reproducible report") {
  Cohort cohort = small_cohort();
  TrainConfig cfg = small_config();
  fs::path d1 = fs::temp_directory_path() / "foresee_test_run1";
  fs::path d2 = fs::temp_directory_path() / "foresee_test_run2";
  fs::remove_all(d1);
  fs::remove_all(d2);

  TrainReport r1 = train_cv(cohort, cfg, d1.string(), false);
  TrainReport r2 = train_cv(cohort, cfg, d2.string(), false);

  CHECK((int)r1.folds.size() == 2);
  CHECK(fs::exists(d1 / "report.json"));
  CHECK(fs::exists(d1 / "risks_fold0.csv"));
  CHECK(fs::exists(d1 / "fold0.ckpt"));
  // byte-identical artifacts across reruns of the same config + seed
  CHECK(slurp(d1 / "report.json") == slurp(d2 / "report.json"));
  CHECK(slurp(d1 / "risks_fold0.csv") == slurp(d2 / "risks_fold0.csv"));
  CHECK(slurp(d1 / "fold0.ckpt") == slurp(d2 / "fold0.ckpt"));

  // the report embeds config and seed for reproducibility
  auto j = r1.to_json();
  CHECK(j["seed"] == cfg.seed);
  CHECK(j["config"]["model"]["dim"] == 8);

  // risk CSV has the contract header
  std::istringstream risks(slurp(d1 / "risks_fold0.csv"));
  std::string header;
  std::getline(risks, header);
  CHECK(header == "id,risk,time,event");

  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("different seeds produce different reports") {
  Cohort cohort = small_cohort();
  TrainConfig a = small_config(), b = small_config();
  b.seed = a.seed + 1;
  fs::path d1 = fs::temp_directory_path() / "foresee_test_seed1";
  fs::path d2 = fs::temp_directory_path() / "foresee_test_seed2";
  fs::remove_all(d1);
  fs::remove_all(d2);
  train_cv(cohort, a, d1.string(), false);
  train_cv(cohort, b, d2.string(), false);
  CHECK(slurp(d1 / "report.json") != slurp(d2 / "report.json"));
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST_CASE("a fold with no comparable pairs is skipped with a note") {
  Cohort cohort = small_cohort(8);
  for (auto& p : cohort.patients) p.event = 0;  // fully censored cohort
  TrainConfig cfg = small_config();
  cfg.batch_size = 4;
  fs::path d = fs::temp_directory_path() / "foresee_test_skip";
  fs::remove_all(d);
  TrainReport r = train_cv(cohort, cfg, d.string(), false);
  for (const auto& f : r.folds) {
    CHECK(f.skipped);
    CHECK(!f.note.empty());
  }
  fs::remove_all(d);
}

TEST_CASE("evaluate_model with token drops is deterministic") {
  Cohort cohort = small_cohort();
  TrainConfig cfg = small_config();
  ForeseeModel model(cfg.model, cohort.schema, 5);
  std::vector<int> idx;
  for (int i = 0; i < (int)cohort.size(); ++i) idx.push_back(i);

  EvalOptions opt;
  opt.drop_enabled = true;
  opt.drop_modality = Modality::Rna;
  opt.drop_frac = 0.5;
  opt.drop_seed = 11;
  EvalResult a = evaluate_model(model, cohort, idx, opt);
  EvalResult b = evaluate_model(model, cohort, idx, opt);
  CHECK(a.risks == b.risks);
  CHECK(a.c_index == b.c_index);

  EvalResult clean = evaluate_model(model, cohort, idx);
  CHECK(clean.risks != a.risks);
}
