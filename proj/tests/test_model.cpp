#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "foresee/model.hpp"
#include "foresee/optim.hpp"

using namespace foresee;
using namespace foresee::ag;

namespace {

CohortSchema tiny_schema() {
  CohortSchema s;
  s.d_x = 4;
  s.rna_dim = 16;
  s.cm_dim = 16;
  s.grids = {GridShape{3, 3}, GridShape{2, 2}, GridShape{2, 2}};
  return s;
}

ModelConfig tiny_config() {
  ModelConfig cfg;
  cfg.dim = 8;
  cfg.cft.heads = 2;
  cfg.cft.ffn_mult = 2;
  cfg.cft.fusion_inner = 4;
  cfg.cft.dropout = 0.0;
  cfg.hae.chunk = 8;
  cfg.hae.dropout = 0.0;
  cfg.hae.wavelet.levels = 1;
  cfg.trimae.dropout = 0.0;
  cfg.sync_dims();
  return cfg;
}

PatientRecord tiny_patient(uint64_t seed, const CohortSchema& s) {
  RngStream rng(seed, "model_test");
  PatientRecord p;
  p.id = "p" + std::to_string(seed);
  for (int g = 0; g < 3; ++g) {
    const GridShape& grid = s.grids[g];
    Mat f(grid.nodes(), s.d_x);
    for (size_t k = 0; k < f.size(); ++k) f.at(k) = rng.normal();
    p.pathology[g].features = f;
    for (int i = 0; i < grid.rows; ++i)
      for (int j = 0; j < grid.cols; ++j) p.pathology[g].coords.emplace_back(i, j);
  }
  p.rna.resize(s.rna_dim);
  for (double& v : p.rna) v = rng.normal();
  p.cnv_mut.resize(s.cm_dim);
  for (double& v : p.cnv_mut) v = rng.normal();
  p.survival_time = 10.0 + 100.0 * rng.uniform();
  p.event = 1;
  return p;
}

}  // namespace

TEST_CASE("sync_dims keeps decoder width divisible by the head count") {
  ModelConfig cfg;
  cfg.dim = 10;
  cfg.cft.heads = 4;
  cfg.sync_dims();
  CHECK(cfg.trimae.decoder_dim % cfg.trimae.heads == 0);
  CHECK(cfg.hae.dim == 10);
  CHECK(cfg.trimae.dim == 10);
}

TEST_CASE("modality names round-trip") {
  for (Modality m : {Modality::Pathology, Modality::Rna, Modality::CnvMut})
    CHECK(modality_from_string(modality_name(m)) == m);
  CHECK_THROWS_AS(modality_from_string("X"), ValidationError);
}

TEST_CASE("forward produces three scalar outputs and a fused risk") {
  CohortSchema schema = tiny_schema();
  ForeseeModel model(tiny_config(), schema, 5);
  PatientRecord p = tiny_patient(1, schema);
  ModelForward f = model.forward_eval(p);
  for (int m = 0; m < 3; ++m) {
    CHECK(f.outputs[m].rows() == 1);
    CHECK(f.outputs[m].cols() == 1);
    CHECK(std::isfinite(f.outputs[m].item()));
  }
  RiskOutput r = f.risk();
  CHECK(r.fused_risk ==
        doctest::Approx((r.o_pathology + r.o_rna + r.o_cnv_mut) / 3.0));
  auto counts = model.token_counts();
  CHECK(counts[0] == 9 + 4 + 4);
  CHECK(counts[1] == 2);
  CHECK(counts[2] == 2);
}

TEST_CASE("same seed gives identical models, different seeds differ") {
  CohortSchema schema = tiny_schema();
  PatientRecord p = tiny_patient(2, schema);
  ForeseeModel a(tiny_config(), schema, 7), b(tiny_config(), schema, 7);
  ForeseeModel c(tiny_config(), schema, 8);
  double ra = a.forward_eval(p).risk().fused_risk;
  double rb = b.forward_eval(p).risk().fused_risk;
  double rc = c.forward_eval(p).risk().fused_risk;
  CHECK(ra == rb);
  CHECK(ra != rc);
}

TEST_CASE("training mode produces a positive reconstruction loss") {
  CohortSchema schema = tiny_schema();
  ForeseeModel model(tiny_config(), schema, 9);
  PatientRecord p = tiny_patient(3, schema);
  RngStream drop(1, "dropout"), mask(2, "masking");
  ModelForward f = model.forward_train(p, drop, mask);
  CHECK(f.trimae_loss.item() > 0.0);
  CHECK(std::isfinite(f.trimae_loss.item()));
}

TEST_CASE("disabled TriMAE passes tokens through with zero loss") {
  CohortSchema schema = tiny_schema();
  ModelConfig cfg = tiny_config();
  cfg.trimae_enabled = false;
  ForeseeModel model(cfg, schema, 10);
  PatientRecord p = tiny_patient(4, schema);
  RngStream drop(1, "dropout"), mask(2, "masking");
  CHECK(model.forward_train(p, drop, mask).trimae_loss.item() == 0.0);
  // and missing tokens fall back to mean imputation without throwing
  MissingSpec missing;
  missing.missing[1] = {0};
  ModelForward f = model.forward_eval(p, missing);
  CHECK(std::isfinite(f.risk().fused_risk));
}

TEST_CASE("missing tokens change the refined output but stay finite") {
  CohortSchema schema = tiny_schema();
  ForeseeModel model(tiny_config(), schema, 11);
  PatientRecord p = tiny_patient(5, schema);
  double base = model.forward_eval(p).risk().fused_risk;
  MissingSpec missing;
  missing.missing[0] = {0, 3, 7};
  missing.missing[1] = {1};
  double dropped = model.forward_eval(p, missing).risk().fused_risk;
  CHECK(std::isfinite(dropped));
  CHECK(dropped != base);
}

TEST_CASE("checkpoint round-trip restores outputs bit-for-bit") {
  namespace fs = std::filesystem;
  CohortSchema schema = tiny_schema();
  PatientRecord p = tiny_patient(6, schema);
  fs::path ckpt = fs::temp_directory_path() / "foresee_test_model.ckpt";

  ForeseeModel a(tiny_config(), schema, 12);
  double want = a.forward_eval(p).risk().fused_risk;
  save_checkpoint(a.params(), ckpt.string());

  ForeseeModel b(tiny_config(), schema, 999);  // different init
  CHECK(b.forward_eval(p).risk().fused_risk != want);
  load_checkpoint(b.params(), ckpt.string());
  CHECK(b.forward_eval(p).risk().fused_risk == want);
  fs::remove(ckpt);
}

TEST_CASE("checkpoint loading validates header and shapes") {
  namespace fs = std::filesystem;
  CohortSchema schema = tiny_schema();
  ForeseeModel a(tiny_config(), schema, 13);
  CHECK_THROWS_AS(load_checkpoint(a.params(), "/nonexistent/path.ckpt"),
                  ValidationError);
  fs::path bad = fs::temp_directory_path() / "foresee_test_bad.ckpt";
  {
    std::ofstream f(bad, std::ios::binary);
    f << "not a checkpoint";
  }
  CHECK_THROWS_AS(load_checkpoint(a.params(), bad.string()), ValidationError);
  fs::remove(bad);
}

TEST_CASE("masked reconstruction reports both model and baseline error") {
  CohortSchema schema = tiny_schema();
  ForeseeModel model(tiny_config(), schema, 14);
  PatientRecord p = tiny_patient(7, schema);
  auto [recon, impute] = model.masked_reconstruction_mse(p, 3);
  CHECK(recon > 0.0);
  CHECK(impute > 0.0);
  CHECK(std::isfinite(recon));
  CHECK(std::isfinite(impute));
  // deterministic in the seed
  auto [r2, i2] = model.masked_reconstruction_mse(p, 3);
  CHECK(recon == r2);
  CHECK(impute == i2);
}

TEST_CASE("single-view model runs end to end") {
  CohortSchema schema = tiny_schema();
  ModelConfig cfg = tiny_config();
  cfg.views = {Scale::Small};
  ForeseeModel model(cfg, schema, 15);
  PatientRecord p = tiny_patient(8, schema);
  CHECK(model.token_counts()[0] == 9);
  CHECK(std::isfinite(model.forward_eval(p).risk().fused_risk));
}
