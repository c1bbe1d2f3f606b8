#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "foresee/matrix.hpp"
#include "foresee/rng.hpp"

namespace foresee {

enum class Scale { Small = 0, Medium = 1, Large = 2 };
inline const char* scale_name(Scale s) {
  switch (s) {
    case Scale::Small: return "small";
    case Scale::Medium: return "medium";
    case Scale::Large: return "large";
  }
  return "?";
}
inline char scale_suffix(Scale s) {
  return s == Scale::Small ? 's' : (s == Scale::Medium ? 'm' : 'l');
}

struct GridShape {
  int rows = 0, cols = 0;
  int nodes() const { return rows * cols; }
  bool operator==(const GridShape&) const = default;
};

struct CohortSchema {
  int d_x = 64;
  int rna_dim = 256;
  int cm_dim = 128;
  std::array<GridShape, 3> grids = {GridShape{8, 8}, GridShape{6, 6}, GridShape{4, 4}};

  const GridShape& grid(Scale s) const { return grids[(int)s]; }
  bool operator==(const CohortSchema&) const = default;
};

// One field of view's patch features with their integer grid coordinates.
struct PatientGrid {
  Mat features;                              // o x d_x
  std::vector<std::pair<int, int>> coords;   // o (row, col) pairs
  int nodes() const { return features.rows(); }
};

struct PatientRecord {
  std::string id;
  std::array<PatientGrid, 3> pathology;  // indexed by Scale
  std::vector<double> rna;
  std::vector<double> cnv_mut;
  double survival_time = 0.0;  // days
  int event = 0;               // 1 = death observed

  const PatientGrid& grid(Scale s) const { return pathology[(int)s]; }
  PatientGrid& grid(Scale s) { return pathology[(int)s]; }
};

struct Cohort {
  CohortSchema schema;
  std::vector<PatientRecord> patients;
  std::vector<double> latent_risk;  // synthetic only; empty when ingested

  size_t size() const { return patients.size(); }
  void validate() const;  // throws ValidationError naming patient and field
};

struct GenerateOptions {
  double hazard_scale = 1e-3;   // baseline exponential rate (1/days)
  double censoring_rate = 0.3;  // target expected fraction censored
  double risk_coef = 1.8;       // hazard = hazard_scale * exp(risk_coef * z)
  double noise_level = 0.5;
};

// Synthetic cohort with a known latent hazard z ~ N(0,1) per patient. The risk
// signal is planted in a contiguous sub-block of each pathology grid, along a
// fixed direction in rna space, and as a z-dependent spike rate in cnv_mut.
Cohort generate_cohort(int n, const CohortSchema& schema, const GenerateOptions& opt,
                       RngStream& rng);

struct CohortManifest {
  std::string directory;
  std::vector<std::string> ids;
};

CohortManifest write_cohort(const Cohort& cohort, const std::string& directory);
Cohort read_cohort(const std::string& directory);

struct FoldSplit {
  std::vector<std::vector<int>> folds;

  std::vector<int> train_indices(int fold) const;
  const std::vector<int>& test_indices(int fold) const { return folds[fold]; }
  int k() const { return (int)folds.size(); }
};

FoldSplit kfold_split(int n, int k, RngStream& rng);

// Shortest round-trip decimal formatting for doubles (used by all CSV output).
std::string format_double(double v);
double parse_double(const std::string& s);

}  // namespace foresee
