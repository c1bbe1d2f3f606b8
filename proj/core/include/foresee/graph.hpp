#pragma once

#include <array>
#include <utility>
#include <vector>

#include "foresee/cohort.hpp"
#include "foresee/matrix.hpp"

namespace foresee {

// Undirected 8-neighbor spatial topology over patch features for one field of
// view. Nodes at Chebyshev distance 1 are connected; isolated nodes are kept.
struct ScaleGraph {
  Mat node_features;                           // o x d_x
  std::vector<std::pair<int, int>> coords;     // o grid positions
  std::vector<std::pair<int, int>> edges;      // unordered (m, n), m < n
  Mat adjacency;                               // o x o binary, symmetric, zero diag
  Scale scale = Scale::Small;

  int nodes() const { return node_features.rows(); }
  int degree(int node) const;
};

ScaleGraph build_grid_graph(Mat features, std::vector<std::pair<int, int>> coords,
                            Scale scale);

std::array<ScaleGraph, 3> build_multiscale(const PatientRecord& patient);

}  // namespace foresee
