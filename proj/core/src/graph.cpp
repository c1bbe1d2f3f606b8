#include "foresee/graph.hpp"

#include <algorithm>
#include <map>

namespace foresee {

int ScaleGraph::degree(int node) const {
  int d = 0;
  for (int j = 0; j < adjacency.cols(); ++j) d += (int)adjacency(node, j);
  return d;
}

ScaleGraph build_grid_graph(Mat features, std::vector<std::pair<int, int>> coords,
                            Scale scale) {
  int o = features.rows();
  if (o < 1) throw ValidationError("build_grid_graph: at least one node required");
  if ((int)coords.size() != o)
    throw ShapeError("build_grid_graph: feature rows (" + std::to_string(o) +
                          ") != coordinate count (" + std::to_string(coords.size()) + ")");
  std::map<std::pair<int, int>, int> by_coord;
  for (int i = 0; i < o; ++i) {
    if (!by_coord.emplace(coords[i], i).second)
      throw ValidationError("build_grid_graph: duplicate coordinate (" +
                            std::to_string(coords[i].first) + "," +
                            std::to_string(coords[i].second) + ")");
  }

  ScaleGraph g;
  g.node_features = std::move(features);
  g.coords = std::move(coords);
  g.scale = scale;
  g.adjacency = Mat(o, o);
  for (int i = 0; i < o; ++i) {
    auto [r, c] = g.coords[i];
    for (int dr = -1; dr <= 1; ++dr) {
      for (int dc = -1; dc <= 1; ++dc) {
        if (dr == 0 && dc == 0) continue;
        auto it = by_coord.find({r + dr, c + dc});
        if (it == by_coord.end()) continue;
        int j = it->second;
        g.adjacency(i, j) = 1.0;
        if (i < j) g.edges.emplace_back(i, j);
      }
    }
  }
  std::sort(g.edges.begin(), g.edges.end());
  return g;
}

std::array<ScaleGraph, 3> build_multiscale(const PatientRecord& patient) {
  std::array<ScaleGraph, 3> out;
  for (Scale s : {Scale::Small, Scale::Medium, Scale::Large}) {
    const auto& grid = patient.grid(s);
    out[(int)s] = build_grid_graph(grid.features, grid.coords, s);
  }
  return out;
}

}  // namespace foresee
