#pragma once

#include <string>

#include "core/dataset.hpp"
#include "core/geometry.hpp"
#include "core/model.hpp"

namespace hypcbc::exporter {

// Writes <out_stem>.csv with one (x,y,class,domain) row per sample of the
// split, plus <out_stem>.disk.json holding the same points and a unit-circle
// polyline for disk rendering. The model must have a 2-d hyperbolic branch
// (the bottleneck branch for two-branch models). Output bytes are
// deterministic for a fixed checkpoint.
void export_disk_embeddings(const model::ModelParams& params,
                            const data::EmbeddingDataset& ds,
                            data::SplitTag split, const std::string& out_stem);

// Four-panel toy comparison of decision boundaries, written as one JSON file:
//   hyperbolic_disk    - gyroplane through `p` with normal `a`, sampled as a
//                        geodesic arc, plus two synthetic clusters
//   hyperbolic_tangent - the same arc and clusters under log_map at 0
//   euclidean_tangent  - a straight separator for the same cluster layout
//   euclidean_disk     - that separator and clusters under exp_map at 0
struct BoundaryToySpec {
  geom::Vec p{0.25, 0.1};   // gyroplane offset point
  geom::Vec normal{0.8, -0.5};
  double curvature = 1.0;
  size_t boundary_samples = 201;
  size_t cluster_samples = 80;  // per side
  uint64_t seed = 0;
};

void export_boundary_toy(const BoundaryToySpec& spec,
                         const std::string& out_path);

}  // namespace hypcbc::exporter
