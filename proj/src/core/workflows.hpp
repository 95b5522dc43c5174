#pragma once

#include <optional>
#include <string>

#include "core/dataset.hpp"
#include "core/model.hpp"

namespace hypcbc::workflows {

// Probe request: which embedding layer to probe, what to predict, and the
// probe's own hyperparameters. JSON schema in docs/formats.md.
struct ProbeRequest {
  std::string kind = "linear";     // linear | mlp
  std::string target = "class";    // class | domain
  std::string layer = "backbone";  // backbone | premap | postmap
  int branch = 1;
  std::string split = "train";     // train | val | test | all
  int epochs = 50;
  double lr = 1e-4;
  size_t hidden = 64;
  uint64_t seed = 0;

  static ProbeRequest from_json(const std::string& text);
};

// Fits the probe on frozen embeddings and returns a MetricsReport JSON.
// `params` may be null only for layer == "backbone".
std::string run_probe_command(const model::ModelParams* params,
                              const data::EmbeddingDataset& ds,
                              const ProbeRequest& request);

// Local k-NN label entropy of the model's hyperbolic embeddings on one
// split, per class labeling and (when present) domain labeling.
std::string run_entropy_command(const model::ModelParams& params,
                                const data::EmbeddingDataset& ds,
                                const std::string& split, size_t k);

}  // namespace hypcbc::workflows
