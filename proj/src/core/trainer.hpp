#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/checkpoint.hpp"
#include "core/dataset.hpp"
#include "core/geometry.hpp"
#include "core/metrics.hpp"
#include "core/model.hpp"
#include "core/optimizer.hpp"

namespace hypcbc::train {

inline constexpr const char* kBuildName = "hypcbc";
inline constexpr const char* kBuildVersion = "0.1.0";

// Hyperparameters with the published defaults. JSON keys are the kebab-case
// flag names (docs/formats.md).
struct TrainConfig {
  model::Method method = model::Method::HypCbc;
  size_t d1 = 128;
  size_t d2 = 2;
  double curvature = 1.0;
  double clip_radius = 1.0;
  double temperature = 3.0;
  double lambda = 0.2;
  double lr = 1e-4;
  double min_lr = 0.0;
  double weight_decay = 0.01;
  size_t batch_size = 64;
  int patience = 10;
  int max_epochs = 100;
  uint64_t seed = 0;
  std::string split = "default";
  bool detach_kl_target = true;

  static TrainConfig from_json(const std::string& text);
  std::string to_json() const;
  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_metric = 0.0;
  double lr = 0.0;
};

struct TrainResult {
  ckpt::Checkpoint checkpoint;
  std::string manifest_json;
  int best_epoch = 0;
  double best_val_metric = 0.0;
  bool stopped_early = false;
  std::vector<EpochRecord> epochs;
  metrics::MetricsReport test_report;
};

// Full training loop: shuffled batches -> loss -> backward -> AdamW with
// cosine-annealed lr -> per-epoch validation -> early stopping. The best
// epoch's parameters (f32-quantized, exactly what the checkpoint holds) are
// what the manifest metrics refer to.
TrainResult train(const TrainConfig& config, const data::EmbeddingDataset& ds,
                  const std::string& dataset_path);

// Runs train() and writes <out_dir>/checkpoint.hckp + <out_dir>/manifest.json.
std::string train_to_dir(const TrainConfig& config,
                         const std::string& dataset_dir,
                         const std::string& out_dir);

// Checkpoint <-> parameters (model tensors + optimizer moments).
ckpt::Checkpoint to_checkpoint(const model::ModelParams& params,
                               const TrainConfig& config,
                               const opt::AdamW* optimizer = nullptr);
model::ModelParams params_from_checkpoint(const ckpt::Checkpoint& c,
                                          TrainConfig* config_out = nullptr);

// Accuracy + macro AUC + CE loss of branch-1 logits on one split.
metrics::MetricsReport evaluate(const model::ModelParams& params,
                                const data::EmbeddingDataset& ds,
                                data::SplitTag split, uint64_t seed);

// --- sweep -------------------------------------------------------------------

struct SweepCell {
  std::string cell_id;
  std::string config_json;      // resolved cell config (seed excluded)
  std::vector<uint64_t> seeds;
  std::vector<double> test_auc;   // per completed seed
  std::vector<double> test_accuracy;
  std::vector<double> val_metric;
  std::vector<std::string> errors;  // per failed seed: "seed=N: message"
  double mean_auc = 0.0;
  double std_auc = 0.0;  // sample std (n-1)
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::string table_json;
  std::string table_csv;
};

// Cross product of `grid_json` ({"lambda": [0.1, 0.2], "d2": [2, 8], ...})
// over the base config, each cell trained on every seed. Failures are
// recorded and the sweep continues. Cells run on `jobs` worker threads;
// results are keyed by cell id so aggregation is order-independent.
SweepResult sweep(const std::string& grid_json, const TrainConfig& base,
                  const data::EmbeddingDataset& ds,
                  const std::string& dataset_path,
                  const std::vector<uint64_t>& seeds, int jobs = 1);

// Writes sweep_results.csv and sweep_summary.json under out_dir.
void write_sweep_outputs(const SweepResult& result, const std::string& out_dir);

double sample_std(const std::vector<double>& xs);

}  // namespace hypcbc::train
