#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/tensor.hpp"

namespace hypcbc::metrics {

struct MetricsReport {
  double accuracy = 0.0;
  double auc_macro = 0.0;
  std::vector<double> per_class_auc;  // NaN for skipped classes
  std::vector<int> skipped_classes;
  double loss = 0.0;
  std::string split;
  uint64_t seed = 0;

  std::string to_json() const;
};

// Fraction of correct predictions.
double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

// Macro one-vs-rest ROC AUC via the rank statistic with average-rank tie
// handling. Classes with zero positives or zero negatives are skipped (with a
// note in `skipped`); all skipped is an error.
double auc_macro(const ad::Tensor& scores, const std::vector<int>& labels,
                 std::vector<double>* per_class = nullptr,
                 std::vector<int>* skipped = nullptr);

// Binary-style AUC of one score column (used by the OvR loop and tests).
double auc_binary(const std::vector<double>& score,
                  const std::vector<char>& is_positive);

struct ProbeConfig {
  enum class Kind { Linear, Mlp };
  Kind kind = Kind::Linear;
  int epochs = 50;
  double lr = 1e-4;
  size_t hidden = 64;  // MLP only; the probe MLP has exactly two layers
  size_t batch_size = 64;
  double weight_decay = 0.01;
};

// Trains a probe on frozen embeddings over its own seeded 80/20 stratified
// split and reports held-out accuracy/AUC.
MetricsReport run_probe(const ad::Tensor& embeddings,
                        const std::vector<int>& targets,
                        const ProbeConfig& cfg, uint64_t seed);

struct EntropyReport {
  size_t k = 15;
  double mean_entropy = 0.0;  // normalized by ln(#distinct labels)
};

// Average local k-NN label entropy under the hyperbolic distance.
// Exact O(n^2) distances; neighbor ties break on the smaller index.
EntropyReport knn_entropy(const std::vector<std::vector<double>>& points,
                          double curvature, const std::vector<int>& labels,
                          size_t k);

}  // namespace hypcbc::metrics
