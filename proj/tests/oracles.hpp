#pragma once

// Test-only reference implementations, written directly from the closed-form
// definitions and kept independent of src/core/. Unit and acceptance tests
// compare the production code against these.

#include <cstdint>
#include <vector>

#include "core/tensor.hpp"

namespace oracle {

using Vec = std::vector<double>;

// Poincare-ball primitives (64-bit, no guards).
double conformal_factor(const Vec& x, double c);
Vec mobius_add(const Vec& x, const Vec& y, double c);
double dist(const Vec& x, const Vec& y, double c);
Vec exp_map(const Vec& base, const Vec& v, double c);
Vec log_map(const Vec& base, const Vec& y, double c);

// Eager recomputation of the model forward pass. Mirrors the documented
// primitive-by-primitive arithmetic order of the production graph, with no
// shared code, so values must agree bit-for-bit.
struct MlrClass {
  Vec p;
  Vec a;
};
struct BranchSpec {
  std::vector<Vec> weight;  // d rows of n entries
  Vec bias;
  std::vector<MlrClass> classes;
  double curvature = 1.0;
  double clip_radius = 1.0;
};

// One branch: rows of logits for a batch of feature rows.
std::vector<Vec> branch_logits(const BranchSpec& spec,
                               const std::vector<Vec>& features);

double ce_mean(const std::vector<Vec>& logits, const std::vector<int>& labels);
double kl_consistency(const std::vector<Vec>& y1, const std::vector<Vec>& y2,
                      double temperature);
double total_loss(const BranchSpec& b1, const BranchSpec& b2,
                  const std::vector<Vec>& features,
                  const std::vector<int>& labels, double lambda,
                  double temperature);

// Exhaustive pair-counting macro one-vs-rest AUC with 0.5 credit for ties.
double auc_macro_paircount(const hypcbc::ad::Tensor& scores,
                           const std::vector<int>& labels);

// O(n^2) brute-force mean local k-NN entropy, ln-normalized.
double knn_entropy_bruteforce(const std::vector<Vec>& points, double curvature,
                              const std::vector<int>& labels, size_t k);

}  // namespace oracle
