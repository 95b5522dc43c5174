#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/autodiff.hpp"
#include "core/tensor.hpp"

namespace hypcbc::model {

enum class Method { Erm, HypErm, HypCbc };

Method method_from_string(const std::string& s);
std::string method_to_string(Method m);

// KL weight and softening temperature of the consistency loss.
struct LossWeights {
  double lambda = 0.2;
  double temperature = 3.0;
};

struct Dims {
  size_t input_dim = 0;
  size_t d1 = 128;
  size_t d2 = 2;
  size_t num_classes = 0;
};

// All trainable tensors for one model. Heads are W {d,n} / b {d}; the
// hyperbolic MLR holds per-class offsets p {K,d} and normals a {K,d}; the
// Euclidean classifier is an affine {K,d1} / {K} pair.
struct ModelParams {
  Method method = Method::HypCbc;
  Dims dims;
  double curvature = 1.0;
  double clip_radius = 1.0;

  ad::Tensor head1_w, head1_b;
  ad::Tensor head2_w, head2_b;  // HypCbc only
  ad::Tensor mlr1_p, mlr1_a;    // HypErm / HypCbc
  ad::Tensor mlr2_p, mlr2_a;    // HypCbc only
  ad::Tensor cls_w, cls_b;      // Erm only

  // Trainable tensors in fixed order, paired with stable names.
  std::vector<std::pair<std::string, ad::Tensor*>> named_tensors();
  std::vector<std::pair<std::string, const ad::Tensor*>> named_tensors() const;
};

// Deterministic init: projection weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in))
// drawn from per-tensor streams of `seed`, biases zero, MLR offsets at the
// origin, MLR normals from the same uniform scheme. ERM and HypERM share the
// branch-1 projection draw for a given seed.
ModelParams init_params(uint64_t seed, Method method, Dims dims,
                        double curvature, double clip_radius);

// Tape-bound handles for one forward/backward pass.
struct ParamVars {
  std::vector<std::pair<std::string, ad::Var>> vars;
  ad::Var get(const std::string& name) const;
};
ParamVars bind_params(ad::Tape& tape, const ModelParams& params);

struct BranchVars {
  ad::Var pre_map;   // clipped Euclidean projection {B,d}
  ad::Var embedded;  // ball embedding {B,d} (= pre_map for the ERM branch)
  ad::Var logits;    // {B,K}
};

// f -> head -> clip -> exp_map0 -> hyperbolic MLR.
BranchVars forward_hyp_branch(ad::Tape& tape, ad::Var features, ad::Var w,
                              ad::Var b, ad::Var mlr_p, ad::Var mlr_a,
                              double curvature, double clip_radius);

// f -> head -> affine classifier (the Euclidean control branch).
BranchVars forward_erm_branch(ad::Tape& tape, ad::Var features, ad::Var w,
                              ad::Var b, ad::Var cls_w, ad::Var cls_b);

// Temperature-scaled consistency: T^2 * KL(softmax(y2/T) || softmax(y1/T)),
// batch mean. y2 is the target branch; detached by default.
ad::Var kl_consistency(ad::Tape& tape, ad::Var y1, ad::Var y2,
                       double temperature, bool detach_target = true);

struct ForwardOutput {
  BranchVars branch1;
  BranchVars branch2;  // valid only for HypCbc
  ad::Var loss;
};

// Full per-batch graph: branch forwards plus the training objective
// CE(y1) [+ CE(y2) + lambda * KL] depending on the method.
ForwardOutput forward_with_loss(ad::Tape& tape, const ModelParams& params,
                                const ParamVars& vars, ad::Var features,
                                const std::vector<int>& labels,
                                const LossWeights& weights,
                                bool detach_kl_target = true);

// --- Eager (tape-free) operations -----------------------------------------

// Row-wise softmax of logits/T; rows sum to 1.
ad::Tensor softmax_with_temperature(const ad::Tensor& logits, double temperature);

// Mean over the batch of -log softmax(logits)[label].
double ce_loss(const ad::Tensor& logits, const std::vector<int>& labels);

// Eager value of the consistency loss (same reduction as the tape version).
double kl_consistency_value(const ad::Tensor& y1, const ad::Tensor& y2,
                            double temperature);

// Row-wise argmax; ties break to the lowest class index.
std::vector<int> predict(const ad::Tensor& logits);

// Eager forward of branch-1 logits for evaluation (no gradients).
ad::Tensor eval_branch1_logits(const ModelParams& params,
                               const ad::Tensor& features);
// Eager forward of a chosen representation layer ("premap" | "postmap"),
// branch index 1 or 2.
ad::Tensor eval_embedding(const ModelParams& params, const ad::Tensor& features,
                          int branch, const std::string& layer);

}  // namespace hypcbc::model
