#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "core/tensor.hpp"

namespace hypcbc::ad {

// Handle to a tape slot.
struct Var {
  uint32_t id = 0;
};

// Reverse-mode tape over Tensor-valued primitives.
//
// Forward evaluation is eager: every op computes its value immediately and
// records a backward closure. backward() replays the closures in reverse
// order, accumulating gradients into each slot. One tape = one forward pass;
// distinct tapes are independent.
//
// Arithmetic order inside each primitive is fixed (sequential accumulation in
// index order) and is part of the determinism contract; independent oracles
// can reproduce forward values bit-for-bit.
//
// Binary ops accept operands of identical shape, or one operand of size 1
// which broadcasts as a scalar.
class Tape {
 public:
  Var input(Tensor value, bool requires_grad);
  Var constant(Tensor value) { return input(std::move(value), false); }
  Var param(Tensor value) { return input(std::move(value), true); }

  const Tensor& value(Var v) const { return slots_[v.id].value; }
  const Tensor& grad(Var v) const { return slots_[v.id].grad; }
  bool requires_grad(Var v) const { return slots_[v.id].requires_grad; }

  // Elementwise / broadcasting arithmetic.
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);
  Var div(Var a, Var b);
  Var neg(Var a);
  Var recip(Var a);
  Var add_const(Var a, double k);
  Var scale_const(Var a, double k);

  // Elementwise nonlinearities.
  Var tanh(Var a);
  Var arctanh(Var a);
  Var arcsinh(Var a);
  Var relu(Var a);
  // tanh(k*x)/(k*x) with the x = 0 limit handled exactly (value 1, slope 0).
  Var tanh_ratio(Var a, double k);
  // min(1, r/x): feature-clipping scale for a column of row norms.
  Var clip_scale(Var a, double r);

  // Row-structured ops over {B, D} tensors.
  Var rownorm(Var a);             // {B,D} -> {B,1}
  Var rownormsq(Var a);           // {B,D} -> {B,1}
  Var rowdot(Var a, Var b);       // {B,D},{B,D} -> {B,1}
  Var rowsum(Var a);              // {B,D} -> {B,1}
  Var rowscale(Var a, Var s);     // {B,D},{B,1} -> {B,D}
  Var broadcast_rows(Var v, size_t n);  // {1,D} -> {n,D}
  Var row(Var m, size_t index);   // {K,D} -> {1,D}
  Var concat_cols(const std::vector<Var>& cols);  // k x {B,1} -> {B,k}

  // Affine map: X {B,N}, W {D,N}, b {D} -> {B,D}.
  Var linear(Var x, Var w, Var b);

  // Softmax family (row-wise, with max subtraction).
  Var softmax_rows(Var a);
  Var log_softmax_rows(Var a);
  // Mean over the batch of -log softmax(logits)[label].
  Var cross_entropy_mean(Var logits, const std::vector<int>& labels);

  Var sum_all(Var a);
  Var mean_all(Var a);

  // Identity value, zero gradient to the input.
  Var detach(Var a);

  // Accumulates gradients of `output` w.r.t. every grad-requiring slot.
  void backward(Var output, const Tensor& seed);
  void backward(Var scalar_output);  // seed = 1, output must be scalar
  void zero_grad();

  size_t num_slots() const { return slots_.size(); }

 private:
  struct Slot {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
  };
  struct Node {
    std::function<void(Tape&)> backward;
  };

  Var emplace(Tensor value, bool requires_grad);
  void record(std::function<void(Tape&)> fn) {
    nodes_.push_back(Node{std::move(fn)});
  }
  Tensor& grad_ref(Var v) { return slots_[v.id].grad; }

  Var binary(Var a, Var b, int op);

  std::vector<Slot> slots_;
  std::vector<Node> nodes_;
};

// Convenience wrapper matching the (graph_fn, inputs) -> (output, tape) shape.
struct ForwardResult {
  Tensor output;
  Tape tape;
  Var output_var;
  std::vector<Var> input_vars;
};
ForwardResult forward(
    const std::function<Var(Tape&, const std::vector<Var>&)>& graph_fn,
    const std::vector<Tensor>& inputs);

// Central finite-difference verification of a scalar-valued graph.
// Per-parameter step h = 1e-6 * max(1, |theta|); relative deviation is
// |analytic - numeric| / max(|analytic|, |numeric|, 1e-3).
struct GradCheckReport {
  double max_rel_err = 0.0;
  size_t n_checked = 0;
  bool pass = false;
};
GradCheckReport grad_check(
    const std::function<Var(Tape&, const std::vector<Var>&)>& fn,
    const std::vector<Tensor>& point, double tolerance);

}  // namespace hypcbc::ad
