#include "core/model.hpp"

#include <cmath>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace hypcbc::model {

using ad::Tape;
using ad::Tensor;
using ad::Var;

Method method_from_string(const std::string& s) {
  if (s == "erm") return Method::Erm;
  if (s == "hyperm") return Method::HypErm;
  if (s == "hypcbc") return Method::HypCbc;
  throw_config("unknown method '" + s + "' (expected erm|hyperm|hypcbc)");
}

std::string method_to_string(Method m) {
  switch (m) {
    case Method::Erm: return "erm";
    case Method::HypErm: return "hyperm";
    default: return "hypcbc";
  }
}

std::vector<std::pair<std::string, ad::Tensor*>> ModelParams::named_tensors() {
  std::vector<std::pair<std::string, ad::Tensor*>> out;
  out.emplace_back("head1.weight", &head1_w);
  out.emplace_back("head1.bias", &head1_b);
  if (method == Method::Erm) {
    out.emplace_back("cls.weight", &cls_w);
    out.emplace_back("cls.bias", &cls_b);
  } else {
    out.emplace_back("mlr1.p", &mlr1_p);
    out.emplace_back("mlr1.a", &mlr1_a);
  }
  if (method == Method::HypCbc) {
    out.emplace_back("head2.weight", &head2_w);
    out.emplace_back("head2.bias", &head2_b);
    out.emplace_back("mlr2.p", &mlr2_p);
    out.emplace_back("mlr2.a", &mlr2_a);
  }
  return out;
}

std::vector<std::pair<std::string, const ad::Tensor*>> ModelParams::named_tensors()
    const {
  auto mutable_list = const_cast<ModelParams*>(this)->named_tensors();
  std::vector<std::pair<std::string, const ad::Tensor*>> out;
  out.reserve(mutable_list.size());
  for (auto& [name, ptr] : mutable_list) out.emplace_back(name, ptr);
  return out;
}

namespace {

Tensor uniform_matrix(Rng& rng, size_t rows, size_t cols, size_t fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  Tensor t = Tensor::zeros({rows, cols});
  for (double& v : t.values) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

ModelParams init_params(uint64_t seed, Method method, Dims dims,
                        double curvature, double clip_radius) {
  if (dims.input_dim == 0 || dims.num_classes < 2)
    throw_config("init_params: need input_dim > 0 and num_classes >= 2");
  if (dims.d1 < 1) throw_config("init_params: d1 must be >= 1");
  if (method == Method::HypCbc && dims.d2 < 1)
    throw_config("init_params: hypcbc requires d2 >= 1");

  ModelParams p;
  p.method = method;
  p.dims = dims;
  p.curvature = curvature;
  p.clip_radius = clip_radius;

  {
    Rng rng(seed, "init.head1");
    p.head1_w = uniform_matrix(rng, dims.d1, dims.input_dim, dims.input_dim);
    p.head1_b = Tensor::zeros({dims.d1});
  }
  if (method == Method::Erm) {
    Rng rng(seed, "init.cls");
    p.cls_w = uniform_matrix(rng, dims.num_classes, dims.d1, dims.d1);
    p.cls_b = Tensor::zeros({dims.num_classes});
  } else {
    Rng rng(seed, "init.mlr1");
    p.mlr1_p = Tensor::zeros({dims.num_classes, dims.d1});
    p.mlr1_a = uniform_matrix(rng, dims.num_classes, dims.d1, dims.d1);
  }
  if (method == Method::HypCbc) {
    {
      Rng rng(seed, "init.head2");
      p.head2_w = uniform_matrix(rng, dims.d2, dims.input_dim, dims.input_dim);
      p.head2_b = Tensor::zeros({dims.d2});
    }
    Rng rng(seed, "init.mlr2");
    p.mlr2_p = Tensor::zeros({dims.num_classes, dims.d2});
    p.mlr2_a = uniform_matrix(rng, dims.num_classes, dims.d2, dims.d2);
  }
  return p;
}

Var ParamVars::get(const std::string& name) const {
  for (const auto& [n, v] : vars)
    if (n == name) return v;
  throw_usage("unknown parameter '" + name + "'");
}

ParamVars bind_params(Tape& tape, const ModelParams& params) {
  ParamVars pv;
  for (const auto& [name, tensor] : params.named_tensors())
    pv.vars.emplace_back(name, tape.param(*tensor));
  return pv;
}

namespace {

// z = exp_map0(clip(h, r)): h scaled by min(1, r/|h|), then by
// tanh(sqrt(c)|.|)/(sqrt(c)|.|).
Var exp_map0_rows(Tape& t, Var h, double curvature) {
  const double sq = std::sqrt(curvature);
  return t.rowscale(h, t.tanh_ratio(t.rownorm(h), sq));
}

Var clip_rows(Tape& t, Var h, double radius) {
  return t.rowscale(h, t.clip_scale(t.rownorm(h), radius));
}

// Gyroplane logits: per class k,
//   w    = (-p_k) (+) z                      (Mobius addition, row-wise)
//   arg  = 2 sqrt(c) <w, a_k> / ((1 - c|w|^2) |a_k|)
//   y_k  = (2/sqrt(c)) * lambda_{p_k} * |a_k| * asinh(arg)
Var mobius_add_rows(Tape& t, Var x, Var y, double c) {
  const Var xy = t.rowdot(x, y);
  const Var x2 = t.rownormsq(x);
  const Var y2 = t.rownormsq(y);
  const Var coef_x =
      t.add_const(t.add(t.scale_const(xy, 2.0 * c), t.scale_const(y2, c)), 1.0);
  const Var coef_y = t.add_const(t.scale_const(x2, -c), 1.0);
  const Var den = t.add_const(
      t.add(t.scale_const(xy, 2.0 * c), t.scale_const(t.mul(x2, y2), c * c)),
      1.0);
  const Var num = t.add(t.rowscale(x, coef_x), t.rowscale(y, coef_y));
  return t.rowscale(num, t.recip(den));
}

Var mlr_logits(Tape& t, Var z, Var mlr_p, Var mlr_a, double c) {
  const size_t num_classes = t.value(mlr_p).rows();
  const size_t batch = t.value(z).rows();
  const double sq = std::sqrt(c);
  std::vector<Var> cols;
  cols.reserve(num_classes);
  for (size_t k = 0; k < num_classes; ++k) {
    const Var pk = t.row(mlr_p, k);
    const Var ak = t.row(mlr_a, k);
    const Var w = mobius_add_rows(t, t.broadcast_rows(t.neg(pk), batch), z, c);
    const Var dot = t.rowdot(w, t.broadcast_rows(ak, batch));
    const Var wn2 = t.rownormsq(w);
    const Var an = t.rownorm(ak);                       // {1,1}
    const Var pn2 = t.rownormsq(pk);                    // {1,1}
    const Var lam =
        t.scale_const(t.recip(t.add_const(t.scale_const(pn2, -c), 1.0)), 2.0);
    const Var den = t.mul(t.add_const(t.scale_const(wn2, -c), 1.0), an);
    const Var arg = t.div(t.scale_const(dot, 2.0 * sq), den);
    const Var logit =
        t.scale_const(t.mul(t.mul(lam, an), t.arcsinh(arg)), 2.0 / sq);
    cols.push_back(logit);
  }
  return t.concat_cols(cols);
}

}  // namespace

BranchVars forward_hyp_branch(Tape& tape, Var features, Var w, Var b,
                              Var mlr_p, Var mlr_a, double curvature,
                              double clip_radius) {
  BranchVars out;
  const Var h = tape.linear(features, w, b);
  out.pre_map = clip_rows(tape, h, clip_radius);
  out.embedded = exp_map0_rows(tape, out.pre_map, curvature);
  out.logits = mlr_logits(tape, out.embedded, mlr_p, mlr_a, curvature);
  return out;
}

BranchVars forward_erm_branch(Tape& tape, Var features, Var w, Var b,
                              Var cls_w, Var cls_b) {
  BranchVars out;
  out.pre_map = tape.linear(features, w, b);
  out.embedded = out.pre_map;
  out.logits = tape.linear(out.pre_map, cls_w, cls_b);
  return out;
}

Var kl_consistency(Tape& t, Var y1, Var y2, double temperature,
                   bool detach_target) {
  if (!t.value(y1).same_shape(t.value(y2)))
    throw_usage("kl_consistency: logit shapes differ");
  if (!(temperature > 0.0)) throw_config("temperature must be positive");
  const Var target = detach_target ? t.detach(y2) : y2;
  const double inv_t = 1.0 / temperature;
  const Var soft_t = t.scale_const(target, inv_t);
  const Var p2 = t.softmax_rows(soft_t);
  const Var lp2 = t.log_softmax_rows(soft_t);
  const Var lp1 = t.log_softmax_rows(t.scale_const(y1, inv_t));
  const Var per_row = t.rowsum(t.mul(p2, t.sub(lp2, lp1)));
  return t.scale_const(t.mean_all(per_row), temperature * temperature);
}

ForwardOutput forward_with_loss(Tape& tape, const ModelParams& params,
                                const ParamVars& vars, Var features,
                                const std::vector<int>& labels,
                                const LossWeights& weights,
                                bool detach_kl_target) {
  ForwardOutput out;
  if (params.method == Method::Erm) {
    out.branch1 = forward_erm_branch(tape, features, vars.get("head1.weight"),
                                     vars.get("head1.bias"),
                                     vars.get("cls.weight"),
                                     vars.get("cls.bias"));
    out.loss = tape.cross_entropy_mean(out.branch1.logits, labels);
    return out;
  }
  out.branch1 = forward_hyp_branch(
      tape, features, vars.get("head1.weight"), vars.get("head1.bias"),
      vars.get("mlr1.p"), vars.get("mlr1.a"), params.curvature,
      params.clip_radius);
  if (params.method == Method::HypErm) {
    out.loss = tape.cross_entropy_mean(out.branch1.logits, labels);
    return out;
  }
  out.branch2 = forward_hyp_branch(
      tape, features, vars.get("head2.weight"), vars.get("head2.bias"),
      vars.get("mlr2.p"), vars.get("mlr2.a"), params.curvature,
      params.clip_radius);
  const Var ce1 = tape.cross_entropy_mean(out.branch1.logits, labels);
  const Var ce2 = tape.cross_entropy_mean(out.branch2.logits, labels);
  const Var kl = kl_consistency(tape, out.branch1.logits, out.branch2.logits,
                                weights.temperature, detach_kl_target);
  out.loss =
      tape.add(tape.add(ce1, ce2), tape.scale_const(kl, weights.lambda));
  return out;
}

Tensor softmax_with_temperature(const Tensor& logits, double temperature) {
  if (!(temperature > 0.0)) throw_config("temperature must be positive");
  const size_t rows = logits.rows(), cols = logits.cols();
  Tensor out = Tensor::zeros(logits.shape);
  for (size_t i = 0; i < rows; ++i) {
    double m = logits.at(i, 0) / temperature;
    for (size_t j = 1; j < cols; ++j)
      m = std::max(m, logits.at(i, j) / temperature);
    double s = 0.0;
    for (size_t j = 0; j < cols; ++j) {
      out.at(i, j) = std::exp(logits.at(i, j) / temperature - m);
      s += out.at(i, j);
    }
    for (size_t j = 0; j < cols; ++j) out.at(i, j) /= s;
  }
  return out;
}

double ce_loss(const Tensor& logits, const std::vector<int>& labels) {
  Tape t;
  const Var l = t.constant(logits);
  return t.value(t.cross_entropy_mean(l, labels)).values[0];
}

double kl_consistency_value(const Tensor& y1, const Tensor& y2,
                            double temperature) {
  Tape t;
  const Var v1 = t.constant(y1);
  const Var v2 = t.constant(y2);
  return t.value(kl_consistency(t, v1, v2, temperature, true)).values[0];
}

std::vector<int> predict(const Tensor& logits) {
  std::vector<int> out(logits.rows());
  for (size_t i = 0; i < logits.rows(); ++i) {
    size_t best = 0;
    for (size_t j = 1; j < logits.cols(); ++j)
      if (logits.at(i, j) > logits.at(i, best)) best = j;
    out[i] = static_cast<int>(best);
  }
  return out;
}

Tensor eval_branch1_logits(const ModelParams& params, const Tensor& features) {
  Tape tape;
  const ParamVars vars = bind_params(tape, params);
  const Var f = tape.constant(features);
  if (params.method == Method::Erm) {
    const BranchVars b = forward_erm_branch(
        tape, f, vars.get("head1.weight"), vars.get("head1.bias"),
        vars.get("cls.weight"), vars.get("cls.bias"));
    return tape.value(b.logits);
  }
  const BranchVars b = forward_hyp_branch(
      tape, f, vars.get("head1.weight"), vars.get("head1.bias"),
      vars.get("mlr1.p"), vars.get("mlr1.a"), params.curvature,
      params.clip_radius);
  return tape.value(b.logits);
}

Tensor eval_embedding(const ModelParams& params, const Tensor& features,
                      int branch, const std::string& layer) {
  if (layer != "premap" && layer != "postmap")
    throw_config("unknown embedding layer '" + layer + "'");
  if (branch != 1 && branch != 2) throw_config("branch must be 1 or 2");
  if (branch == 2 && params.method != Method::HypCbc)
    throw_config("model has no second branch");

  Tape tape;
  const ParamVars vars = bind_params(tape, params);
  const Var f = tape.constant(features);
  BranchVars b;
  if (params.method == Method::Erm) {
    b = forward_erm_branch(tape, f, vars.get("head1.weight"),
                           vars.get("head1.bias"), vars.get("cls.weight"),
                           vars.get("cls.bias"));
    if (layer == "postmap")
      throw_config("erm model has no hyperbolic (postmap) embedding");
  } else if (branch == 1) {
    b = forward_hyp_branch(tape, f, vars.get("head1.weight"),
                           vars.get("head1.bias"), vars.get("mlr1.p"),
                           vars.get("mlr1.a"), params.curvature,
                           params.clip_radius);
  } else {
    b = forward_hyp_branch(tape, f, vars.get("head2.weight"),
                           vars.get("head2.bias"), vars.get("mlr2.p"),
                           vars.get("mlr2.a"), params.curvature,
                           params.clip_radius);
  }
  return tape.value(layer == "premap" ? b.pre_map : b.embedded);
}

}  // namespace hypcbc::model
