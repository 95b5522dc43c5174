#include "core/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "core/error.hpp"

namespace hypcbc::ad {

namespace {

void accumulate(Tensor& g, const Tensor& delta) {
  for (size_t i = 0; i < g.values.size(); ++i) g.values[i] += delta.values[i];
}

}  // namespace

Var Tape::emplace(Tensor value, bool requires_grad) {
  Slot slot;
  slot.grad = Tensor::zeros(value.shape);
  slot.value = std::move(value);
  slot.requires_grad = requires_grad;
  slots_.push_back(std::move(slot));
  return Var{static_cast<uint32_t>(slots_.size() - 1)};
}

Var Tape::input(Tensor value, bool requires_grad) {
  return emplace(std::move(value), requires_grad);
}

// op: 0 add, 1 sub, 2 mul, 3 div
Var Tape::binary(Var a, Var b, int op) {
  const Tensor& ta = value(a);
  const Tensor& tb = value(b);
  const bool a_scalar = ta.is_scalar();
  const bool b_scalar = tb.is_scalar();
  if (!a_scalar && !b_scalar && !ta.same_shape(tb))
    throw_usage("binary op shape mismatch");

  const Tensor& big = a_scalar ? tb : ta;
  Tensor out = Tensor::zeros(big.shape);
  const size_t n = out.size();
  for (size_t i = 0; i < n; ++i) {
    const double x = ta.values[a_scalar ? 0 : i];
    const double y = tb.values[b_scalar ? 0 : i];
    switch (op) {
      case 0: out.values[i] = x + y; break;
      case 1: out.values[i] = x - y; break;
      case 2: out.values[i] = x * y; break;
      default: out.values[i] = x / y; break;
    }
  }
  Var r = emplace(std::move(out), requires_grad(a) || requires_grad(b));
  record([a, b, r, op, a_scalar, b_scalar, n](Tape& t) {
    const Tensor& g = t.grad_ref(r);
    const Tensor& ta2 = t.value(a);
    const Tensor& tb2 = t.value(b);
    Tensor& ga = t.grad_ref(a);
    Tensor& gb = t.grad_ref(b);
    for (size_t i = 0; i < n; ++i) {
      const double gi = g.values[i];
      const double x = ta2.values[a_scalar ? 0 : i];
      const double y = tb2.values[b_scalar ? 0 : i];
      double da = 0.0, db = 0.0;
      switch (op) {
        case 0: da = gi; db = gi; break;
        case 1: da = gi; db = -gi; break;
        case 2: da = gi * y; db = gi * x; break;
        default: da = gi / y; db = -gi * x / (y * y); break;
      }
      if (t.requires_grad(a)) ga.values[a_scalar ? 0 : i] += da;
      if (t.requires_grad(b)) gb.values[b_scalar ? 0 : i] += db;
    }
  });
  return r;
}

Var Tape::add(Var a, Var b) { return binary(a, b, 0); }
Var Tape::sub(Var a, Var b) { return binary(a, b, 1); }
Var Tape::mul(Var a, Var b) { return binary(a, b, 2); }
Var Tape::div(Var a, Var b) { return binary(a, b, 3); }

Var Tape::neg(Var a) {
  Tensor out = value(a);
  for (double& v : out.values) v = -v;
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < g.values.size(); ++i) ga.values[i] -= g.values[i];
  });
  return r;
}

Var Tape::recip(Var a) {
  Tensor out = value(a);
  for (double& v : out.values) v = 1.0 / v;
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    const Tensor& y = t.value(r);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < g.values.size(); ++i)
      ga.values[i] += -g.values[i] * y.values[i] * y.values[i];
  });
  return r;
}

Var Tape::add_const(Var a, double k) {
  Tensor out = value(a);
  for (double& v : out.values) v += k;
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r](Tape& t) {
    if (!t.requires_grad(a)) return;
    accumulate(t.grad_ref(a), t.grad_ref(r));
  });
  return r;
}

Var Tape::scale_const(Var a, double k) {
  Tensor out = value(a);
  for (double& v : out.values) v *= k;
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r, k](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < g.values.size(); ++i)
      ga.values[i] += k * g.values[i];
  });
  return r;
}

Var Tape::tanh(Var a) {
  Tensor out = value(a);
  for (double& v : out.values) v = std::tanh(v);
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    const Tensor& y = t.value(r);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < g.values.size(); ++i)
      ga.values[i] += g.values[i] * (1.0 - y.values[i] * y.values[i]);
  });
  return r;
}

Var Tape::arctanh(Var a) {
  Tensor out = value(a);
  for (double& v : out.values) v = std::atanh(v);
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < g.values.size(); ++i)
      ga.values[i] += g.values[i] / (1.0 - x.values[i] * x.values[i]);
  });
  return r;
}

Var Tape::arcsinh(Var a) {
  Tensor out = value(a);
  for (double& v : out.values) v = std::asinh(v);
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < g.values.size(); ++i)
      ga.values[i] +=
          g.values[i] / std::sqrt(1.0 + x.values[i] * x.values[i]);
  });
  return r;
}

Var Tape::relu(Var a) {
  Tensor out = value(a);
  for (double& v : out.values) v = v > 0.0 ? v : 0.0;
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < g.values.size(); ++i)
      if (x.values[i] > 0.0) ga.values[i] += g.values[i];
  });
  return r;
}

namespace {
// f(u) = tanh(u)/u, continuous at 0; series below 1e-4 keeps full precision.
double tanh_ratio_value(double u) {
  if (std::abs(u) < 1e-4) {
    const double u2 = u * u;
    return 1.0 - u2 / 3.0 + 2.0 * u2 * u2 / 15.0;
  }
  return std::tanh(u) / u;
}
double tanh_ratio_slope(double u) {
  if (std::abs(u) < 1e-4) {
    const double u2 = u * u;
    return -2.0 * u / 3.0 + 8.0 * u * u2 / 15.0;
  }
  const double th = std::tanh(u);
  return ((1.0 - th * th) * u - th) / (u * u);
}
}  // namespace

Var Tape::tanh_ratio(Var a, double k) {
  Tensor out = value(a);
  for (double& v : out.values) v = tanh_ratio_value(k * v);
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r, k](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < g.values.size(); ++i)
      ga.values[i] += g.values[i] * k * tanh_ratio_slope(k * x.values[i]);
  });
  return r;
}

Var Tape::clip_scale(Var a, double r_max) {
  Tensor out = value(a);
  for (double& v : out.values) v = v <= r_max ? 1.0 : r_max / v;
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r, r_max](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    const Tensor& x = t.value(a);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < g.values.size(); ++i) {
      const double xi = x.values[i];
      if (xi > r_max) ga.values[i] += -g.values[i] * r_max / (xi * xi);
    }
  });
  return r;
}

Var Tape::rownorm(Var a) {
  const Tensor& x = value(a);
  const size_t rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::zeros({rows, 1});
  for (size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < cols; ++j) s += x.at(i, j) * x.at(i, j);
    out.values[i] = std::sqrt(s);
  }
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r, rows, cols](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    const Tensor& x2 = t.value(a);
    const Tensor& n = t.value(r);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < rows; ++i) {
      const double ni = n.values[i];
      if (ni == 0.0) continue;
      const double gi = g.values[i] / ni;
      for (size_t j = 0; j < cols; ++j) ga.at(i, j) += gi * x2.at(i, j);
    }
  });
  return r;
}

Var Tape::rownormsq(Var a) {
  const Tensor& x = value(a);
  const size_t rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::zeros({rows, 1});
  for (size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < cols; ++j) s += x.at(i, j) * x.at(i, j);
    out.values[i] = s;
  }
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r, rows, cols](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    const Tensor& x2 = t.value(a);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < cols; ++j)
        ga.at(i, j) += 2.0 * x2.at(i, j) * g.values[i];
  });
  return r;
}

Var Tape::rowdot(Var a, Var b) {
  const Tensor& x = value(a);
  const Tensor& y = value(b);
  if (!x.same_shape(y)) throw_usage("rowdot shape mismatch");
  const size_t rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::zeros({rows, 1});
  for (size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < cols; ++j) s += x.at(i, j) * y.at(i, j);
    out.values[i] = s;
  }
  Var r = emplace(std::move(out), requires_grad(a) || requires_grad(b));
  record([a, b, r, rows, cols](Tape& t) {
    const Tensor& g = t.grad_ref(r);
    const Tensor& x2 = t.value(a);
    const Tensor& y2 = t.value(b);
    for (size_t i = 0; i < rows; ++i) {
      const double gi = g.values[i];
      for (size_t j = 0; j < cols; ++j) {
        if (t.requires_grad(a)) t.grad_ref(a).at(i, j) += gi * y2.at(i, j);
        if (t.requires_grad(b)) t.grad_ref(b).at(i, j) += gi * x2.at(i, j);
      }
    }
  });
  return r;
}

Var Tape::rowsum(Var a) {
  const Tensor& x = value(a);
  const size_t rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::zeros({rows, 1});
  for (size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (size_t j = 0; j < cols; ++j) s += x.at(i, j);
    out.values[i] = s;
  }
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r, rows, cols](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < cols; ++j) ga.at(i, j) += g.values[i];
  });
  return r;
}

Var Tape::rowscale(Var a, Var s) {
  const Tensor& x = value(a);
  const Tensor& sc = value(s);
  const size_t rows = x.rows(), cols = x.cols();
  if (sc.rows() != rows || sc.cols() != 1)
    throw_usage("rowscale needs a {rows,1} scale");
  Tensor out = Tensor::zeros(x.shape);
  for (size_t i = 0; i < rows; ++i)
    for (size_t j = 0; j < cols; ++j) out.at(i, j) = x.at(i, j) * sc.values[i];
  Var r = emplace(std::move(out), requires_grad(a) || requires_grad(s));
  record([a, s, r, rows, cols](Tape& t) {
    const Tensor& g = t.grad_ref(r);
    const Tensor& x2 = t.value(a);
    const Tensor& sc2 = t.value(s);
    for (size_t i = 0; i < rows; ++i) {
      double acc = 0.0;
      for (size_t j = 0; j < cols; ++j) {
        if (t.requires_grad(a))
          t.grad_ref(a).at(i, j) += g.at(i, j) * sc2.values[i];
        acc += x2.at(i, j) * g.at(i, j);
      }
      if (t.requires_grad(s)) t.grad_ref(s).values[i] += acc;
    }
  });
  return r;
}

Var Tape::broadcast_rows(Var v, size_t n) {
  const Tensor& x = value(v);
  if (x.rows() != 1) throw_usage("broadcast_rows expects a single row");
  const size_t cols = x.cols();
  Tensor out = Tensor::zeros({n, cols});
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < cols; ++j) out.at(i, j) = x.values[j];
  Var r = emplace(std::move(out), requires_grad(v));
  record([v, r, n, cols](Tape& t) {
    if (!t.requires_grad(v)) return;
    const Tensor& g = t.grad_ref(r);
    Tensor& gv = t.grad_ref(v);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < cols; ++j) gv.values[j] += g.at(i, j);
  });
  return r;
}

Var Tape::row(Var m, size_t index) {
  const Tensor& x = value(m);
  const size_t cols = x.cols();
  if (index >= x.rows()) throw_usage("row index out of range");
  Tensor out = Tensor::zeros({1, cols});
  for (size_t j = 0; j < cols; ++j) out.values[j] = x.at(index, j);
  Var r = emplace(std::move(out), requires_grad(m));
  record([m, r, index, cols](Tape& t) {
    if (!t.requires_grad(m)) return;
    const Tensor& g = t.grad_ref(r);
    Tensor& gm = t.grad_ref(m);
    for (size_t j = 0; j < cols; ++j) gm.at(index, j) += g.values[j];
  });
  return r;
}

Var Tape::concat_cols(const std::vector<Var>& cols) {
  if (cols.empty()) throw_usage("concat_cols needs at least one column");
  const size_t rows = value(cols[0]).rows();
  const size_t k = cols.size();
  bool rg = false;
  for (const Var c : cols) {
    const Tensor& t = value(c);
    if (t.rows() != rows || t.cols() != 1)
      throw_usage("concat_cols expects {rows,1} columns");
    rg = rg || requires_grad(c);
  }
  Tensor out = Tensor::zeros({rows, k});
  for (size_t j = 0; j < k; ++j) {
    const Tensor& t = value(cols[j]);
    for (size_t i = 0; i < rows; ++i) out.at(i, j) = t.values[i];
  }
  Var r = emplace(std::move(out), rg);
  std::vector<Var> saved = cols;
  record([saved, r, rows, k](Tape& t) {
    const Tensor& g = t.grad_ref(r);
    for (size_t j = 0; j < k; ++j) {
      if (!t.requires_grad(saved[j])) continue;
      Tensor& gc = t.grad_ref(saved[j]);
      for (size_t i = 0; i < rows; ++i) gc.values[i] += g.at(i, j);
    }
  });
  return r;
}

Var Tape::linear(Var x, Var w, Var b) {
  const Tensor& tx = value(x);
  const Tensor& tw = value(w);
  const Tensor& tb = value(b);
  const size_t batch = tx.rows(), in = tx.cols(), out_dim = tw.rows();
  if (tw.cols() != in) throw_usage("linear: weight width mismatch");
  if (tb.size() != out_dim) throw_usage("linear: bias size mismatch");
  Tensor out = Tensor::zeros({batch, out_dim});
  for (size_t i = 0; i < batch; ++i)
    for (size_t d = 0; d < out_dim; ++d) {
      double acc = 0.0;
      for (size_t j = 0; j < in; ++j) acc += tx.at(i, j) * tw.at(d, j);
      out.at(i, d) = acc + tb.values[d];
    }
  Var r = emplace(std::move(out),
                  requires_grad(x) || requires_grad(w) || requires_grad(b));
  record([x, w, b, r, batch, in, out_dim](Tape& t) {
    const Tensor& g = t.grad_ref(r);
    const Tensor& tx2 = t.value(x);
    const Tensor& tw2 = t.value(w);
    if (t.requires_grad(x)) {
      Tensor& gx = t.grad_ref(x);
      for (size_t i = 0; i < batch; ++i)
        for (size_t j = 0; j < in; ++j) {
          double acc = 0.0;
          for (size_t d = 0; d < out_dim; ++d)
            acc += g.at(i, d) * tw2.at(d, j);
          gx.at(i, j) += acc;
        }
    }
    if (t.requires_grad(w)) {
      Tensor& gw = t.grad_ref(w);
      for (size_t d = 0; d < out_dim; ++d)
        for (size_t j = 0; j < in; ++j) {
          double acc = 0.0;
          for (size_t i = 0; i < batch; ++i)
            acc += g.at(i, d) * tx2.at(i, j);
          gw.at(d, j) += acc;
        }
    }
    if (t.requires_grad(b)) {
      Tensor& gb = t.grad_ref(b);
      for (size_t d = 0; d < out_dim; ++d) {
        double acc = 0.0;
        for (size_t i = 0; i < batch; ++i) acc += g.at(i, d);
        gb.values[d] += acc;
      }
    }
  });
  return r;
}

Var Tape::softmax_rows(Var a) {
  const Tensor& x = value(a);
  const size_t rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::zeros(x.shape);
  for (size_t i = 0; i < rows; ++i) {
    double m = x.at(i, 0);
    for (size_t j = 1; j < cols; ++j) m = std::max(m, x.at(i, j));
    double s = 0.0;
    for (size_t j = 0; j < cols; ++j) {
      out.at(i, j) = std::exp(x.at(i, j) - m);
      s += out.at(i, j);
    }
    for (size_t j = 0; j < cols; ++j) out.at(i, j) /= s;
  }
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r, rows, cols](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    const Tensor& y = t.value(r);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < rows; ++i) {
      double gdot = 0.0;
      for (size_t j = 0; j < cols; ++j) gdot += g.at(i, j) * y.at(i, j);
      for (size_t j = 0; j < cols; ++j)
        ga.at(i, j) += y.at(i, j) * (g.at(i, j) - gdot);
    }
  });
  return r;
}

Var Tape::log_softmax_rows(Var a) {
  const Tensor& x = value(a);
  const size_t rows = x.rows(), cols = x.cols();
  Tensor out = Tensor::zeros(x.shape);
  for (size_t i = 0; i < rows; ++i) {
    double m = x.at(i, 0);
    for (size_t j = 1; j < cols; ++j) m = std::max(m, x.at(i, j));
    double s = 0.0;
    for (size_t j = 0; j < cols; ++j) s += std::exp(x.at(i, j) - m);
    const double lse = m + std::log(s);
    for (size_t j = 0; j < cols; ++j) out.at(i, j) = x.at(i, j) - lse;
  }
  Var r = emplace(std::move(out), requires_grad(a));
  record([a, r, rows, cols](Tape& t) {
    if (!t.requires_grad(a)) return;
    const Tensor& g = t.grad_ref(r);
    const Tensor& lp = t.value(r);
    Tensor& ga = t.grad_ref(a);
    for (size_t i = 0; i < rows; ++i) {
      double gsum = 0.0;
      for (size_t j = 0; j < cols; ++j) gsum += g.at(i, j);
      for (size_t j = 0; j < cols; ++j)
        ga.at(i, j) += g.at(i, j) - std::exp(lp.at(i, j)) * gsum;
    }
  });
  return r;
}

Var Tape::cross_entropy_mean(Var logits, const std::vector<int>& labels) {
  const Tensor& x = value(logits);
  const size_t rows = x.rows(), cols = x.cols();
  if (labels.size() != rows) throw_usage("cross_entropy: label count mismatch");
  for (const int y : labels)
    if (y < 0 || static_cast<size_t>(y) >= cols)
      throw_usage("cross_entropy: label out of range [0, num_classes)");

  // Saves log-softmax rows for the backward pass.
  Tensor lp = Tensor::zeros(x.shape);
  double loss = 0.0;
  for (size_t i = 0; i < rows; ++i) {
    double m = x.at(i, 0);
    for (size_t j = 1; j < cols; ++j) m = std::max(m, x.at(i, j));
    double s = 0.0;
    for (size_t j = 0; j < cols; ++j) s += std::exp(x.at(i, j) - m);
    const double lse = m + std::log(s);
    for (size_t j = 0; j < cols; ++j) lp.at(i, j) = x.at(i, j) - lse;
    loss += -lp.at(i, static_cast<size_t>(labels[i]));
  }
  loss /= static_cast<double>(rows);

  Var r = emplace(Tensor::scalar(loss), requires_grad(logits));
  std::vector<int> saved_labels = labels;
  auto saved_lp = std::make_shared<Tensor>(std::move(lp));
  record([logits, r, rows, cols, saved_labels, saved_lp](Tape& t) {
    if (!t.requires_grad(logits)) return;
    const double seed = t.grad_ref(r).values[0];
    Tensor& gl = t.grad_ref(logits);
    const double inv_b = 1.0 / static_cast<double>(rows);
    for (size_t i = 0; i < rows; ++i)
      for (size_t j = 0; j < cols; ++j) {
        const double p = std::exp(saved_lp->at(i, j));
        const double onehot =
            (static_cast<size_t>(saved_labels[i]) == j) ? 1.0 : 0.0;
        gl.at(i, j) += seed * (p - onehot) * inv_b;
      }
  });
  return r;
}

Var Tape::sum_all(Var a) {
  const Tensor& x = value(a);
  double s = 0.0;
  for (const double v : x.values) s += v;
  Var r = emplace(Tensor::scalar(s), requires_grad(a));
  record([a, r](Tape& t) {
    if (!t.requires_grad(a)) return;
    const double seed = t.grad_ref(r).values[0];
    Tensor& ga = t.grad_ref(a);
    for (double& v : ga.values) v += seed;
  });
  return r;
}

Var Tape::mean_all(Var a) {
  const Tensor& x = value(a);
  double s = 0.0;
  for (const double v : x.values) s += v;
  const double n = static_cast<double>(x.size());
  Var r = emplace(Tensor::scalar(s / n), requires_grad(a));
  record([a, r, n](Tape& t) {
    if (!t.requires_grad(a)) return;
    const double seed = t.grad_ref(r).values[0] / n;
    Tensor& ga = t.grad_ref(a);
    for (double& v : ga.values) v += seed;
  });
  return r;
}

Var Tape::detach(Var a) {
  return emplace(value(a), false);  // no node: gradient stops here
}

void Tape::backward(Var output, const Tensor& seed) {
  if (!seed.same_shape(value(output)))
    throw_usage("backward: seed shape mismatch");
  grad_ref(output) = seed;
  for (size_t i = nodes_.size(); i > 0; --i) nodes_[i - 1].backward(*this);
}

void Tape::backward(Var scalar_output) {
  if (!value(scalar_output).is_scalar())
    throw_usage("backward: output is not scalar");
  backward(scalar_output, Tensor::scalar(1.0));
}

void Tape::zero_grad() {
  for (Slot& s : slots_)
    std::fill(s.grad.values.begin(), s.grad.values.end(), 0.0);
}

ForwardResult forward(
    const std::function<Var(Tape&, const std::vector<Var>&)>& graph_fn,
    const std::vector<Tensor>& inputs) {
  ForwardResult res;
  res.input_vars.reserve(inputs.size());
  for (const Tensor& t : inputs)
    res.input_vars.push_back(res.tape.param(t));
  res.output_var = graph_fn(res.tape, res.input_vars);
  res.output = res.tape.value(res.output_var);
  return res;
}

GradCheckReport grad_check(
    const std::function<Var(Tape&, const std::vector<Var>&)>& fn,
    const std::vector<Tensor>& point, double tolerance) {
  // Analytic gradients.
  Tape tape;
  std::vector<Var> vars;
  vars.reserve(point.size());
  for (const Tensor& t : point) vars.push_back(tape.param(t));
  const Var out = fn(tape, vars);
  if (!tape.value(out).is_scalar())
    throw_usage("grad_check: function must be scalar-valued");
  tape.backward(out);

  const auto eval = [&](const std::vector<Tensor>& p) {
    Tape t2;
    std::vector<Var> v2;
    v2.reserve(p.size());
    for (const Tensor& t : p) v2.push_back(t2.param(t));
    return t2.value(fn(t2, v2)).values[0];
  };

  GradCheckReport report;
  std::vector<Tensor> probe = point;
  for (size_t pi = 0; pi < point.size(); ++pi) {
    for (size_t i = 0; i < point[pi].size(); ++i) {
      const double theta = point[pi].values[i];
      const double h = 1e-6 * std::max(1.0, std::abs(theta));
      probe[pi].values[i] = theta + h;
      const double f_plus = eval(probe);
      probe[pi].values[i] = theta - h;
      const double f_minus = eval(probe);
      probe[pi].values[i] = theta;
      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double analytic = tape.grad(vars[pi]).values[i];
      const double rel =
          std::abs(analytic - numeric) /
          std::max({std::abs(analytic), std::abs(numeric), 1e-3});
      report.max_rel_err = std::max(report.max_rel_err, rel);
      ++report.n_checked;
    }
  }
  report.pass = report.max_rel_err < tolerance;
  return report;
}

}  // namespace hypcbc::ad
