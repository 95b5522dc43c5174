#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>

namespace oracle {

namespace {

double dot(const Vec& x, const Vec& y) {
  return std::inner_product(x.begin(), x.end(), y.begin(), 0.0);
}

double norm2(const Vec& x) { return dot(x, x); }

double vnorm(const Vec& x) { return std::sqrt(norm2(x)); }

Vec scaled(const Vec& x, double s) {
  Vec out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = s * x[i];
  return out;
}

Vec negated(const Vec& x) { return scaled(x, -1.0); }

}  // namespace

double conformal_factor(const Vec& x, double c) {
  return 2.0 / (1.0 - c * norm2(x));
}

Vec mobius_add(const Vec& x, const Vec& y, double c) {
  const double xy = dot(x, y);
  const double x2 = norm2(x);
  const double y2 = norm2(y);
  const double cx = 1.0 + 2.0 * c * xy + c * y2;
  const double cy = 1.0 - c * x2;
  const double den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
  Vec out(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    out[i] = (cx * x[i] + cy * y[i]) / den;
  return out;
}

double dist(const Vec& x, const Vec& y, double c) {
  const double sq = std::sqrt(c);
  return 2.0 / sq * std::atanh(sq * vnorm(mobius_add(negated(x), y, c)));
}

Vec exp_map(const Vec& base, const Vec& v, double c) {
  const double vn = vnorm(v);
  if (vn == 0.0) return base;
  const double sq = std::sqrt(c);
  const double lam = conformal_factor(base, c);
  const double scale = std::tanh(sq * lam * vn / 2.0) / (sq * vn);
  return mobius_add(base, scaled(v, scale), c);
}

Vec log_map(const Vec& base, const Vec& y, double c) {
  const Vec w = mobius_add(negated(base), y, c);
  const double wn = vnorm(w);
  if (wn == 0.0) return Vec(base.size(), 0.0);
  const double sq = std::sqrt(c);
  const double lam = conformal_factor(base, c);
  return scaled(w, 2.0 / (sq * lam) * std::atanh(sq * wn) / wn);
}

// --- eager model recomputation ----------------------------------------------
//
// Each block below replays one production primitive in its documented
// index-order arithmetic.

namespace {

double tanh_ratio_scalar(double u) {
  if (std::abs(u) < 1e-4) {
    const double u2 = u * u;
    return 1.0 - u2 / 3.0 + 2.0 * u2 * u2 / 15.0;
  }
  return std::tanh(u) / u;
}

Vec row_logits(const BranchSpec& spec, const Vec& f) {
  const double c = spec.curvature;
  const double sq = std::sqrt(c);

  // linear
  Vec h(spec.weight.size());
  for (size_t d = 0; d < spec.weight.size(); ++d) {
    double acc = 0.0;
    for (size_t j = 0; j < f.size(); ++j) acc += f[j] * spec.weight[d][j];
    h[d] = acc + spec.bias[d];
  }
  // clip: rowscale(h, clip_scale(rownorm(h), r))
  double n2 = 0.0;
  for (size_t j = 0; j < h.size(); ++j) n2 += h[j] * h[j];
  const double n = std::sqrt(n2);
  const double s = n <= spec.clip_radius ? 1.0 : spec.clip_radius / n;
  Vec hc(h.size());
  for (size_t j = 0; j < h.size(); ++j) hc[j] = h[j] * s;
  // exp0: rowscale(hc, tanh_ratio(rownorm(hc), sqrt(c)))
  double m2 = 0.0;
  for (size_t j = 0; j < hc.size(); ++j) m2 += hc[j] * hc[j];
  const double f_scale = tanh_ratio_scalar(sq * std::sqrt(m2));
  Vec z(hc.size());
  for (size_t j = 0; j < hc.size(); ++j) z[j] = hc[j] * f_scale;

  // MLR columns
  const double two_c = 2.0 * c;
  const double cc = c * c;
  const double two_sq = 2.0 * sq;
  Vec logits(spec.classes.size());
  for (size_t k = 0; k < spec.classes.size(); ++k) {
    const Vec& pk = spec.classes[k].p;
    const Vec& ak = spec.classes[k].a;
    Vec npk(pk.size());
    for (size_t j = 0; j < pk.size(); ++j) npk[j] = -pk[j];

    double A = 0.0, B = 0.0, C = 0.0;
    for (size_t j = 0; j < z.size(); ++j) A += npk[j] * z[j];
    for (size_t j = 0; j < z.size(); ++j) B += npk[j] * npk[j];
    for (size_t j = 0; j < z.size(); ++j) C += z[j] * z[j];
    const double coef_x = (A * two_c + C * c) + 1.0;
    const double coef_y = B * (-c) + 1.0;
    const double den = (A * two_c + (B * C) * cc) + 1.0;
    const double r = 1.0 / den;
    Vec w(z.size());
    for (size_t j = 0; j < z.size(); ++j)
      w[j] = (npk[j] * coef_x + z[j] * coef_y) * r;

    double dot_wa = 0.0, wn2 = 0.0, an2 = 0.0, pn2 = 0.0;
    for (size_t j = 0; j < w.size(); ++j) dot_wa += w[j] * ak[j];
    for (size_t j = 0; j < w.size(); ++j) wn2 += w[j] * w[j];
    for (size_t j = 0; j < ak.size(); ++j) an2 += ak[j] * ak[j];
    for (size_t j = 0; j < pk.size(); ++j) pn2 += pk[j] * pk[j];
    const double an = std::sqrt(an2);
    const double lam = (1.0 / (pn2 * (-c) + 1.0)) * 2.0;
    const double den2 = (wn2 * (-c) + 1.0) * an;
    const double arg = (dot_wa * two_sq) / den2;
    logits[k] = ((lam * an) * std::asinh(arg)) * (2.0 / sq);
  }
  return logits;
}

void log_softmax_row(const Vec& x, Vec& out) {
  double m = x[0];
  for (size_t j = 1; j < x.size(); ++j) m = std::max(m, x[j]);
  double s = 0.0;
  for (size_t j = 0; j < x.size(); ++j) s += std::exp(x[j] - m);
  const double lse = m + std::log(s);
  out.resize(x.size());
  for (size_t j = 0; j < x.size(); ++j) out[j] = x[j] - lse;
}

void softmax_row(const Vec& x, Vec& out) {
  double m = x[0];
  for (size_t j = 1; j < x.size(); ++j) m = std::max(m, x[j]);
  out.resize(x.size());
  double s = 0.0;
  for (size_t j = 0; j < x.size(); ++j) {
    out[j] = std::exp(x[j] - m);
    s += out[j];
  }
  for (size_t j = 0; j < x.size(); ++j) out[j] /= s;
}

}  // namespace

std::vector<Vec> branch_logits(const BranchSpec& spec,
                               const std::vector<Vec>& features) {
  std::vector<Vec> out;
  out.reserve(features.size());
  for (const Vec& f : features) out.push_back(row_logits(spec, f));
  return out;
}

double ce_mean(const std::vector<Vec>& logits, const std::vector<int>& labels) {
  double loss = 0.0;
  Vec lp;
  for (size_t i = 0; i < logits.size(); ++i) {
    log_softmax_row(logits[i], lp);
    loss += -lp[static_cast<size_t>(labels[i])];
  }
  loss /= static_cast<double>(logits.size());
  return loss;
}

double kl_consistency(const std::vector<Vec>& y1, const std::vector<Vec>& y2,
                      double temperature) {
  const double inv_t = 1.0 / temperature;
  double sum = 0.0;
  Vec soft1, soft2, p2, lp1, lp2;
  for (size_t i = 0; i < y1.size(); ++i) {
    soft1.resize(y1[i].size());
    soft2.resize(y2[i].size());
    for (size_t j = 0; j < y1[i].size(); ++j) {
      soft1[j] = y1[i][j] * inv_t;
      soft2[j] = y2[i][j] * inv_t;
    }
    softmax_row(soft2, p2);
    log_softmax_row(soft2, lp2);
    log_softmax_row(soft1, lp1);
    double row = 0.0;
    for (size_t j = 0; j < p2.size(); ++j) row += p2[j] * (lp2[j] - lp1[j]);
    sum += row;
  }
  const double mean = sum / static_cast<double>(y1.size());
  return mean * (temperature * temperature);
}

double total_loss(const BranchSpec& b1, const BranchSpec& b2,
                  const std::vector<Vec>& features,
                  const std::vector<int>& labels, double lambda,
                  double temperature) {
  const std::vector<Vec> y1 = branch_logits(b1, features);
  const std::vector<Vec> y2 = branch_logits(b2, features);
  const double ce1 = ce_mean(y1, labels);
  const double ce2 = ce_mean(y2, labels);
  const double kl = kl_consistency(y1, y2, temperature);
  return (ce1 + ce2) + kl * lambda;
}

double auc_macro_paircount(const hypcbc::ad::Tensor& scores,
                           const std::vector<int>& labels) {
  const size_t n = scores.rows();
  const size_t num_classes = scores.cols();
  double sum = 0.0;
  size_t used = 0;
  for (size_t k = 0; k < num_classes; ++k) {
    std::vector<size_t> pos, neg;
    for (size_t i = 0; i < n; ++i)
      (labels[i] == static_cast<int>(k) ? pos : neg).push_back(i);
    if (pos.empty() || neg.empty()) continue;
    double credit = 0.0;
    for (const size_t p : pos)
      for (const size_t q : neg) {
        if (scores.at(p, k) > scores.at(q, k))
          credit += 1.0;
        else if (scores.at(p, k) == scores.at(q, k))
          credit += 0.5;
      }
    sum += credit /
           (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
    ++used;
  }
  if (used == 0) throw std::runtime_error("paircount: all classes degenerate");
  return sum / static_cast<double>(used);
}

double knn_entropy_bruteforce(const std::vector<Vec>& points, double curvature,
                              const std::vector<int>& labels, size_t k) {
  const size_t n = points.size();
  std::map<int, size_t> ids;
  for (const int l : labels) ids.emplace(l, ids.size());
  if (ids.size() < 2) return 0.0;
  const double log_l = std::log(static_cast<double>(ids.size()));

  // Full distance matrix, then per-point selection sorted by (d, index).
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  for (size_t i = 0; i < n; ++i)
    for (size_t j = 0; j < n; ++j)
      if (i != j) d[i][j] = dist(points[i], points[j], curvature);

  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, size_t>> cand;
    for (size_t j = 0; j < n; ++j)
      if (j != i) cand.emplace_back(d[i][j], j);
    std::sort(cand.begin(), cand.end());
    std::vector<size_t> counts(ids.size(), 0);
    for (size_t t = 0; t < k; ++t) ++counts[ids.at(labels[cand[t].second])];
    double h = 0.0;
    for (const size_t c : counts) {
      if (c == 0) continue;
      const double p = static_cast<double>(c) / static_cast<double>(k);
      h -= p * std::log(p);
    }
    total += h / log_l;
  }
  return total / static_cast<double>(n);
}

}  // namespace oracle
