#include "core/geometry.hpp"

#include <cmath>
#include <string>

#include "core/error.hpp"

namespace hypcbc::geom {

namespace {

void check_same_ball(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw_usage("dimension mismatch: " + std::to_string(x.size()) + " vs " +
                std::to_string(y.size()));
}

void check_inside(std::span<const double> x, double c, const char* what) {
  if (c * squared_norm(x) >= 1.0)
    throw_usage(std::string(what) + ": point lies outside the open ball");
}

double max_norm(double c) { return (1.0 - kBoundaryEps) / std::sqrt(c); }

}  // namespace

Curvature::Curvature(double value) : c(value) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw_config("curvature must be positive and finite");
}

ClipRadius::ClipRadius(double value) : r(value) {
  if (!(value > 0.0) || !std::isfinite(value))
    throw_config("clip radius must be positive and finite");
}

BallPoint::BallPoint(Vec coords, Curvature curvature)
    : coords_(std::move(coords)), c_(curvature.c) {
  if (coords_.empty()) throw_usage("ball point needs at least one dimension");
  for (const double v : coords_)
    if (!std::isfinite(v)) throw_usage("ball point has non-finite coordinate");
  check_inside(coords_, c_, "ball point");
}

BallPoint BallPoint::project(Vec coords, Curvature curvature) {
  const double n = norm(coords);
  const double cap = max_norm(curvature.c);
  if (n > cap) {
    const double s = cap / n;
    for (double& v : coords) v *= s;
  }
  BallPoint p;
  p.coords_ = std::move(coords);
  p.c_ = curvature.c;
  return p;
}

BallPoint BallPoint::origin(size_t dim, Curvature curvature) {
  return BallPoint(Vec(dim, 0.0), curvature);
}

double squared_norm(std::span<const double> x) {
  double s = 0.0;
  for (const double v : x) s += v * v;
  return s;
}

double norm(std::span<const double> x) { return std::sqrt(squared_norm(x)); }

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double conformal_factor(std::span<const double> x, double c) {
  const double q = c * squared_norm(x);
  if (q >= 1.0) throw_usage("conformal factor undefined outside the ball");
  return 2.0 / (1.0 - q);
}

Vec mobius_add(std::span<const double> x, std::span<const double> y, double c) {
  check_same_ball(x, y);
  check_inside(x, c, "mobius_add lhs");
  check_inside(y, c, "mobius_add rhs");
  const double xy = dot(x, y);
  const double x2 = squared_norm(x);
  const double y2 = squared_norm(y);
  const double coef_x = 1.0 + 2.0 * c * xy + c * y2;
  const double coef_y = 1.0 - c * x2;
  const double den = 1.0 + 2.0 * c * xy + c * c * x2 * y2;
  if (std::abs(den) < 1e-300) throw_numeric("mobius_add denominator underflow");
  Vec out(x.size());
  for (size_t i = 0; i < x.size(); ++i)
    out[i] = (coef_x * x[i] + coef_y * y[i]) / den;
  return out;
}

double dist(std::span<const double> x, std::span<const double> y, double c) {
  Vec neg_x(x.begin(), x.end());
  for (double& v : neg_x) v = -v;
  const Vec w = mobius_add(neg_x, y, c);
  const double sq = std::sqrt(c);
  // Guard against rounding pushing the argument onto [1, inf).
  const double arg = std::min(sq * norm(w), 1.0 - kBoundaryEps);
  return 2.0 / sq * std::atanh(arg);
}

Vec exp_map(std::span<const double> base, std::span<const double> v, double c) {
  check_same_ball(base, v);
  check_inside(base, c, "exp_map base");
  const double vn = norm(v);
  if (vn == 0.0) return Vec(base.begin(), base.end());
  const double sq = std::sqrt(c);
  const double lam = conformal_factor(base, c);
  const double t = std::tanh(sq * lam * vn / 2.0) / (sq * vn);
  Vec scaled(v.size());
  for (size_t i = 0; i < v.size(); ++i) scaled[i] = t * v[i];
  return mobius_add(base, scaled, c);
}

Vec log_map(std::span<const double> base, std::span<const double> y, double c) {
  check_same_ball(base, y);
  check_inside(base, c, "log_map base");
  check_inside(y, c, "log_map point");
  Vec neg_base(base.begin(), base.end());
  for (double& v : neg_base) v = -v;
  const Vec w = mobius_add(neg_base, y, c);
  const double wn = norm(w);
  if (wn == 0.0) return Vec(base.size(), 0.0);
  const double sq = std::sqrt(c);
  const double lam = conformal_factor(base, c);
  const double arg = std::min(sq * wn, 1.0 - kBoundaryEps);
  const double t = 2.0 / (sq * lam) * std::atanh(arg) / wn;
  Vec out(w.size());
  for (size_t i = 0; i < w.size(); ++i) out[i] = t * w[i];
  return out;
}

Vec clip_features(std::span<const double> h, double r) {
  for (const double v : h)
    if (!std::isfinite(v)) throw_usage("clip_features: non-finite input");
  const double n = norm(h);
  Vec out(h.begin(), h.end());
  if (n > r) {
    const double s = r / n;
    for (double& v : out) v *= s;
  }
  return out;
}

double conformal_factor(const BallPoint& x) {
  return conformal_factor(x.coords(), x.curvature());
}

namespace {
void check_compatible(const BallPoint& x, const BallPoint& y) {
  if (x.dim() != y.dim()) throw_usage("ball points have different dimensions");
  if (x.curvature() != y.curvature())
    throw_usage("ball points have different curvatures");
}
}  // namespace

BallPoint mobius_add(const BallPoint& x, const BallPoint& y) {
  check_compatible(x, y);
  return BallPoint::project(mobius_add(x.coords(), y.coords(), x.curvature()),
                            Curvature(x.curvature()));
}

double dist(const BallPoint& x, const BallPoint& y) {
  check_compatible(x, y);
  return dist(x.coords(), y.coords(), x.curvature());
}

BallPoint exp_map(const BallPoint& base, std::span<const double> v) {
  return BallPoint::project(exp_map(base.coords(), v, base.curvature()),
                            Curvature(base.curvature()));
}

Vec log_map(const BallPoint& base, const BallPoint& y) {
  check_compatible(base, y);
  return log_map(base.coords(), y.coords(), base.curvature());
}

GeodesicArc geodesic_boundary(const BallPoint& p, const BallPoint& q,
                              size_t n_samples) {
  check_compatible(p, q);
  if (p.dim() != 2) throw_usage("geodesic_boundary is defined on the disk");
  if (n_samples < 2) throw_usage("geodesic_boundary needs >= 2 samples");
  if (p.coords() == q.coords())
    throw_usage("geodesic_boundary: degenerate endpoints");

  const Vec direction = log_map(p, q);
  GeodesicArc arc{p, q, {}};
  arc.samples.reserve(n_samples);
  arc.samples.push_back(p.coords());
  for (size_t i = 1; i + 1 < n_samples; ++i) {
    const double t = static_cast<double>(i) / static_cast<double>(n_samples - 1);
    Vec v(direction.size());
    for (size_t j = 0; j < v.size(); ++j) v[j] = t * direction[j];
    arc.samples.push_back(exp_map(p, v).coords());
  }
  arc.samples.push_back(q.coords());
  return arc;
}

}  // namespace hypcbc::geom
