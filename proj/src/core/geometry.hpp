#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace hypcbc::geom {

// Norms are clamped to (1 - kBoundaryEps)/sqrt(c) before forming ball points
// and before the arctanh in the distance; clipped tangent vectors keep points
// off the boundary but rounding can still land on it.
inline constexpr double kBoundaryEps = 1e-5;

using Vec = std::vector<double>;

// Positive curvature scaling factor of the Poincare ball {x : c*|x|^2 < 1}.
struct Curvature {
  double c;
  explicit Curvature(double value);
};

// Maximum Euclidean norm admitted before the exponential map.
struct ClipRadius {
  double r;
  explicit ClipRadius(double value);
};

// A point strictly inside the ball of a given curvature.
class BallPoint {
 public:
  // Validates c*|coords|^2 < 1; throws on violation.
  BallPoint(Vec coords, Curvature curvature);

  // Clamps the norm to (1 - kBoundaryEps)/sqrt(c) and constructs.
  static BallPoint project(Vec coords, Curvature curvature);

  static BallPoint origin(size_t dim, Curvature curvature);

  const Vec& coords() const { return coords_; }
  double curvature() const { return c_; }
  size_t dim() const { return coords_.size(); }

 private:
  BallPoint() = default;
  Vec coords_;
  double c_ = 1.0;
};

// Raw kernels over spans. These validate the ball invariant and throw
// hypcbc::Error on violation; BallPoint overloads below are always safe.
double squared_norm(std::span<const double> x);
double norm(std::span<const double> x);
double dot(std::span<const double> x, std::span<const double> y);

double conformal_factor(std::span<const double> x, double c);
Vec mobius_add(std::span<const double> x, std::span<const double> y, double c);
double dist(std::span<const double> x, std::span<const double> y, double c);
Vec exp_map(std::span<const double> base, std::span<const double> v, double c);
Vec log_map(std::span<const double> base, std::span<const double> y, double c);
Vec clip_features(std::span<const double> h, double r);

double conformal_factor(const BallPoint& x);
BallPoint mobius_add(const BallPoint& x, const BallPoint& y);
double dist(const BallPoint& x, const BallPoint& y);
BallPoint exp_map(const BallPoint& base, std::span<const double> v);
Vec log_map(const BallPoint& base, const BallPoint& y);

// Geodesic arc between two 2-d ball points, sampled via exp/log
// interpolation. Endpoints are copied exactly; interior samples come from
// exp_map(p, t * log_map(p, q)).
struct GeodesicArc {
  BallPoint p;
  BallPoint q;
  std::vector<Vec> samples;
};

GeodesicArc geodesic_boundary(const BallPoint& p, const BallPoint& q,
                              size_t n_samples);

}  // namespace hypcbc::geom
