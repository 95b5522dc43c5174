#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "core/error.hpp"
#include "core/geometry.hpp"
#include "core/rng.hpp"
#include "oracles.hpp"

using hypcbc::Rng;
using namespace hypcbc::geom;

namespace {

Vec random_ball_point(Rng& rng, size_t dim, double c, double max_norm_frac) {
  Vec x(dim);
  double n2 = 0.0;
  for (double& v : x) {
    v = rng.normal();
    n2 += v * v;
  }
  const double target =
      rng.uniform(0.0, max_norm_frac) / std::sqrt(c);
  const double s = target / std::sqrt(n2);
  for (double& v : x) v *= s;
  return x;
}

}  // namespace

TEST_CASE("conformal factor") {
  CHECK(conformal_factor(Vec{0.0, 0.0, 0.0}, 1.0) == doctest::Approx(2.0));
  // |x|^2 = 0.5 at c = 1
  CHECK(conformal_factor(Vec{std::sqrt(0.5), 0.0}, 1.0) ==
        doctest::Approx(4.0));
  CHECK(conformal_factor(Vec{0.3, 0.4}, 0.5) ==
        doctest::Approx(2.2857142857142857).epsilon(1e-15));

  CHECK(conformal_factor(Vec{0.1, 0.2}, 1.0) >= 2.0);
  CHECK_THROWS_AS(conformal_factor(Vec{1.0, 0.5}, 1.0), hypcbc::Error);
}

TEST_CASE("mobius addition examples") {
  const Vec zero{0.0, 0.0};
  const Vec y{0.3, -0.2};
  const Vec left = mobius_add(zero, y, 1.0);
  CHECK(left[0] == doctest::Approx(y[0]).epsilon(1e-15));
  CHECK(left[1] == doctest::Approx(y[1]).epsilon(1e-15));

  const Vec x{0.4, 0.25};
  const Vec inv = mobius_add(Vec{-0.4, -0.25}, x, 1.0);
  CHECK(std::abs(inv[0]) < 1e-12);
  CHECK(std::abs(inv[1]) < 1e-12);

  const Vec r = mobius_add(Vec{0.1, 0.2}, Vec{-0.3, 0.05}, 1.0);
  CHECK(r[0] == doctest::Approx(-0.18634184268498121).epsilon(1e-14));
  CHECK(r[1] == doctest::Approx(0.26746144874951406).epsilon(1e-14));

  CHECK_THROWS_AS(mobius_add(Vec{0.1}, Vec{0.1, 0.2}, 1.0), hypcbc::Error);
}

TEST_CASE("distance examples") {
  const Vec x{0.2, 0.1};
  CHECK(dist(x, x, 1.0) == doctest::Approx(0.0));

  // c -> 0 limit: twice the Euclidean distance.
  const double d = dist(Vec{0.1, 0.0}, Vec{0.4, 0.0}, 1e-8);
  CHECK(std::abs(d - 0.6) / 0.6 < 1e-4);

  CHECK(dist(Vec{0.2, 0.1}, Vec{-0.1, 0.3}, 1.0) ==
        doctest::Approx(0.76134210834159026).epsilon(1e-14));
}

TEST_CASE("exp map examples") {
  const Vec zero{0.0, 0.0};
  const Vec at_zero = exp_map(zero, Vec{0.0, 0.0}, 1.0);
  CHECK(at_zero[0] == 0.0);
  CHECK(at_zero[1] == 0.0);

  // tanh saturation: norms approach 1 from below, monotonically.
  double prev = 0.0;
  for (const double scale : {1.0, 2.0, 5.0, 10.0, 30.0}) {
    const Vec z = exp_map(zero, Vec{scale, 0.0}, 1.0);
    CHECK(z[0] < 1.0);
    CHECK(z[0] > prev);
    prev = z[0];
  }

  const Vec z = exp_map(zero, Vec{0.5, -0.25}, 1.0);
  CHECK(z[0] == doctest::Approx(0.45369615240577772).epsilon(1e-14));
  CHECK(z[1] == doctest::Approx(-0.22684807620288886).epsilon(1e-14));
}

TEST_CASE("log map examples") {
  const Vec zero{0.0, 0.0};
  const Vec l0 = log_map(zero, Vec{0.0, 0.0}, 1.0);
  CHECK(l0[0] == 0.0);
  CHECK(l0[1] == 0.0);

  const Vec l = log_map(zero, Vec{0.6, 0.0}, 1.0);
  CHECK(l[0] == doctest::Approx(0.69314718055994531).epsilon(1e-14));
  CHECK(l[1] == 0.0);

  Rng rng(13);
  for (int i = 0; i < 50; ++i) {
    const Vec y = random_ball_point(rng, 3, 1.0, 0.9);
    const Vec back = exp_map(zero, log_map(Vec{0.0, 0.0, 0.0}, y, 1.0), 1.0);
    for (size_t j = 0; j < y.size(); ++j)
      CHECK(back[j] == doctest::Approx(y[j]).epsilon(1e-9));
  }
}

TEST_CASE("clip features") {
  const Vec small{0.3, 0.4};
  const Vec kept = clip_features(small, 1.0);
  CHECK(kept[0] == 0.3);
  CHECK(kept[1] == 0.4);

  const Vec clipped = clip_features(Vec{2.0, 0.0}, 1.0);
  CHECK(clipped[0] == doctest::Approx(1.0));
  CHECK(clipped[1] == 0.0);

  const Vec pythagorean = clip_features(Vec{3.0, 4.0}, 1.0);
  CHECK(pythagorean[0] == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(pythagorean[1] == doctest::Approx(0.8).epsilon(1e-15));
}

TEST_CASE("clip is idempotent and non-expansive") {
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    Vec h(4);
    for (double& v : h) v = 3.0 * rng.normal();
    const double r = rng.uniform(0.2, 2.0);
    const Vec once = clip_features(h, r);
    const Vec twice = clip_features(once, r);
    CHECK(norm(once) <= std::min(norm(h), r) + 1e-12);
    for (size_t j = 0; j < h.size(); ++j) CHECK(twice[j] == once[j]);
  }
}

TEST_CASE("ball closure under mobius_add and exp_map") {
  Rng rng(7);
  for (const double c : {0.5, 1.0, 2.0}) {
    for (int i = 0; i < 300; ++i) {
      const Vec x = random_ball_point(rng, 3, c, 0.95);
      const Vec y = random_ball_point(rng, 3, c, 0.95);
      const Vec s = mobius_add(x, y, c);
      CHECK(c * squared_norm(s) < 1.0);

      Vec v(3);
      for (double& e : v) e = 2.0 * rng.normal();
      const BallPoint base = BallPoint::project(x, Curvature(c));
      const BallPoint mapped = exp_map(base, v);
      CHECK(c * squared_norm(mapped.coords()) < 1.0);
    }
  }
}

TEST_CASE("left identity and left inverse") {
  Rng rng(21);
  for (int i = 0; i < 200; ++i) {
    const Vec y = random_ball_point(rng, 4, 1.0, 0.95);
    const Vec zero(4, 0.0);
    const Vec id = mobius_add(zero, y, 1.0);
    for (size_t j = 0; j < 4; ++j) CHECK(id[j] == doctest::Approx(y[j]).epsilon(1e-15));

    const Vec x = random_ball_point(rng, 4, 1.0, 0.95);
    Vec neg_x = x;
    for (double& v : neg_x) v = -v;
    const Vec inv = mobius_add(neg_x, x, 1.0);
    for (size_t j = 0; j < 4; ++j) CHECK(std::abs(inv[j]) < 1e-12);
  }
}

TEST_CASE("distance metric axioms on random triples") {
  Rng rng(33);
  const double c = 1.0;
  for (int i = 0; i < 200; ++i) {
    const Vec x = random_ball_point(rng, 3, c, 0.9);
    const Vec y = random_ball_point(rng, 3, c, 0.9);
    const Vec z = random_ball_point(rng, 3, c, 0.9);
    const double dxy = dist(x, y, c);
    const double dyx = dist(y, x, c);
    const double dxz = dist(x, z, c);
    const double dzy = dist(z, y, c);
    CHECK(dxy >= 0.0);
    CHECK(dxy == doctest::Approx(dyx).epsilon(1e-12));
    CHECK(dist(x, x, c) == doctest::Approx(0.0));
    CHECK(dxy <= dxz + dzy + 1e-9);
  }
}

TEST_CASE("euclidean limit of the distance") {
  Rng rng(55);
  for (const double c : {1e-6, 1e-8}) {
    for (int i = 0; i < 100; ++i) {
      Vec x(3), y(3);
      for (double& v : x) v = rng.uniform(-0.5, 0.5);
      for (double& v : y) v = rng.uniform(-0.5, 0.5);
      Vec diff(3);
      for (size_t j = 0; j < 3; ++j) diff[j] = x[j] - y[j];
      const double euclid = 2.0 * norm(diff);
      if (euclid < 1e-6) continue;
      const double hyp = dist(x, y, c);
      CHECK(std::abs(hyp - euclid) / euclid < 1e-3);
    }
  }
}

TEST_CASE("exp/log inversion at base 0 and random bases") {
  Rng rng(77);
  const double c = 1.0;
  for (int i = 0; i < 200; ++i) {
    const Vec base_coords = random_ball_point(rng, 3, c, 0.5);
    const BallPoint base =
        i % 2 == 0 ? BallPoint::origin(3, Curvature(c))
                   : BallPoint(base_coords, Curvature(c));
    const Vec y = random_ball_point(rng, 3, c, 0.9);
    const BallPoint target(y, Curvature(c));

    const Vec v = log_map(base, target);
    const BallPoint forth = exp_map(base, v);
    for (size_t j = 0; j < 3; ++j)
      CHECK(forth.coords()[j] == doctest::Approx(y[j]).epsilon(1e-9));

    // The other direction: log(exp(v)) = v for moderate tangents.
    Vec tangent(3);
    for (double& t : tangent) t = 0.5 * rng.normal();
    const BallPoint point = exp_map(base, tangent);
    const Vec back = log_map(base, point);
    for (size_t j = 0; j < 3; ++j)
      CHECK(back[j] == doctest::Approx(tangent[j]).epsilon(1e-9));
  }

  // v = 0 returns the base exactly, by branch, not by limit.
  const BallPoint base(Vec{0.2, -0.1, 0.05}, Curvature(1.0));
  const BallPoint same = exp_map(base, Vec{0.0, 0.0, 0.0});
  for (size_t j = 0; j < 3; ++j) CHECK(same.coords()[j] == base.coords()[j]);
}

TEST_CASE("geometry matches the independent oracle") {
  Rng rng(101);
  for (const double c : {0.5, 1.0, 2.0}) {
    for (int i = 0; i < 200; ++i) {
      const Vec x = random_ball_point(rng, 3, c, 0.9);
      const Vec y = random_ball_point(rng, 3, c, 0.9);
      CHECK(conformal_factor(x, c) ==
            doctest::Approx(oracle::conformal_factor(x, c)).epsilon(1e-12));
      const Vec got = mobius_add(x, y, c);
      const Vec want = oracle::mobius_add(x, y, c);
      for (size_t j = 0; j < 3; ++j)
        CHECK(std::abs(got[j] - want[j]) < 1e-12);
      CHECK(std::abs(dist(x, y, c) - oracle::dist(x, y, c)) < 1e-9);
    }
  }
}

TEST_CASE("geodesic boundary") {
  const Curvature c(1.0);

  SUBCASE("diameter geodesics stay on the axis") {
    const BallPoint p(Vec{-0.3, 0.0}, c);
    const BallPoint q(Vec{0.3, 0.0}, c);
    const GeodesicArc arc = geodesic_boundary(p, q, 33);
    for (const Vec& s : arc.samples) {
      CHECK(std::abs(s[1]) < 1e-12);
      CHECK(std::abs(s[0]) <= 0.3 + 1e-12);
    }
  }

  SUBCASE("endpoints are copied exactly") {
    const BallPoint p(Vec{0.1, 0.4}, c);
    const BallPoint q(Vec{-0.2, 0.25}, c);
    const GeodesicArc arc = geodesic_boundary(p, q, 17);
    CHECK(arc.samples.front() == p.coords());
    CHECK(arc.samples.back() == q.coords());
  }

  SUBCASE("additivity along the geodesic") {
    Rng rng(5);
    for (int i = 0; i < 40; ++i) {
      const Vec pc = random_ball_point(rng, 2, 1.0, 0.85);
      const Vec qc = random_ball_point(rng, 2, 1.0, 0.85);
      if (norm(Vec{pc[0] - qc[0], pc[1] - qc[1]}) < 1e-3) continue;
      const BallPoint p(pc, c);
      const BallPoint q(qc, c);
      const GeodesicArc arc = geodesic_boundary(p, q, 9);
      const double total = dist(pc, qc, 1.0);
      for (const Vec& s : arc.samples) {
        CHECK(squared_norm(s) < 1.0);
        const double through = dist(pc, s, 1.0) + dist(s, qc, 1.0);
        CHECK(std::abs(through - total) < 1e-6);
      }
    }
  }

  SUBCASE("degenerate endpoints are rejected") {
    const BallPoint p(Vec{0.1, 0.2}, c);
    CHECK_THROWS_AS(geodesic_boundary(p, p, 5), hypcbc::Error);
  }
}

TEST_CASE("ball point construction guards") {
  CHECK_THROWS_AS(BallPoint(Vec{1.2, 0.0}, Curvature(1.0)), hypcbc::Error);
  CHECK_THROWS_AS(Curvature(-1.0), hypcbc::Error);
  CHECK_THROWS_AS(Curvature(0.0), hypcbc::Error);

  // project clamps onto (1 - 1e-5)/sqrt(c).
  const BallPoint p = BallPoint::project(Vec{5.0, 0.0}, Curvature(1.0));
  CHECK(norm(p.coords()) == doctest::Approx(1.0 - 1e-5).epsilon(1e-12));
}
