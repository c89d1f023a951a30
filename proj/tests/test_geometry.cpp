#include <doctest.h>

#include <cmath>

#include "mpa/geometry.hpp"
#include "mpa/rng.hpp"

using namespace mpa;

TEST_CASE("normalize_angle maps to (-pi, pi]") {
  CHECK(normalize_angle(M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(-M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(3.0 * M_PI / 2.0) == doctest::Approx(-M_PI / 2.0));
  CHECK(normalize_angle(7.0 * M_PI) == doctest::Approx(M_PI));
  CHECK(normalize_angle(0.25) == doctest::Approx(0.25));
}

TEST_CASE("frame transforms round-trip") {
  const Pose2D ego{3.0, -2.0, 0.7};
  Rng rng(5);
  for (int i = 0; i < 50; ++i) {
    const Vec2 p{rng.uniform(-10, 10), rng.uniform(-10, 10)};
    const Vec2 back = ego_to_world(ego, world_to_ego(ego, p));
    CHECK(back.x == doctest::Approx(p.x).epsilon(1e-12));
    CHECK(back.y == doctest::Approx(p.y).epsilon(1e-12));
  }
}

TEST_CASE("polyline arclength and sampling") {
  const Polyline line({{0, 0}, {2, 0}, {2, 2}});
  CHECK(line.length() == doctest::Approx(4.0));
  const Vec2 mid = line.point_at(1.0);
  CHECK(mid.x == doctest::Approx(1.0));
  CHECK(mid.y == doctest::Approx(0.0));
  const Vec2 p3 = line.point_at(3.0);
  CHECK(p3.x == doctest::Approx(2.0));
  CHECK(p3.y == doctest::Approx(1.0));
  CHECK(line.point_at(99.0).y == doctest::Approx(2.0));
  CHECK(line.heading_at(0.5) == doctest::Approx(0.0));
  CHECK(line.heading_at(3.0) == doctest::Approx(M_PI / 2));

  const auto proj = line.project({1.0, 0.5});
  CHECK(proj.s == doctest::Approx(1.0));
  CHECK(proj.dist == doctest::Approx(0.5));
  CHECK(proj.point.x == doctest::Approx(1.0));

  CHECK_THROWS(Polyline({{0, 0}}));
  CHECK_THROWS(Polyline({{0, 0}, {0, 0}, {1, 0}}));
}

TEST_CASE("rect overlap matches a dense sampling oracle") {
  // Oracle: a rectangle pair overlaps iff some point of a fine grid
  // over A lies inside B (valid away from tangential contact).
  auto oracle = [](const OrientedRect& a, const OrientedRect& b) {
    auto inside = [](const OrientedRect& r, const Vec2& p) {
      const Vec2 local = world_to_ego(r.center, p);
      return std::abs(local.x) <= 0.5 * r.length && std::abs(local.y) <= 0.5 * r.width;
    };
    for (int i = 0; i <= 40; ++i) {
      for (int j = 0; j <= 40; ++j) {
        const Vec2 local{(i / 40.0 - 0.5) * a.length, (j / 40.0 - 0.5) * a.width};
        if (inside(b, ego_to_world(a.center, local))) return true;
      }
    }
    for (int i = 0; i <= 40; ++i) {
      for (int j = 0; j <= 40; ++j) {
        const Vec2 local{(i / 40.0 - 0.5) * b.length, (j / 40.0 - 0.5) * b.width};
        if (inside(a, ego_to_world(b.center, local))) return true;
      }
    }
    return false;
  };

  Rng rng(99);
  int checked = 0;
  for (int trial = 0; trial < 300; ++trial) {
    const OrientedRect a{{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-M_PI, M_PI)},
                         rng.uniform(0.5, 4.0), rng.uniform(0.5, 2.0)};
    const OrientedRect b{{rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-M_PI, M_PI)},
                         rng.uniform(0.5, 4.0), rng.uniform(0.5, 2.0)};
    const double clearance = rect_clearance(a, b);
    if (clearance > 0.0 && clearance < 0.08) continue;  // skip near-tangent cases
    CHECK(rects_overlap(a, b) == oracle(a, b));
    ++checked;
  }
  CHECK(checked > 200);
}

TEST_CASE("rect clearance of separated squares") {
  const OrientedRect a{{0, 0, 0}, 2, 2};
  const OrientedRect b{{5, 0, 0}, 2, 2};
  CHECK(rect_clearance(a, b) == doctest::Approx(3.0));
  const OrientedRect c{{1.5, 0, 0}, 2, 2};
  CHECK(rect_clearance(a, c) == doctest::Approx(0.0));
}

TEST_CASE("point in polygon") {
  const std::vector<Vec2> square = {{0, 0}, {4, 0}, {4, 4}, {0, 4}};
  CHECK(point_in_polygon({2, 2}, square));
  CHECK(!point_in_polygon({5, 2}, square));
  CHECK(!point_in_polygon({-1, -1}, square));
  // Non-convex L-shape.
  const std::vector<Vec2> ell = {{0, 0}, {4, 0}, {4, 2}, {2, 2}, {2, 4}, {0, 4}};
  CHECK(point_in_polygon({1, 3}, ell));
  CHECK(!point_in_polygon({3, 3}, ell));
  CHECK(polygon_area(ell) == doctest::Approx(12.0));
}
