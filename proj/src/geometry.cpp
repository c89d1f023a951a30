#include "mpa/geometry.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace mpa {

double normalize_angle(double a) {
  double r = std::fmod(a, 2.0 * M_PI);
  if (r <= -M_PI) r += 2.0 * M_PI;
  if (r > M_PI) r -= 2.0 * M_PI;
  return r;
}

Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Vec2 world_to_ego(const Pose2D& ego, const Vec2& world) {
  return rotate(world - ego.position(), -ego.yaw);
}

Vec2 ego_to_world(const Pose2D& ego, const Vec2& local) {
  return ego.position() + rotate(local, ego.yaw);
}

Polyline::Polyline(std::vector<Vec2> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw std::invalid_argument("polyline needs >= 2 points");
  arclen_.resize(points_.size());
  arclen_[0] = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double seg = (points_[i] - points_[i - 1]).norm();
    if (seg <= 0.0) throw std::invalid_argument("polyline arclength must be strictly increasing");
    arclen_[i] = arclen_[i - 1] + seg;
  }
}

Vec2 Polyline::point_at(double s) const {
  if (s <= 0.0) return points_.front();
  if (s >= length()) return points_.back();
  const auto it = std::upper_bound(arclen_.begin(), arclen_.end(), s);
  const std::size_t i = static_cast<std::size_t>(it - arclen_.begin());
  const double t = (s - arclen_[i - 1]) / (arclen_[i] - arclen_[i - 1]);
  return points_[i - 1] + (points_[i] - points_[i - 1]) * t;
}

double Polyline::heading_at(double s) const {
  std::size_t i = 1;
  if (s > 0.0) {
    const auto it = std::upper_bound(arclen_.begin(), arclen_.end(), std::min(s, length()));
    i = std::min(static_cast<std::size_t>(it - arclen_.begin()), points_.size() - 1);
    if (i == 0) i = 1;
  }
  const Vec2 d = points_[i] - points_[i - 1];
  return std::atan2(d.y, d.x);
}

Polyline::Projection Polyline::project(const Vec2& p) const {
  Projection best;
  best.dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const Vec2 a = points_[i - 1];
    const Vec2 d = points_[i] - a;
    const double len2 = d.squared_norm();
    double t = len2 > 0.0 ? (p - a).dot(d) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const Vec2 c = a + d * t;
    const double dist = (p - c).norm();
    if (dist < best.dist) {
      best.dist = dist;
      best.point = c;
      best.s = arclen_[i - 1] + std::sqrt(len2) * t;
    }
  }
  return best;
}

std::array<Vec2, 4> OrientedRect::corners() const {
  const double hl = 0.5 * length;
  const double hw = 0.5 * width;
  const std::array<Vec2, 4> local = {Vec2{hl, hw}, Vec2{hl, -hw}, Vec2{-hl, -hw}, Vec2{-hl, hw}};
  std::array<Vec2, 4> out;
  for (std::size_t i = 0; i < 4; ++i) out[i] = ego_to_world(center, local[i]);
  return out;
}

OrientedRect OrientedRect::inflated(double margin) const {
  return {center, length + 2.0 * margin, width + 2.0 * margin};
}

namespace {

// Projects corners onto an axis and returns [min, max].
std::pair<double, double> project_onto(const std::array<Vec2, 4>& corners, const Vec2& axis) {
  double lo = corners[0].dot(axis);
  double hi = lo;
  for (std::size_t i = 1; i < 4; ++i) {
    const double v = corners[i].dot(axis);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  return {lo, hi};
}

double point_segment_dist(const Vec2& p, const Vec2& a, const Vec2& b) {
  const Vec2 d = b - a;
  const double len2 = d.squared_norm();
  double t = len2 > 0.0 ? (p - a).dot(d) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return (p - (a + d * t)).norm();
}

}  // namespace

bool rects_overlap(const OrientedRect& a, const OrientedRect& b) {
  const auto ca = a.corners();
  const auto cb = b.corners();
  const std::array<Vec2, 4> axes = {
      rotate({1, 0}, a.center.yaw), rotate({0, 1}, a.center.yaw),
      rotate({1, 0}, b.center.yaw), rotate({0, 1}, b.center.yaw)};
  for (const Vec2& axis : axes) {
    const auto [alo, ahi] = project_onto(ca, axis);
    const auto [blo, bhi] = project_onto(cb, axis);
    if (ahi < blo || bhi < alo) return false;
  }
  return true;
}

double rect_clearance(const OrientedRect& a, const OrientedRect& b) {
  if (rects_overlap(a, b)) return 0.0;
  const auto ca = a.corners();
  const auto cb = b.corners();
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      best = std::min(best, point_segment_dist(ca[i], cb[j], cb[(j + 1) % 4]));
      best = std::min(best, point_segment_dist(cb[i], ca[j], ca[(j + 1) % 4]));
    }
  }
  return best;
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& ring) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = ring[j];
    const Vec2& b = ring[i];
    if ((b.y > p.y) != (a.y > p.y)) {
      const double x_cross = b.x + (p.y - b.y) * (a.x - b.x) / (a.y - b.y);
      if (p.x < x_cross) inside = !inside;
    }
  }
  return inside;
}

double polygon_area(const std::vector<Vec2>& ring) {
  double acc = 0.0;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) acc += ring[j].cross(ring[i]);
  return 0.5 * std::abs(acc);
}

}  // namespace mpa
