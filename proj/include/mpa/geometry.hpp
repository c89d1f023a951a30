#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace mpa {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  bool operator==(const Vec2&) const = default;
  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  double squared_norm() const { return x * x + y * y; }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }

// Normalizes an angle to (-pi, pi].
double normalize_angle(double a);

struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;  // radians, normalized to (-pi, pi]

  Vec2 position() const { return {x, y}; }
};

Vec2 rotate(const Vec2& v, double angle);

// Maps a world-frame point into the ego frame (+x along ego heading).
Vec2 world_to_ego(const Pose2D& ego, const Vec2& world);
Vec2 ego_to_world(const Pose2D& ego, const Vec2& local);

// Polyline with cached cumulative arclength; used for routes.
class Polyline {
 public:
  Polyline() = default;
  explicit Polyline(std::vector<Vec2> points);

  const std::vector<Vec2>& points() const { return points_; }
  const std::vector<double>& arclength() const { return arclen_; }
  double length() const { return arclen_.empty() ? 0.0 : arclen_.back(); }
  std::size_t size() const { return points_.size(); }

  // Point at arclength s, clamped to [0, length].
  Vec2 point_at(double s) const;
  // Heading of the segment containing arclength s.
  double heading_at(double s) const;

  struct Projection {
    double s = 0.0;     // arclength of the closest point
    double dist = 0.0;  // unsigned distance to the polyline
    Vec2 point;         // the closest point itself
  };
  Projection project(const Vec2& p) const;

 private:
  std::vector<Vec2> points_;
  std::vector<double> arclen_;
};

// Axis-oriented rectangle given by centre pose and extents.
struct OrientedRect {
  Pose2D center;
  double length = 0.0;  // along heading
  double width = 0.0;

  std::array<Vec2, 4> corners() const;
  OrientedRect inflated(double margin) const;
};

// Exact rectangle intersection via the separating axis theorem.
bool rects_overlap(const OrientedRect& a, const OrientedRect& b);

// Minimum distance between two rectangles; 0 when they overlap.
double rect_clearance(const OrientedRect& a, const OrientedRect& b);

// Even-odd rule; points exactly on an edge count as inside on the
// lower-y side only (standard half-open crossing test).
bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& ring);

double polygon_area(const std::vector<Vec2>& ring);

}  // namespace mpa
