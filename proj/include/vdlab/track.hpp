#pragma once

#include <string>
#include <vector>

namespace vdlab {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

double distance(const Vec2& a, const Vec2& b);

// Closed polyline with arc-length lookup; the last point equals the first.
class PolylinePath {
 public:
  explicit PolylinePath(std::vector<Vec2> points);

  const std::vector<Vec2>& points() const { return points_; }
  double length() const { return cumulative_.back(); }

  // s is taken modulo the loop length.
  Vec2 point_at(double s) const;
  Vec2 tangent_at(double s) const;  // unit tangent

  struct Projection {
    double s = 0.0;        // arc-length of the closest point
    double dist = 0.0;     // unsigned distance
    double lateral = 0.0;  // signed: positive to the left of travel
  };
  // Exhaustive nearest-point search over all segments.
  Projection project(const Vec2& p) const;

  // Discrete curvature at each waypoint (three-point circumscribed circle),
  // sign following turn direction.
  std::vector<double> curvatures() const;

 private:
  std::vector<Vec2> points_;       // closed: back() == front()
  std::vector<double> cumulative_;  // arc length at each point, size == points
};

struct Track {
  std::vector<Vec2> centerline;  // closed
  double half_width = 0.0;
  std::vector<Vec2> raceline;    // closed; defaults to the centerline
};

// Two fixed 1:43-scale circuits of distinct shape; the first is used to
// generate training data, the second for testing and closed-loop runs.
std::pair<Track, Track> make_tracks();

void save_track_json(const Track& track, const std::string& path);
Track load_track_json(const std::string& path);

// Symmetric Hausdorff distance between two point sets.
double hausdorff_distance(const std::vector<Vec2>& a, const std::vector<Vec2>& b);

struct SpeedProfileParams {
  double v_min = 1.0;
  double v_max = 2.5;
  double a_lat_max = 4.0;   // lateral acceleration cap, m/s^2
  double a_accel = 3.0;     // forward pass limit, m/s^2
  double a_decel = 1.0;     // backward pass limit, m/s^2
};

// Curvature-limited target speed at every waypoint of a closed path, smoothed
// by wrap-around forward/backward acceleration passes.
std::vector<double> speed_profile(const PolylinePath& path, const SpeedProfileParams& params);

// Linear interpolation of a per-waypoint profile at arc-length s.
double profile_at(const PolylinePath& path, const std::vector<double>& profile, double s);

}  // namespace vdlab
