#include "vdlab/track.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace vdlab {

double distance(const Vec2& a, const Vec2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

PolylinePath::PolylinePath(std::vector<Vec2> points) : points_(std::move(points)) {
  if (points_.size() < 4) throw std::invalid_argument("PolylinePath: need at least 4 points");
  if (distance(points_.front(), points_.back()) > 1e-9) {
    throw std::invalid_argument("PolylinePath: polyline must be closed (last == first)");
  }
  cumulative_.resize(points_.size());
  cumulative_[0] = 0.0;
  for (std::size_t i = 1; i < points_.size(); ++i) {
    cumulative_[i] = cumulative_[i - 1] + distance(points_[i - 1], points_[i]);
  }
  if (!(length() > 0.0)) throw std::invalid_argument("PolylinePath: zero length");
}

namespace {
double wrap_s(double s, double total) {
  s = std::fmod(s, total);
  if (s < 0.0) s += total;
  return s;
}
}  // namespace

Vec2 PolylinePath::point_at(double s) const {
  s = wrap_s(s, length());
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const std::size_t hi = std::min(points_.size() - 1,
                                  static_cast<std::size_t>(it - cumulative_.begin()));
  const std::size_t lo = hi - 1;
  const double seg = cumulative_[hi] - cumulative_[lo];
  const double f = seg > 0.0 ? (s - cumulative_[lo]) / seg : 0.0;
  return {points_[lo].x + f * (points_[hi].x - points_[lo].x),
          points_[lo].y + f * (points_[hi].y - points_[lo].y)};
}

Vec2 PolylinePath::tangent_at(double s) const {
  s = wrap_s(s, length());
  const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), s);
  const std::size_t hi = std::min(points_.size() - 1,
                                  static_cast<std::size_t>(it - cumulative_.begin()));
  const std::size_t lo = hi - 1;
  const double dx = points_[hi].x - points_[lo].x;
  const double dy = points_[hi].y - points_[lo].y;
  const double n = std::hypot(dx, dy);
  return n > 0.0 ? Vec2{dx / n, dy / n} : Vec2{1.0, 0.0};
}

PolylinePath::Projection PolylinePath::project(const Vec2& p) const {
  Projection best;
  best.dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Vec2& a = points_[i];
    const Vec2& b = points_[i + 1];
    const double abx = b.x - a.x;
    const double aby = b.y - a.y;
    const double len2 = abx * abx + aby * aby;
    double f = len2 > 0.0 ? ((p.x - a.x) * abx + (p.y - a.y) * aby) / len2 : 0.0;
    f = std::clamp(f, 0.0, 1.0);
    const Vec2 q{a.x + f * abx, a.y + f * aby};
    const double d = distance(p, q);
    if (d < best.dist) {
      best.dist = d;
      best.s = cumulative_[i] + f * std::sqrt(len2);
      // left-of-travel sign via the segment tangent cross product
      const double cross = abx * (p.y - q.y) - aby * (p.x - q.x);
      best.lateral = cross >= 0.0 ? d : -d;
    }
  }
  return best;
}

std::vector<double> PolylinePath::curvatures() const {
  const std::size_t n = points_.size() - 1;  // unique points
  std::vector<double> out(points_.size(), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2& a = points_[(i + n - 1) % n];
    const Vec2& b = points_[i];
    const Vec2& c = points_[(i + 1) % n];
    const double area2 = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    const double d_ab = distance(a, b);
    const double d_bc = distance(b, c);
    const double d_ca = distance(c, a);
    const double denom = d_ab * d_bc * d_ca;
    out[i] = denom > 1e-12 ? 2.0 * area2 / denom : 0.0;
  }
  out[n] = out[0];
  return out;
}

namespace {

std::vector<Vec2> parametric_loop(int n, double (*fx)(double), double (*fy)(double)) {
  std::vector<Vec2> pts;
  pts.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * M_PI * static_cast<double>(i) / n;
    pts.push_back({fx(t), fy(t)});
  }
  pts.push_back(pts.front());
  return pts;
}

}  // namespace

std::pair<Track, Track> make_tracks() {
  // Track 1: ellipse, minimum corner radius b^2/a = 0.72 m.
  Track t1;
  t1.centerline = parametric_loop(
      400, [](double t) { return 2.0 * std::cos(t); }, [](double t) { return 1.2 * std::sin(t); });
  t1.half_width = 0.18;
  t1.raceline = t1.centerline;

  // Track 2: bean-shaped loop with two second-harmonic lobes.
  Track t2;
  t2.centerline = parametric_loop(
      400, [](double t) { return 1.6 * std::cos(t) + 0.30 * std::cos(2.0 * t); },
      [](double t) { return 1.9 * std::sin(t) - 0.25 * std::sin(2.0 * t); });
  t2.half_width = 0.18;
  t2.raceline = t2.centerline;

  return {t1, t2};
}

void save_track_json(const Track& track, const std::string& path) {
  nlohmann::json j;
  auto points = [](const std::vector<Vec2>& ps) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : ps) arr.push_back({p.x, p.y});
    return arr;
  };
  j["centerline"] = points(track.centerline);
  j["half_width"] = track.half_width;
  j["raceline"] = points(track.raceline);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_track_json: cannot open " + path);
  out << j.dump(2) << '\n';
}

Track load_track_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_track_json: cannot open " + path);
  nlohmann::json j;
  in >> j;
  Track t;
  auto points = [](const nlohmann::json& arr) {
    std::vector<Vec2> ps;
    for (const auto& p : arr) ps.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    return ps;
  };
  t.centerline = points(j.at("centerline"));
  t.half_width = j.at("half_width").get<double>();
  t.raceline = j.contains("raceline") ? points(j.at("raceline")) : t.centerline;
  return t;
}

double hausdorff_distance(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  auto directed = [](const std::vector<Vec2>& from, const std::vector<Vec2>& to) {
    double worst = 0.0;
    for (const auto& p : from) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : to) best = std::min(best, distance(p, q));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

std::vector<double> speed_profile(const PolylinePath& path, const SpeedProfileParams& params) {
  const auto kappa = path.curvatures();
  const std::size_t n = path.points().size();
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double k = std::abs(kappa[i]);
    const double v_curve = k > 1e-9 ? std::sqrt(params.a_lat_max / k) : params.v_max;
    v[i] = std::clamp(v_curve, params.v_min, params.v_max);
  }

  const auto& pts = path.points();
  auto seg = [&](std::size_t i) { return distance(pts[i], pts[i + 1]); };

  // Two wrap-around sweeps blend the caps into reachable speeds.
  for (int pass = 0; pass < 2; ++pass) {
    for (std::size_t i = 0; i + 1 < n; ++i) {  // forward: acceleration limit
      const double cap = std::sqrt(v[i] * v[i] + 2.0 * params.a_accel * seg(i));
      v[i + 1] = std::min(v[i + 1], cap);
    }
    v[0] = std::min(v[0], v[n - 1]);
    for (std::size_t i = n - 1; i-- > 0;) {  // backward: deceleration limit
      const double cap = std::sqrt(v[i + 1] * v[i + 1] + 2.0 * params.a_decel * seg(i));
      v[i] = std::min(v[i], cap);
    }
    v[n - 1] = std::min(v[n - 1], v[0]);
  }
  for (std::size_t i = 0; i < n; ++i) v[i] = std::max(v[i], params.v_min);
  return v;
}

double profile_at(const PolylinePath& path, const std::vector<double>& profile, double s) {
  const double total = path.length();
  s = wrap_s(s, total);
  const auto& pts = path.points();
  // locate the segment, then interpolate the endpoint values
  double acc = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double seg = distance(pts[i], pts[i + 1]);
    if (s <= acc + seg || i + 2 == pts.size()) {
      const double f = seg > 0.0 ? std::clamp((s - acc) / seg, 0.0, 1.0) : 0.0;
      return profile[i] + f * (profile[i + 1] - profile[i]);
    }
    acc += seg;
  }
  return profile.back();
}

}  // namespace vdlab
