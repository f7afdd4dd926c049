#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "fractal_fp/errors.hpp"

namespace ffp {

using Point = std::array<double, 2>;

inline double distance(const Point& a, const Point& b) { return std::hypot(b[0] - a[0], b[1] - a[1]); }

/// A point on a curve together with its parameter. Queries that already know
/// u never need geometric inversion.
struct CurvePoint {
  double u;
  Point x;
};

namespace geometry {

inline double cross(const Point& o, const Point& a, const Point& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

inline bool within_box(const Point& p, const Point& a, const Point& b, double eps) {
  return std::min(a[0], b[0]) - eps <= p[0] && p[0] <= std::max(a[0], b[0]) + eps &&
         std::min(a[1], b[1]) - eps <= p[1] && p[1] <= std::max(a[1], b[1]) + eps;
}

/// Closed-segment intersection test; touching counts. eps scales the
/// orientation tolerance.
inline bool segments_intersect(const Point& p1, const Point& p2, const Point& q1, const Point& q2,
                               double eps) {
  const double d1 = cross(q1, q2, p1);
  const double d2 = cross(q1, q2, p2);
  const double d3 = cross(p1, p2, q1);
  const double d4 = cross(p1, p2, q2);
  const auto sign = [eps](double v) { return v > eps ? 1 : (v < -eps ? -1 : 0); };
  const int s1 = sign(d1), s2 = sign(d2), s3 = sign(d3), s4 = sign(d4);
  if (s1 * s2 < 0 && s3 * s4 < 0) return true;
  if (s1 == 0 && within_box(p1, q1, q2, eps)) return true;
  if (s2 == 0 && within_box(p2, q1, q2, eps)) return true;
  if (s3 == 0 && within_box(q1, p1, p2, eps)) return true;
  if (s4 == 0 && within_box(q2, p1, p2, eps)) return true;
  return false;
}

/// True when some pair of non-adjacent chords meets, or two adjacent chords
/// fold back over each other. O(n^2): meant for generators and small levels.
inline bool polyline_self_intersects(const std::vector<Point>& pts, double eps = 1e-12) {
  const std::size_t n = pts.size() - 1;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    // adjacent chords share a vertex; only a reversal overlaps them
    const Point& a = pts[i];
    const Point& b = pts[i + 1];
    const Point& c = pts[i + 2];
    if (std::abs(cross(a, b, c)) <= eps &&
        (b[0] - a[0]) * (c[0] - b[0]) + (b[1] - a[1]) * (c[1] - b[1]) < 0.0)
      return true;
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 2; j < n; ++j)
      if (segments_intersect(pts[i], pts[i + 1], pts[j], pts[j + 1], eps)) return true;
  return false;
}

}  // namespace geometry

/// Generator polyline from (0,0) to (1,0). Every sub-segment is replaced by a
/// scaled, rotated copy of the whole polyline at each refinement level.
struct GeneratorSpec {
  std::vector<Point> vertices;

  std::size_t segment_count() const { return vertices.empty() ? 0 : vertices.size() - 1; }

  /// Common length ratio r of the sub-segments (valid after validate()).
  double ratio() const { return distance(vertices[0], vertices[1]); }

  /// Closed-form similarity dimension log N / log(1/r); 1 for the identity generator.
  double similarity_dimension() const {
    const auto n = segment_count();
    if (n == 1) return 1.0;
    return std::log(static_cast<double>(n)) / std::log(1.0 / ratio());
  }

  void validate() const {
    require(vertices.size() >= 2, "generator needs at least two vertices");
    const auto close = [](const Point& p, const Point& q) { return distance(p, q) <= 1e-12; };
    require(close(vertices.front(), {0.0, 0.0}), "generator must start at (0,0)");
    require(close(vertices.back(), {1.0, 0.0}), "generator must end at (1,0)");
    const std::size_t n = segment_count();
    const double r = ratio();
    for (std::size_t i = 0; i < n; ++i) {
      const double ri = distance(vertices[i], vertices[i + 1]);
      require(ri > 0.0, "generator has a zero-length segment");
      require(std::abs(ri - r) <= 1e-9 * r, "generator segments must share a common length ratio");
    }
    if (n == 1) {
      require(std::abs(r - 1.0) <= 1e-12, "single-segment generator must be the unit segment");
    } else {
      require(r > 0.0 && r < 1.0, "generator ratio must lie in (0,1)");
      require(static_cast<double>(n) * r >= 1.0 - 1e-12, "generator must satisfy N*r >= 1");
    }
    require(!geometry::polyline_self_intersects(vertices), "generator polyline self-intersects");
  }

  /// One segment, no refinement: the level-m curve is always the unit chord.
  static GeneratorSpec identity() { return {{{0.0, 0.0}, {1.0, 0.0}}}; }

  /// The unit segment split at its midpoint; refines to 2^m equal chords.
  static GeneratorSpec segment() { return {{{0.0, 0.0}, {0.5, 0.0}, {1.0, 0.0}}}; }

  static GeneratorSpec koch() {
    return {{{0.0, 0.0}, {1.0 / 3.0, 0.0}, {0.5, std::sqrt(3.0) / 6.0}, {2.0 / 3.0, 0.0}, {1.0, 0.0}}};
  }

  /// Eight quarter-length segments (quadratic Koch, type 2); dimension 3/2.
  static GeneratorSpec quadratic_koch() {
    return {{{0.0, 0.0},
             {0.25, 0.0},
             {0.25, 0.25},
             {0.5, 0.25},
             {0.5, 0.0},
             {0.5, -0.25},
             {0.75, -0.25},
             {0.75, 0.0},
             {1.0, 0.0}}};
  }
};

struct BuildOptions {
  /// Euclidean distance from the curve start to its end.
  double scale = 1.0;
  /// Point-reflect the curve through its start and prepend the copy, so the
  /// start sits in the middle of the parameter interval.
  bool two_sided = false;
  std::size_t max_vertices = (std::size_t{1} << 24) + 1;  // 4^12 + 1
};

class FractalCurve;
FractalCurve build_curve(const GeneratorSpec& spec, int level, double a0, double b0,
                         const BuildOptions& options = {});

/// Level-m polyline approximation of a self-similar curve with uniform
/// parameter knots. Immutable after construction.
class FractalCurve {
 public:
  const GeneratorSpec& generator() const { return generator_; }
  int level() const { return level_; }
  int embedding_dim() const { return 2; }
  double a0() const { return params_.front(); }
  double b0() const { return params_.back(); }
  double scale() const { return scale_; }
  bool two_sided() const { return two_sided_; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<Point>& points() const { return points_; }
  std::size_t knot_count() const { return params_.size(); }
  std::size_t segment_count() const { return params_.size() - 1; }
  double spacing() const { return spacing_; }
  std::size_t branching() const { return generator_.segment_count(); }

  /// Knot index of the curve start (the mirror centre for two-sided curves).
  std::size_t origin_index() const { return origin_index_; }
  const Point& origin() const { return points_[origin_index_]; }

  CurvePoint knot(std::size_t k) const { return {params_[k], points_[k]}; }

  /// Bounding-box diagonal; the reference length for geometric tolerances.
  double diameter() const {
    Point lo = points_.front(), hi = points_.front();
    for (const auto& p : points_) {
      lo = {std::min(lo[0], p[0]), std::min(lo[1], p[1])};
      hi = {std::max(hi[0], p[0]), std::max(hi[1], p[1])};
    }
    return distance(lo, hi);
  }

  /// Index k of the knot interval [u_k, u_{k+1}] containing u.
  std::size_t interval_of(double u) const {
    const double pos = (u - a0()) / spacing_;
    const auto last = segment_count() - 1;
    if (!(pos > 0.0)) return 0;
    return std::min(static_cast<std::size_t>(std::floor(pos)), last);
  }

  /// w(u) by piecewise-linear evaluation; exact at knots.
  Point locate(double u) const {
    require(u >= a0() && u <= b0(), "locate: parameter " + std::to_string(u) + " outside [a0, b0]");
    const std::size_t k = interval_of(u);
    const double t = (u - params_[k]) / spacing_;
    if (t == 0.0) return points_[k];
    if (t >= 1.0) return points_[k + 1];
    const Point& p = points_[k];
    const Point& q = points_[k + 1];
    return {p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])};
  }

  CurvePoint at(double u) const { return {u, locate(u)}; }

  double default_tolerance() const { return 1e-12 * diameter(); }

  /// Parameter of a point on the polyline, found by chord search.
  double invert(const Point& x) const { return invert(x, default_tolerance()); }

  double invert(const Point& x, double tol) const {
    double best = std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    double best_t = 0.0;
    for (std::size_t k = 0; k < segment_count(); ++k) {
      const Point& p = points_[k];
      const Point& q = points_[k + 1];
      const double dx = q[0] - p[0], dy = q[1] - p[1];
      double t = ((x[0] - p[0]) * dx + (x[1] - p[1]) * dy) / (dx * dx + dy * dy);
      t = std::clamp(t, 0.0, 1.0);
      const double d = std::hypot(p[0] + t * dx - x[0], p[1] + t * dy - x[1]);
      if (d < best) {
        best = d;
        best_k = k;
        best_t = t;
      }
      if (d == 0.0) break;
    }
    if (best > tol)
      throw OffCurveError("invert: point is " + std::to_string(best) + " from the curve", best);
    // knots map to their exact parameter
    if (distance(x, points_[best_k]) <= tol) return params_[best_k];
    if (distance(x, points_[best_k + 1]) <= tol) return params_[best_k + 1];
    return params_[best_k] + best_t * spacing_;
  }

  friend FractalCurve build_curve(const GeneratorSpec&, int, double, double, const BuildOptions&);

 private:
  GeneratorSpec generator_;
  int level_ = 0;
  double scale_ = 1.0;
  bool two_sided_ = false;
  double spacing_ = 1.0;
  std::size_t origin_index_ = 0;
  std::vector<double> params_;
  std::vector<Point> points_;
};

namespace detail {

/// Replaces every chord of pts with the generator; chord endpoints are copied,
/// never recomputed, so each level's vertices reappear bit-identically.
inline std::vector<Point> refine(const std::vector<Point>& pts, const std::vector<std::complex<double>>& gen) {
  const std::size_t n = gen.size() - 1;
  std::vector<Point> out;
  out.reserve((pts.size() - 1) * n + 1);
  for (std::size_t k = 0; k + 1 < pts.size(); ++k) {
    const std::complex<double> p(pts[k][0], pts[k][1]);
    const std::complex<double> d = std::complex<double>(pts[k + 1][0], pts[k + 1][1]) - p;
    out.push_back(pts[k]);
    for (std::size_t i = 1; i < n; ++i) {
      const auto z = p + d * gen[i];
      out.push_back({z.real(), z.imag()});
    }
  }
  out.push_back(pts.back());
  return out;
}

}  // namespace detail

/// Builds the level-m polyline of the curve generated by spec on [a0, b0].
/// The i-th generator copy occupies the i-th equal parameter sub-interval.
inline FractalCurve build_curve(const GeneratorSpec& spec, int level, double a0, double b0,
                                const BuildOptions& options) {
  spec.validate();
  require(level >= 0, "build_curve: level must be non-negative");
  require(b0 > a0, "build_curve: need b0 > a0");
  require(options.scale > 0.0, "build_curve: scale must be positive");
  const std::size_t n = spec.segment_count();
  double count = 1.0;
  for (int i = 0; i < level; ++i) count *= static_cast<double>(n);
  const double sides = options.two_sided ? 2.0 : 1.0;
  require(sides * count + 1.0 <= static_cast<double>(options.max_vertices),
          "build_curve: level " + std::to_string(level) + " exceeds the vertex cap");

  std::vector<std::complex<double>> gen;
  for (const auto& v : spec.vertices) gen.emplace_back(v[0], v[1]);
  std::vector<Point> pts = {{0.0, 0.0}, {options.scale, 0.0}};
  for (int i = 0; i < level; ++i) pts = detail::refine(pts, gen);

  FractalCurve c;
  c.generator_ = spec;
  c.level_ = level;
  c.scale_ = options.scale;
  c.two_sided_ = options.two_sided;
  const std::size_t m = pts.size() - 1;
  c.spacing_ = (b0 - a0) / static_cast<double>(m);
  if (options.two_sided) {
    const double lo = a0 - (b0 - a0);
    c.points_.reserve(2 * m + 1);
    for (std::size_t k = m; k >= 1; --k) c.points_.push_back({-pts[k][0], -pts[k][1]});
    c.points_.insert(c.points_.end(), pts.begin(), pts.end());
    c.params_.resize(2 * m + 1);
    for (std::size_t k = 0; k <= 2 * m; ++k) c.params_[k] = lo + static_cast<double>(k) * c.spacing_;
    c.params_[m] = a0;
    c.origin_index_ = m;
  } else {
    c.points_ = std::move(pts);
    c.params_.resize(m + 1);
    for (std::size_t k = 0; k <= m; ++k) c.params_[k] = a0 + static_cast<double>(k) * c.spacing_;
    c.origin_index_ = 0;
  }
  c.params_.back() = b0;
  for (std::size_t k = 0; k + 1 < c.points_.size(); ++k)
    require(distance(c.points_[k], c.points_[k + 1]) > 0.0, "build_curve: repeated consecutive vertex");
  return c;
}

}  // namespace ffp
