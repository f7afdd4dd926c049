#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "fractal_fp/curve.hpp"
#include "fractal_fp/errors.hpp"
#include "fractal_fp/numerics.hpp"

namespace ffp {

enum class Trend { growing, decaying, flat };

inline std::string_view to_string(Trend t) {
  switch (t) {
    case Trend::growing: return "growing";
    case Trend::decaying: return "decaying";
    case Trend::flat: return "flat";
  }
  return "?";
}

/// Log-ratio threshold separating growth, decay and flat level sequences.
inline constexpr double kTrendThreshold = 1e-3;

inline Trend classify_log_ratio(double log_ratio) {
  if (log_ratio > kTrendThreshold) return Trend::growing;
  if (log_ratio < -kTrendThreshold) return Trend::decaying;
  return Trend::flat;
}

struct LevelSum {
  int level;
  double sum;
};

struct MassEstimate {
  double alpha = 0.0;
  double a = 0.0;
  double b = 0.0;
  std::vector<LevelSum> level_values;
  double extrapolated = 0.0;
  double gamma_norm = 1.0;
  Trend trend = Trend::flat;
  /// Outward snap of a and b to knots of the finest requested level.
  double snap_lo = 0.0;
  double snap_hi = 0.0;
};

namespace detail {

/// Knot stride in the finest table for vertex-aligned subdivisions at `level`.
inline std::size_t level_stride(const FractalCurve& curve, int level) {
  std::size_t stride = 1;
  for (int i = level; i < curve.level(); ++i) stride *= curve.branching();
  return stride;
}

/// Knot range [first, last] covering [a, b] at the given stride, snapped outward.
inline std::pair<std::size_t, std::size_t> snapped_range(const FractalCurve& curve, std::size_t stride,
                                                         double a, double b) {
  const double cell = curve.spacing() * static_cast<double>(stride);
  const auto cells = static_cast<double>(curve.segment_count() / stride);
  const double pa = std::clamp(std::floor((a - curve.a0()) / cell + 1e-9), 0.0, cells);
  const double pb = std::clamp(std::ceil((b - curve.a0()) / cell - 1e-9), 0.0, cells);
  return {static_cast<std::size_t>(pa) * stride, static_cast<std::size_t>(pb) * stride};
}

inline std::vector<double> chord_lengths(const FractalCurve& curve, std::size_t first, std::size_t last,
                                         std::size_t stride) {
  std::vector<double> out;
  out.reserve((last - first) / stride);
  const auto& pts = curve.points();
  for (std::size_t k = first; k < last; k += stride) out.push_back(distance(pts[k], pts[k + stride]));
  return out;
}

inline double power_sum(const std::vector<double>& lengths, double alpha) {
  std::vector<double> terms(lengths.size());
  std::transform(lengths.begin(), lengths.end(), terms.begin(),
                 [alpha](double l) { return std::pow(l, alpha); });
  return pairwise_sum(terms);
}

inline double mean_tail_log_ratio(const std::vector<double>& sums) {
  const std::size_t pairs = sums.size() - 1;
  const std::size_t used = std::min<std::size_t>(3, pairs);
  double acc = 0.0;
  for (std::size_t j = pairs - used; j < pairs; ++j) acc += std::log(sums[j + 1] / sums[j]);
  return acc / static_cast<double>(used);
}

}  // namespace detail

/// Vertex-aligned subdivision sums sum |Δw|^α / Γ(α+1) over [a, b] for levels
/// 0..max_level, with a limit estimate.
inline MassEstimate mass(const FractalCurve& curve, double alpha, double a, double b, int max_level) {
  require(alpha >= 1.0, "mass: alpha must be >= 1");
  require(a >= curve.a0() && b <= curve.b0() && a < b, "mass: need a0 <= a < b <= b0");
  require(max_level >= 0 && max_level <= curve.level(), "mass: requested level exceeds the curve table");

  MassEstimate est;
  est.alpha = alpha;
  est.a = a;
  est.b = b;
  est.gamma_norm = lanczos_gamma(alpha + 1.0);
  std::vector<double> sums;
  for (int level = 0; level <= max_level; ++level) {
    const std::size_t stride = detail::level_stride(curve, level);
    const auto [first, last] = detail::snapped_range(curve, stride, a, b);
    const double s = detail::power_sum(detail::chord_lengths(curve, first, last, stride), alpha) / est.gamma_norm;
    est.level_values.push_back({level, s});
    sums.push_back(s);
    if (level == max_level) {
      est.snap_lo = a - curve.params()[first];
      est.snap_hi = curve.params()[last] - b;
    }
  }

  if (sums.size() < 2) {
    est.trend = Trend::flat;
    est.extrapolated = sums.back();
    return est;
  }
  const double ratio = detail::mean_tail_log_ratio(sums);
  est.trend = classify_log_ratio(ratio);
  switch (est.trend) {
    case Trend::flat: est.extrapolated = sums.back(); break;
    case Trend::growing: est.extrapolated = std::numeric_limits<double>::infinity(); break;
    case Trend::decaying: {
      // Aitken Δ² on the last three levels; exact (zero) for geometric decay.
      double limit = 0.0;
      if (sums.size() >= 3) {
        const double s0 = sums[sums.size() - 3], s1 = sums[sums.size() - 2], s2 = sums.back();
        const double denom = (s2 - s1) - (s1 - s0);
        if (denom != 0.0) limit = s2 - (s2 - s1) * (s2 - s1) / denom;
      }
      est.extrapolated = std::max(0.0, limit);
      break;
    }
  }
  return est;
}

struct DimensionTrial {
  double alpha;
  double log_ratio;
  Trend trend;
};

struct DimensionEstimate {
  double alpha_hat = 0.0;
  double alpha_low = 0.0;
  double alpha_high = 0.0;
  std::vector<DimensionTrial> diagnostics;
};

/// Bisection on α for the γ-dimension: sums grow across levels below it and
/// decay above it. Trials inside the flat band keep bisecting on the sign of
/// the raw log-ratio, so the estimate converges to the crossing itself.
inline DimensionEstimate estimate_dimension(const FractalCurve& curve, double alpha_low, double alpha_high,
                                            double tol) {
  require(alpha_low >= 1.0 && alpha_high > alpha_low, "estimate_dimension: need 1 <= alpha_low < alpha_high");
  require(tol > 0.0, "estimate_dimension: tol must be positive");
  require(curve.level() >= 1, "estimate_dimension: curve needs at least one refinement level");

  std::vector<std::vector<double>> chords;
  for (int level = 0; level <= curve.level(); ++level) {
    const std::size_t stride = detail::level_stride(curve, level);
    chords.push_back(detail::chord_lengths(curve, 0, curve.segment_count(), stride));
  }
  DimensionEstimate out;
  const auto trial = [&](double alpha) {
    std::vector<double> sums;
    for (const auto& c : chords) sums.push_back(detail::power_sum(c, alpha));
    const double r = detail::mean_tail_log_ratio(sums);
    out.diagnostics.push_back({alpha, r, classify_log_ratio(r)});
    return out.diagnostics.back();
  };

  const auto lo = trial(alpha_low);
  const auto hi = trial(alpha_high);
  if (lo.trend == Trend::flat && hi.trend == Trend::flat)
    throw PreconditionError("estimate_dimension: level sums are flat at both ends of the bracket; "
                            "use deeper refinement levels");
  if (lo.trend == Trend::flat) {
    out.alpha_hat = out.alpha_low = alpha_low;
    out.alpha_high = alpha_low + tol;
    return out;
  }
  if (hi.trend == Trend::flat) {
    out.alpha_hat = out.alpha_high = alpha_high;
    out.alpha_low = alpha_high - tol;
    return out;
  }
  if (lo.trend != Trend::growing || hi.trend != Trend::decaying)
    throw PreconditionError("estimate_dimension: bracket [" + format_double(alpha_low) + ", " +
                            format_double(alpha_high) + "] does not straddle the dimension");

  double a = alpha_low, b = alpha_high;
  while (b - a >= tol) {
    const double mid = 0.5 * (a + b);
    const auto t = trial(mid);
    if (t.log_ratio > 0.0) {
      a = mid;
    } else if (t.log_ratio < 0.0) {
      b = mid;
    } else {
      a = b = mid;
    }
  }
  out.alpha_low = a;
  out.alpha_high = b;
  out.alpha_hat = 0.5 * (a + b);
  return out;
}

struct ProbeReport {
  double reference_sum = 0.0;  ///< uniform vertex-aligned sum at the probe mesh
  double min_sum = 0.0;
  double min_ratio = 0.0;
  std::size_t trials = 0;
  bool violated = false;
};

/// Samples random vertex-aligned subdivisions of [a0, b0] whose gaps never
/// exceed the mesh of `mesh_level`, and compares their sums with the uniform
/// sum at that mesh. A violation means the vertex-aligned family does not
/// attain the infimum.
inline ProbeReport probe_subdivisions(const FractalCurve& curve, double alpha, int mesh_level,
                                      std::size_t trials, std::uint64_t seed) {
  require(mesh_level >= 0 && mesh_level <= curve.level(), "probe_subdivisions: mesh level outside the table");
  require(trials >= 1, "probe_subdivisions: need at least one trial");
  const std::size_t stride = detail::level_stride(curve, mesh_level);
  const std::size_t n = curve.segment_count();
  const auto& pts = curve.points();
  ProbeReport report;
  report.trials = trials;
  report.reference_sum = detail::power_sum(detail::chord_lengths(curve, 0, n, stride), alpha);
  report.min_sum = std::numeric_limits<double>::infinity();
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> gap(1, stride);
  for (std::size_t t = 0; t < trials; ++t) {
    std::vector<double> lengths;
    std::size_t k = 0;
    while (k < n) {
      const std::size_t next = std::min(n, k + gap(rng));
      lengths.push_back(distance(pts[k], pts[next]));
      k = next;
    }
    report.min_sum = std::min(report.min_sum, detail::power_sum(lengths, alpha));
  }
  const double g = lanczos_gamma(alpha + 1.0);
  report.reference_sum /= g;
  report.min_sum /= g;
  report.min_ratio = report.min_sum / report.reference_sum;
  report.violated = report.min_ratio < 1.0 - 1e-9;
  return report;
}

/// Cumulative mass u ↦ S(u) from the base knot p0, with its inverse.
/// Knot values are exact; between knots S is linear in u.
class StaircaseTable {
 public:
  double alpha() const { return alpha_; }
  double gamma_norm() const { return gamma_norm_; }
  std::size_t base_index() const { return base_; }
  double p0() const { return params_[base_]; }
  const std::vector<double>& params() const { return params_; }
  const std::vector<double>& values() const { return values_; }
  std::size_t knot_count() const { return values_.size(); }
  double lower() const { return values_.front(); }
  double upper() const { return values_.back(); }
  std::uint64_t fingerprint() const { return fingerprint_; }

  /// S(u), linear between knots.
  double value_at(double u) const {
    require(u >= params_.front() && u <= params_.back(), "staircase: parameter outside [a0, b0]");
    const double h = params_[1] - params_[0];
    auto k = static_cast<std::size_t>(std::clamp(std::floor((u - params_.front()) / h), 0.0,
                                                 static_cast<double>(values_.size() - 2)));
    // uniform knots: the floor above may be off by one through rounding
    if (u < params_[k] && k > 0) --k;
    if (u > params_[k + 1] && k + 2 < values_.size()) ++k;
    const double t = (u - params_[k]) / (params_[k + 1] - params_[k]);
    if (t == 0.0) return values_[k];
    if (t == 1.0) return values_[k + 1];
    return values_[k] + t * (values_[k + 1] - values_[k]);
  }

  /// S^{-1}(y) by binary search over the knot values.
  double parameter_at(double y) const {
    const double slack = 1e-12 * (upper() - lower());
    require(y >= lower() - slack && y <= upper() + slack,
            "staircase: coordinate " + format_double(y) + " outside [S(a0), S(b0)]");
    y = std::clamp(y, lower(), upper());
    const auto it = std::upper_bound(values_.begin(), values_.end(), y);
    if (it == values_.end()) return params_.back();
    const auto k = static_cast<std::size_t>(it - values_.begin()) - 1;
    const double t = (y - values_[k]) / (values_[k + 1] - values_[k]);
    if (t == 0.0) return params_[k];
    return params_[k] + t * (params_[k + 1] - params_[k]);
  }

  friend StaircaseTable build_staircase(const FractalCurve&, double, std::size_t);

 private:
  double alpha_ = 1.0;
  double gamma_norm_ = 1.0;
  std::size_t base_ = 0;
  std::vector<double> params_;
  std::vector<double> values_;
  std::uint64_t fingerprint_ = 0;
};

/// S_0 = 0 at the base knot; each chord adds |Δw|^α / Γ(α+1).
inline StaircaseTable build_staircase(const FractalCurve& curve, double alpha, std::size_t base_index) {
  require(alpha >= 1.0 && alpha <= static_cast<double>(curve.embedding_dim()),
          "build_staircase: alpha must lie in [1, embedding dimension]");
  require(base_index < curve.knot_count(), "build_staircase: base knot out of range");
  StaircaseTable s;
  s.alpha_ = alpha;
  s.gamma_norm_ = lanczos_gamma(alpha + 1.0);
  s.base_ = base_index;
  s.params_ = curve.params();
  const auto& pts = curve.points();
  const std::size_t n = curve.knot_count();
  s.values_.assign(n, 0.0);
  const auto chord_mass = [&](std::size_t k) {
    const double len = distance(pts[k], pts[k + 1]);
    if (!(len > 0.0)) throw PreconditionError("build_staircase: zero-length chord at knot " + std::to_string(k));
    return std::pow(len, alpha) / s.gamma_norm_;
  };
  CompensatedSum right;
  for (std::size_t k = base_index; k + 1 < n; ++k) {
    right.add(chord_mass(k));
    s.values_[k + 1] = right.value();
  }
  CompensatedSum left;
  for (std::size_t k = base_index; k > 0; --k) {
    left.add(chord_mass(k - 1));
    s.values_[k - 1] = -left.value();
  }
  std::string bytes(reinterpret_cast<const char*>(s.values_.data()), s.values_.size() * sizeof(double));
  bytes.append(reinterpret_cast<const char*>(&alpha), sizeof(double));
  s.fingerprint_ = fnv1a64(bytes);
  return s;
}

/// Staircase based at the curve start (p0 = a0, or the mirror centre).
inline StaircaseTable build_staircase(const FractalCurve& curve, double alpha) {
  return build_staircase(curve, alpha, curve.origin_index());
}

/// y = S(w^{-1}(θ)).
inline double conjugate_coordinate(const StaircaseTable& s, const FractalCurve& curve, const Point& theta) {
  return s.value_at(curve.invert(theta));
}

/// θ = w(S^{-1}(y)).
inline Point point_at_coordinate(const StaircaseTable& s, const FractalCurve& curve, double y) {
  return curve.locate(s.parameter_at(y));
}

}  // namespace ffp
