#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fractal_fp/calculus.hpp"
#include "fractal_fp/curve.hpp"
#include "fractal_fp/errors.hpp"
#include "fractal_fp/kinetics.hpp"
#include "fractal_fp/mass_staircase.hpp"
#include "fractal_fp/numerics.hpp"

namespace ffp {

using XY = std::pair<double, double>;

struct PowerLawFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double fit_lo = 0.0;  ///< abscissa range actually used
  double fit_hi = 0.0;
  std::size_t point_count = 0;
};

/// Ordinary least squares y = slope·x + intercept on pairs already in
/// log-log space, optionally restricted to x in [range.first, range.second].
inline PowerLawFit fit_power_law(std::span<const XY> points, std::optional<XY> range = std::nullopt) {
  std::vector<XY> used;
  for (const auto& p : points)
    if (!range || (p.first >= range->first && p.first <= range->second)) used.push_back(p);
  require(used.size() >= 5, "fit_power_law: need at least 5 points in range, have " + std::to_string(used.size()));
  const auto n = static_cast<double>(used.size());
  double mx = 0.0, my = 0.0;
  for (const auto& [x, y] : used) {
    mx += x;
    my += y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  double lo = used.front().first, hi = used.front().first;
  for (const auto& [x, y] : used) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
    lo = std::min(lo, x);
    hi = std::max(hi, x);
  }
  require(sxx > 0.0, "fit_power_law: abscissa has zero variance");
  PowerLawFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0.0;
  for (const auto& [x, y] : used) {
    const double r = y - (fit.slope * x + fit.intercept);
    ss_res += r * r;
  }
  fit.r_squared = syy > 0.0 ? std::clamp(1.0 - ss_res / syy, 0.0, 1.0) : 1.0;
  fit.fit_lo = lo;
  fit.fit_hi = hi;
  fit.point_count = used.size();
  return fit;
}

/// Fits log y against log x for raw positive data.
inline PowerLawFit fit_power_law_raw(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "fit_power_law_raw: column lengths differ");
  std::vector<XY> pts;
  for (std::size_t i = 0; i < x.size(); ++i) {
    require(x[i] > 0.0 && y[i] > 0.0, "fit_power_law_raw: log-log fit needs positive data");
    pts.emplace_back(std::log(x[i]), std::log(y[i]));
  }
  return fit_power_law(pts);
}

/// |log V| below this is the singular band around V = 1.
inline constexpr double kShapeExclusion = 1e-3;

/// (log|θ|, log|log V|) for one sample, or nothing when the sample sits at the
/// base point, in the singular band, or in the underflow region.
inline std::optional<XY> density_shape_point(double radius, double density) {
  if (!(radius > 0.0) || !(density >= std::numeric_limits<double>::min()) || !std::isfinite(density))
    return std::nullopt;
  const double abs_log = std::abs(std::log(density));
  if (abs_log < kShapeExclusion) return std::nullopt;
  return XY{std::log(radius), std::log(abs_log)};
}

/// Time at which the closed-form prefactor (2πAt)^{-1/2} equals one, so that
/// |log V| = y²/(2At) exactly and log|log V| is linear in log y.
inline double unit_prefactor_time(double A) {
  require(A > 0.0, "unit_prefactor_time: A must be positive");
  return 1.0 / (2.0 * std::numbers::pi * A);
}

/// Samples the closed-form density at every chord midpoint; |θ| is the
/// Euclidean distance from the curve start.
inline std::vector<XY> density_shape_data(double t, double A, const FractalCurve& curve, const StaircaseTable& s,
                                          Convention c = Convention::variance) {
  require(t > 0.0 && A > 0.0, "density_shape_data: t and A must be positive");
  check_tables(curve, s);
  const auto& u = curve.params();
  const Point base = curve.origin();
  std::vector<XY> out;
  out.reserve(curve.segment_count());
  for (std::size_t k = 0; k < curve.segment_count(); ++k) {
    const double um = 0.5 * (u[k] + u[k + 1]);
    const double y = s.value_at(um);
    const double r = distance(base, curve.locate(um));
    if (auto p = density_shape_point(r, conjugate_density(y, t, A, c))) out.push_back(*p);
  }
  if (out.size() < 5)
    throw NumericalGuardError("density_shape_data: only " + std::to_string(out.size()) +
                              " usable samples after exclusions; need at least 5");
  return out;
}

struct MsdSeries {
  std::vector<double> times;
  std::vector<double> msd;
  Convention convention = Convention::variance;
};

/// Conjugate distance from the base point to the nearer domain end.
inline double conjugate_reach(const StaircaseTable& s) {
  const double right = s.upper();
  const double left = -s.lower();
  if (s.base_index() == 0) return right;
  if (s.base_index() + 1 == s.knot_count()) return left;
  return std::min(left, right);
}

/// Largest t whose kernel width stays within a third of the conjugate reach.
inline double max_admissible_time(double A, const StaircaseTable& s, Convention c = Convention::variance) {
  const double width = conjugate_reach(s) / 3.0;
  return width * width / (2.0 * effective_diffusivity(A, c));
}

/// ⟨L²⟩(t) = ∫_C L(θ)² V(θ, t) d_F^α θ with L the distance from the curve start.
inline MsdSeries msd_series(std::span<const double> times, double A, const FractalCurve& curve,
                            const StaircaseTable& s, Convention c = Convention::variance) {
  require(!times.empty(), "msd_series: need at least one time");
  require(A > 0.0, "msd_series: A must be positive");
  const double t_max = max_admissible_time(A, s, c);
  for (double t : times) {
    require(t > 0.0, "msd_series: times must be positive");
    if (t > t_max * (1.0 + 1e-12))
      throw NumericalGuardError("msd_series: t = " + format_double(t) +
                                " puts the kernel past a third of the conjugate domain; max admissible t = " +
                                format_double(t_max));
  }
  const Point base = curve.origin();
  MsdSeries out;
  out.convention = c;
  for (double t : times) {
    const auto integrand = CurveFunction::from_rule([&](const CurvePoint& p) {
      const double dx = p.x[0] - base[0], dy = p.x[1] - base[1];
      return (dx * dx + dy * dy) * conjugate_density(s.value_at(p.u), t, A, c);
    });
    out.times.push_back(t);
    out.msd.push_back(f_alpha_integral(integrand, curve, s));
  }
  return out;
}

inline PowerLawFit msd_exponent(const MsdSeries& series) { return fit_power_law_raw(series.times, series.msd); }

/// `count` log-spaced times spanning `decades` and ending at t_max.
inline std::vector<double> msd_times(double t_max, double decades, std::size_t count) {
  return log_spaced(t_max * std::pow(10.0, -decades), t_max, count);
}

/// Times spanning whole log-periods of the curve: one generator level scales
/// the conjugate coordinate by 1/N, hence time by 1/N².
inline std::vector<double> log_periodic_times(const FractalCurve& curve, double t_max, int periods,
                                              std::size_t count) {
  require(curve.branching() >= 2 && periods >= 1, "log_periodic_times: need a branching generator");
  const double n = static_cast<double>(curve.branching());
  return msd_times(t_max, periods * std::log10(n * n), count);
}

}  // namespace ffp
