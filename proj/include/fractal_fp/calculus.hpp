#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <utility>
#include <vector>

#include "fractal_fp/curve.hpp"
#include "fractal_fp/errors.hpp"
#include "fractal_fp/mass_staircase.hpp"
#include "fractal_fp/numerics.hpp"

namespace ffp {

/// A bounded real function on the curve: either a rule evaluated at curve
/// points, or samples at the knots (linear in u between them).
class CurveFunction {
 public:
  using Rule = std::function<double(const CurvePoint&)>;

  static CurveFunction from_rule(Rule rule) {
    CurveFunction f;
    f.rule_ = std::move(rule);
    return f;
  }

  static CurveFunction from_samples(std::vector<double> samples) {
    CurveFunction f;
    f.samples_ = std::move(samples);
    f.sampled_ = true;
    return f;
  }

  static CurveFunction constant(double c) {
    return from_rule([c](const CurvePoint&) { return c; });
  }

  bool is_sampled() const { return sampled_; }
  const std::vector<double>& samples() const { return samples_; }

  double at_knot(const FractalCurve& curve, std::size_t k) const {
    if (sampled_) {
      check_samples(curve);
      return samples_[k];
    }
    return rule_(curve.knot(k));
  }

  double at(const FractalCurve& curve, const CurvePoint& p) const {
    if (!sampled_) return rule_(p);
    check_samples(curve);
    const std::size_t k = curve.interval_of(p.u);
    const double t = (p.u - curve.params()[k]) / curve.spacing();
    if (t == 0.0) return samples_[k];
    return samples_[k] + t * (samples_[k + 1] - samples_[k]);
  }

  double operator()(const FractalCurve& curve, const CurvePoint& p) const { return at(curve, p); }

 private:
  void check_samples(const FractalCurve& curve) const {
    require(samples_.size() == curve.knot_count(), "curve function: sample count differs from knot count");
  }

  Rule rule_;
  std::vector<double> samples_;
  bool sampled_ = false;
};

/// A function of the conjugate coordinate y, sampled on the staircase image
/// of the knots.
struct GridFunction {
  std::vector<double> grid;
  std::vector<double> values;
  std::uint64_t staircase_fingerprint = 0;
};

inline void check_tables(const FractalCurve& curve, const StaircaseTable& s) {
  require(curve.knot_count() == s.knot_count() && curve.a0() == s.params().front() &&
              curve.b0() == s.params().back(),
          "staircase was not built on this curve");
}

/// φ[f](S(u_k)) = f(w(u_k)).
inline GridFunction phi(const CurveFunction& f, const FractalCurve& curve, const StaircaseTable& s) {
  check_tables(curve, s);
  GridFunction g{s.values(), std::vector<double>(curve.knot_count()), s.fingerprint()};
  for (std::size_t k = 0; k < curve.knot_count(); ++k) g.values[k] = f.at_knot(curve, k);
  return g;
}

inline CurveFunction phi_inverse(const GridFunction& g, const FractalCurve& curve, const StaircaseTable& s) {
  check_tables(curve, s);
  require(g.staircase_fingerprint == s.fingerprint() && g.grid.size() == s.knot_count(),
          "phi_inverse: grid does not belong to this staircase");
  return CurveFunction::from_samples(g.values);
}

namespace detail {

/// Three-point derivative at node k of a strictly increasing grid: central
/// with unequal-spacing weights inside, one-sided at the ends. Exact for
/// quadratics.
template <typename Values>
double stencil_derivative(const std::vector<double>& y, Values&& value, std::size_t k) {
  const std::size_t n = y.size();
  require(n >= 3, "derivative needs at least three grid points");
  if (k == 0) {
    const double h1 = y[1] - y[0], h2 = y[2] - y[1];
    if (!(h1 > 0.0 && h2 > 0.0)) throw PreconditionError("derivative: repeated conjugate coordinates");
    return -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * value(0) + (h1 + h2) / (h1 * h2) * value(1) -
           h1 / (h2 * (h1 + h2)) * value(2);
  }
  if (k == n - 1) {
    const double h1 = y[n - 2] - y[n - 3], h2 = y[n - 1] - y[n - 2];
    if (!(h1 > 0.0 && h2 > 0.0)) throw PreconditionError("derivative: repeated conjugate coordinates");
    return h2 / (h1 * (h1 + h2)) * value(n - 3) - (h1 + h2) / (h1 * h2) * value(n - 2) +
           (h1 + 2.0 * h2) / (h2 * (h1 + h2)) * value(n - 1);
  }
  const double h1 = y[k] - y[k - 1], h2 = y[k + 1] - y[k];
  if (!(h1 > 0.0 && h2 > 0.0)) throw PreconditionError("derivative: repeated conjugate coordinates");
  return -h2 / (h1 * (h1 + h2)) * value(k - 1) + (h2 - h1) / (h1 * h2) * value(k) +
         h1 / (h2 * (h1 + h2)) * value(k + 1);
}

}  // namespace detail

/// Ordinary derivative dg/dy on the grid.
inline GridFunction grid_derivative(const GridFunction& g) {
  GridFunction d{g.grid, std::vector<double>(g.grid.size()), g.staircase_fingerprint};
  const auto value = [&g](std::size_t k) { return g.values[k]; };
  for (std::size_t k = 0; k < g.grid.size(); ++k) d.values[k] = detail::stencil_derivative(g.grid, value, k);
  return d;
}

/// D_F^α f at every knot, as a sampled curve function.
inline CurveFunction f_alpha_derivative(const CurveFunction& f, const FractalCurve& curve,
                                        const StaircaseTable& s) {
  return phi_inverse(grid_derivative(phi(f, curve, s)), curve, s);
}

/// D_F^α f at parameter u: the knot stencil values, interpolated linearly in y.
inline double f_alpha_derivative_at(const CurveFunction& f, double u, const FractalCurve& curve,
                                    const StaircaseTable& s) {
  check_tables(curve, s);
  const auto& y = s.values();
  const auto value = [&](std::size_t k) { return f.at_knot(curve, k); };
  const std::size_t k = curve.interval_of(u);
  const double dk = detail::stencil_derivative(y, value, k);
  const double yu = s.value_at(u);
  const double t = (yu - y[k]) / (y[k + 1] - y[k]);
  if (t == 0.0) return dk;
  const double dk1 = detail::stencil_derivative(y, value, k + 1);
  if (t == 1.0) return dk1;
  return dk + t * (dk1 - dk);
}

inline double f_alpha_derivative(const CurveFunction& f, const Point& theta, const FractalCurve& curve,
                                 const StaircaseTable& s) {
  return f_alpha_derivative_at(f, curve.invert(theta), curve, s);
}

struct SnapReport {
  double snap_lo = 0.0;
  double snap_hi = 0.0;
};

/// Fα-integral over C(a, b): midpoint sum of f at chord midpoints times the
/// staircase increment. Non-knot endpoints snap outward.
inline double f_alpha_integral(const CurveFunction& f, double a, double b, const FractalCurve& curve,
                               const StaircaseTable& s, SnapReport* report = nullptr) {
  check_tables(curve, s);
  require(a >= curve.a0() && b <= curve.b0(), "f_alpha_integral: range outside [a0, b0]");
  require(a <= b, "f_alpha_integral: degenerate range (b < a)");
  if (report) *report = {};
  if (a == b) return 0.0;
  const auto [first, last] = detail::snapped_range(curve, 1, a, b);
  if (report) *report = {a - curve.params()[first], curve.params()[last] - b};
  const auto& u = curve.params();
  const auto& y = s.values();
  std::vector<double> terms(last - first);
  for (std::size_t k = first; k < last; ++k) {
    const double um = 0.5 * (u[k] + u[k + 1]);
    terms[k - first] = f.at(curve, {um, curve.locate(um)}) * (y[k + 1] - y[k]);
  }
  return pairwise_sum(terms);
}

/// Integral over the whole curve.
inline double f_alpha_integral(const CurveFunction& f, const FractalCurve& curve, const StaircaseTable& s) {
  return f_alpha_integral(f, curve.a0(), curve.b0(), curve, s);
}

/// F(u_k) = ∫_{C(a0, u_k)} f, sampled at every knot.
inline CurveFunction running_integral(const CurveFunction& f, const FractalCurve& curve, const StaircaseTable& s) {
  check_tables(curve, s);
  const auto& u = curve.params();
  const auto& y = s.values();
  std::vector<double> out(curve.knot_count(), 0.0);
  CompensatedSum acc;
  for (std::size_t k = 0; k + 1 < curve.knot_count(); ++k) {
    const double um = 0.5 * (u[k] + u[k + 1]);
    acc.add(f.at(curve, {um, curve.locate(um)}) * (y[k + 1] - y[k]));
    out[k + 1] = acc.value();
  }
  return CurveFunction::from_samples(std::move(out));
}

struct TaylorResult {
  double value = 0.0;
  std::vector<double> derivatives;  ///< (D_F^α)^n f at the base, n = 0..order
  double noise_bound = 0.0;         ///< rounding-noise bound on the partial sum
};

/// Partial sum of the fractal Taylor series about the base parameter, evaluated
/// at conjugate coordinate y_target. Derivatives come from a Fornberg stencil
/// of order+5 knots, strided so the spacing balances truncation against
/// rounding noise.
inline TaylorResult taylor_expand(const CurveFunction& f, double u_base, double y_target, int order,
                                  const FractalCurve& curve, const StaircaseTable& s) {
  check_tables(curve, s);
  require(order >= 0, "taylor_eval: order must be non-negative");
  const std::size_t knots = curve.knot_count();
  const std::size_t points = static_cast<std::size_t>(order) + 5;
  if (points > knots)
    throw NumericalGuardError("taylor_eval: order " + std::to_string(order) + " needs " + std::to_string(points) +
                              " knots; the curve table has " + std::to_string(knots));
  const auto& y = s.values();
  const double span = s.upper() - s.lower();
  const double mean_h = span / static_cast<double>(knots - 1);
  const double eps = std::numeric_limits<double>::epsilon();
  const double target_h = span * std::pow(eps, 1.0 / (order + 4.0));
  auto stride = static_cast<std::size_t>(std::max(1.0, std::round(target_h / mean_h)));
  stride = std::min(stride, (knots - 1) / (points - 1));

  const double y_base = s.value_at(u_base);
  const auto nearest = static_cast<std::size_t>(
      std::clamp(std::round((u_base - curve.a0()) / curve.spacing()), 0.0, static_cast<double>(knots - 1)));
  const std::size_t reach = (points - 1) * stride;
  const std::size_t half = (points / 2) * stride;
  std::size_t first = nearest >= half ? nearest - half : 0;
  first = std::min(first, knots - 1 - reach);

  std::vector<double> nodes(points), values(points);
  double gmax = 0.0;
  for (std::size_t i = 0; i < points; ++i) {
    const std::size_t k = first + i * stride;
    nodes[i] = y[k];
    values[i] = f.at_knot(curve, k);
    gmax = std::max(gmax, std::abs(values[i]));
  }
  const auto weights = fornberg_weights(y_base, nodes, order);
  const double delta = y_target - y_base;
  TaylorResult out;
  std::vector<double> terms;
  double factor = 1.0;  // delta^n / n!
  for (int n = 0; n <= order; ++n) {
    if (n > 0) factor *= delta / n;
    double d = 0.0, wsum = 0.0;
    for (std::size_t i = 0; i < points; ++i) {
      d += weights[static_cast<std::size_t>(n)][i] * values[i];
      wsum += std::abs(weights[static_cast<std::size_t>(n)][i]);
    }
    out.derivatives.push_back(d);
    terms.push_back(factor * d);
    out.noise_bound += 4.0 * eps * gmax * wsum * std::abs(factor);
  }
  for (double t : terms) out.value += t;
  if (out.noise_bound > 1e-6 * std::max(1.0, std::abs(out.value)))
    throw NumericalGuardError("taylor_eval: derivative noise " + format_double(out.noise_bound) +
                              " exceeds what the grid resolution supports at order " + std::to_string(order));
  return out;
}

inline double taylor_eval(const CurveFunction& f, const Point& theta_base, const Point& theta, int order,
                          const FractalCurve& curve, const StaircaseTable& s) {
  const double u_base = curve.invert(theta_base);
  const double y = conjugate_coordinate(s, curve, theta);
  return taylor_expand(f, u_base, y, order, curve, s).value;
}

}  // namespace ffp
