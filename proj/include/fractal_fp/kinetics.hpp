#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fractal_fp/curve.hpp"
#include "fractal_fp/errors.hpp"
#include "fractal_fp/mass_staircase.hpp"
#include "fractal_fp/numerics.hpp"

namespace ffp {

/// How the diffusion constant A enters the closed-form density.
///
/// `variance`: V'(y,t) = (2πAt)^{-1/2} exp(-y²/(2At)), which solves
///          ∂V/∂t = (A/2) ∂²V/∂y². Used for figure reproduction.
/// `heat_kernel`: V'(y,t) = (4πAt)^{-1/2} exp(-y²/(4At)), the fundamental
///          solution of ∂V/∂t = A ∂²V/∂y² as the equation is written.
enum class Convention { variance, heat_kernel };

inline std::string_view to_string(Convention c) { return c == Convention::variance ? "variance" : "heat_kernel"; }

/// Coefficient D of ∂V/∂t = D ∂²V/∂y² whose fundamental solution the
/// convention's closed form is.
inline double effective_diffusivity(double A, Convention c) { return c == Convention::variance ? 0.5 * A : A; }

/// Closed-form density in the conjugate coordinate for a δ(y) start.
inline double conjugate_density(double y, double t, double A, Convention c = Convention::variance) {
  if (!(t > 0.0)) throw PreconditionError("diffusion solution needs t > 0");
  require(A > 0.0, "diffusion solution needs A > 0");
  const double four_dt = 4.0 * effective_diffusivity(A, c) * t;
  return std::exp(-y * y / four_dt) / std::sqrt(std::numbers::pi * four_dt);
}

/// V(θ, t) on the curve: the conjugate closed form at y = J(θ).
inline double diffusion_solution(double t, double A, const Point& theta, const FractalCurve& curve,
                                 const StaircaseTable& s, Convention c = Convention::variance) {
  if (!(t > 0.0)) throw PreconditionError("diffusion_solution: t must be positive");
  return conjugate_density(conjugate_coordinate(s, curve, theta), t, A, c);
}

struct UniformGrid {
  double lo = 0.0;
  double hi = 1.0;
  std::size_t size = 2;

  double step() const { return (hi - lo) / static_cast<double>(size - 1); }
  double at(std::size_t i) const { return i + 1 == size ? hi : lo + static_cast<double>(i) * step(); }
};

inline UniformGrid make_grid(double lo, double hi, std::size_t points) {
  require(points >= 3 && hi > lo, "grid needs hi > lo and at least three points");
  return {lo, hi, points};
}

/// Uniform grid spanning the staircase image [S(a0), S(b0)].
inline UniformGrid conjugate_grid(const StaircaseTable& s, std::size_t points) {
  return make_grid(s.lower(), s.upper(), points);
}

inline double trapezoid(const UniformGrid& g, std::span<const double> v) {
  require(v.size() == g.size, "trapezoid: value count differs from grid size");
  std::vector<double> terms(v.begin(), v.end());
  terms.front() *= 0.5;
  terms.back() *= 0.5;
  return pairwise_sum(terms) * g.step();
}

enum class DensityOrigin { analytic, propagated, stepped };

struct DensitySnapshot {
  double t = 0.0;
  UniformGrid grid;
  std::vector<double> values;
  double normalization = 0.0;
  DensityOrigin origin = DensityOrigin::analytic;
  double escaped_mass = 0.0;  ///< mass lost through the domain ends in the last step
};

inline DensitySnapshot analytic_snapshot(const UniformGrid& grid, double t, double A, Convention c) {
  DensitySnapshot snap{t, grid, std::vector<double>(grid.size), 0.0, DensityOrigin::analytic, 0.0};
  for (std::size_t i = 0; i < grid.size; ++i) snap.values[i] = conjugate_density(grid.at(i), t, A, c);
  snap.normalization = trapezoid(grid, snap.values);
  return snap;
}

/// L1 distance ∫|a - b| dy between two snapshots on the same grid.
inline double l1_distance(const DensitySnapshot& a, const DensitySnapshot& b) {
  require(a.grid.size == b.grid.size && a.grid.lo == b.grid.lo && a.grid.hi == b.grid.hi,
          "l1_distance: snapshots live on different grids");
  std::vector<double> diff(a.values.size());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = std::abs(a.values[i] - b.values[i]);
  return trapezoid(a.grid, diff);
}

/// Transition density p'(y'+Δ | y', τ) in the conjugate coordinate.
class TransitionKernel {
 public:
  enum class Kind { gaussian, drifting, custom };

  /// p' = (πτ)^{-1/2} exp(-Δ²/τ): variance τ/2 per step.
  static TransitionKernel gaussian(double tau) { return drifting(tau, 0.0, Kind::gaussian); }

  /// p' ∝ exp(-(Δ - vτ)²/τ).
  static TransitionKernel drifting(double tau, double velocity) { return drifting(tau, velocity, Kind::drifting); }

  /// Arbitrary density in Δ; `width` is its standard deviation, used for the
  /// resolution guard and the quadrature window.
  static TransitionKernel custom(double tau, double width, std::function<double(double)> density) {
    require(tau > 0.0 && width > 0.0, "kernel: tau and width must be positive");
    TransitionKernel k;
    k.kind_ = Kind::custom;
    k.tau_ = tau;
    k.time_step_ = tau;
    k.width_ = width;
    k.density_ = std::move(density);
    return k;
  }

  Kind kind() const { return kind_; }
  double tau() const { return tau_; }
  double velocity() const { return velocity_; }
  double width() const { return width_; }
  double center() const { return velocity_ * tau_; }
  /// Time advanced by one application (defaults to τ).
  double time_step() const { return time_step_; }
  TransitionKernel with_time_step(double dt) const {
    TransitionKernel k = *this;
    k.time_step_ = dt;
    return k;
  }

  double density(double delta) const {
    if (kind_ == Kind::custom) return density_(delta);
    const double x = delta - velocity_ * tau_;
    return std::exp(-x * x / tau_) / std::sqrt(std::numbers::pi * tau_);
  }

  /// Mass of the kernel started at `from` landing inside [lo, hi]; closed
  /// form for the gaussian kinds.
  std::optional<double> inside_fraction(double from, double lo, double hi) const {
    if (kind_ == Kind::custom) return std::nullopt;
    const double c = from + velocity_ * tau_;
    const double st = std::sqrt(tau_);
    return 0.5 * (std::erf((hi - c) / st) - std::erf((lo - c) / st));
  }

 private:
  static TransitionKernel drifting(double tau, double velocity, Kind kind) {
    require(tau > 0.0, "kernel: tau must be positive");
    TransitionKernel k;
    k.kind_ = kind;
    k.tau_ = tau;
    k.time_step_ = tau;
    k.velocity_ = velocity;
    k.width_ = std::sqrt(tau / 2.0);
    return k;
  }

  Kind kind_ = Kind::gaussian;
  double tau_ = 1.0;
  double time_step_ = 1.0;
  double velocity_ = 0.0;
  double width_ = 1.0;
  std::function<double(double)> density_;
};

/// Gaussian kernel advancing ∂V/∂t = D ∂²V/∂y² by dt. The kernel's diffusion
/// coefficient per unit τ is 1/4, so τ = 4·D·dt.
inline TransitionKernel kernel_for_diffusion(double D, double dt) {
  require(D > 0.0 && dt > 0.0, "kernel_for_diffusion: D and dt must be positive");
  return TransitionKernel::gaussian(4.0 * D * dt).with_time_step(dt);
}

/// Escape fraction above which a propagation step is rejected.
inline constexpr double kEscapeLimit = 1e-6;

/// One Chapman-Kolmogorov step V'(y, t+τ) = ∫ p'(y|y',τ) V'(y',t) dy' by
/// trapezoid quadrature on the uniform conjugate grid.
inline DensitySnapshot chapman_kolmogorov_step(const DensitySnapshot& v, const TransitionKernel& kernel) {
  const UniformGrid& g = v.grid;
  const std::size_t n = g.size;
  require(v.values.size() == n, "chapman_kolmogorov_step: snapshot values do not match its grid");
  const double dy = g.step();
  if (kernel.width() < 3.0 * dy)
    throw NumericalGuardError("chapman_kolmogorov_step: kernel width " + format_double(kernel.width()) +
                              " is below three grid spacings (" + format_double(3.0 * dy) + ")");

  const double reach = std::abs(kernel.center()) + 12.0 * kernel.width();
  const auto band = static_cast<std::ptrdiff_t>(
      std::min<double>(static_cast<double>(n - 1), std::ceil(reach / dy)));
  std::vector<double> kern(static_cast<std::size_t>(2 * band + 1));
  for (std::ptrdiff_t d = -band; d <= band; ++d)
    kern[static_cast<std::size_t>(d + band)] = kernel.density(static_cast<double>(d) * dy);
  const auto weight = [&](std::size_t j) { return (j == 0 || j + 1 == n) ? 0.5 * dy : dy; };

  DensitySnapshot out{v.t + kernel.time_step(), g, std::vector<double>(n, 0.0), 0.0,
                      DensityOrigin::propagated, 0.0};
  const auto sn = static_cast<std::ptrdiff_t>(n);
  parallel_for(n, [&](std::size_t i) {
    const auto si = static_cast<std::ptrdiff_t>(i);
    const std::ptrdiff_t j0 = std::max<std::ptrdiff_t>(0, si - band);
    const std::ptrdiff_t j1 = std::min<std::ptrdiff_t>(sn - 1, si + band);
    double acc = 0.0;
    for (std::ptrdiff_t j = j0; j <= j1; ++j)
      acc += weight(static_cast<std::size_t>(j)) * kern[static_cast<std::size_t>(si - j + band)] *
             v.values[static_cast<std::size_t>(j)];
    out.values[i] = acc;
  });

  const double before = trapezoid(g, v.values);
  std::vector<double> lost(n);
  for (std::size_t j = 0; j < n; ++j) {
    double inside = 0.0;
    if (auto f = kernel.inside_fraction(g.at(j), g.lo, g.hi)) {
      inside = *f;
    } else {
      const auto sj = static_cast<std::ptrdiff_t>(j);
      for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, sj - band); i <= std::min(sn - 1, sj + band); ++i)
        inside += weight(static_cast<std::size_t>(i)) * kern[static_cast<std::size_t>(i - sj + band)];
    }
    lost[j] = weight(j) * v.values[j] * std::max(0.0, 1.0 - inside);
  }
  out.escaped_mass = pairwise_sum(lost);
  if (out.escaped_mass > kEscapeLimit * before)
    throw NumericalGuardError("chapman_kolmogorov_step: " + format_double(out.escaped_mass) +
                              " of the mass escapes the conjugate domain; the domain ends are too close");
  const double after = trapezoid(g, out.values);
  if (after > 0.0) {
    const double scale = before / after;
    for (double& x : out.values) x *= scale;
  }
  out.normalization = before;
  return out;
}

/// Advances to t_end with one exact-semigroup gaussian step of ∂V = D ∂²V.
inline DensitySnapshot evolve_chapman_kolmogorov(const DensitySnapshot& v, double D, double t_end) {
  require(t_end > v.t, "evolve_chapman_kolmogorov: t_end must lie after the snapshot time");
  auto out = chapman_kolmogorov_step(v, kernel_for_diffusion(D, t_end - v.t));
  out.t = t_end;
  return out;
}

struct MomentSet {
  double tau = 0.0;
  double center = 0.0;              ///< y'
  std::vector<double> moments;      ///< M̃_n, n = 0..n_max
  std::vector<double> coefficients; ///< Ã^(n) = M̃_n / (n! τ); index 0 unused
  std::vector<double> tail_bounds;  ///< bound on |Δ|^n mass beyond the quadrature window
  bool near_boundary = false;

  double drift() const { return coefficients.at(1); }
  double diffusion() const { return coefficients.at(2); }
};

/// Transitional moments M̃_n = ∫ Δ'^n p'(y'+Δ' | y', τ) dΔ' by composite
/// Simpson over |Δ' - centre| ≤ 8·width. The ±∞ limits stand in for the
/// domain ends, so y' must sit at least 6√τ inside them.
inline MomentSet transitional_moments(const TransitionKernel& kernel, double y_prime, int n_max, double lo,
                                      double hi) {
  require(n_max >= 0, "transitional_moments: n_max must be non-negative");
  const double guard = 6.0 * std::sqrt(kernel.tau());
  if (y_prime - lo < guard || hi - y_prime < guard)
    throw PreconditionError("transitional_moments: y' = " + format_double(y_prime) + " lies within 6*sqrt(tau) = " +
                            format_double(guard) + " of the conjugate domain end; infinite limits do not apply");
  MomentSet m;
  m.tau = kernel.tau();
  m.center = y_prime;
  m.near_boundary = (y_prime - lo < 8.0 * std::sqrt(kernel.tau())) || (hi - y_prime < 8.0 * std::sqrt(kernel.tau()));
  const double half = 8.0 * kernel.width();
  const double c = kernel.center();
  double factorial = 1.0;
  for (int n = 0; n <= n_max; ++n) {
    if (n > 0) factorial *= n;
    const double mn = simpson([&](double d) { return std::pow(d, n) * kernel.density(d); }, c - half, c + half, 4096);
    m.moments.push_back(mn);
    m.coefficients.push_back(n == 0 ? 0.0 : mn / (factorial * kernel.tau()));
    if (kernel.kind() == TransitionKernel::Kind::custom) {
      m.tail_bounds.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      // 2∫_{8w}^∞ x^n p(x) dx = τ^{n/2} Γ((n+1)/2, 32) / √π about the kernel centre
      m.tail_bounds.push_back(std::pow(kernel.tau(), 0.5 * n) * upper_incomplete_gamma_half(n + 1, 32.0) /
                              std::sqrt(std::numbers::pi));
    }
  }
  return m;
}

inline MomentSet transitional_moments(const TransitionKernel& kernel, double y_prime, int n_max,
                                      const StaircaseTable& s) {
  return transitional_moments(kernel, y_prime, n_max, s.lower(), s.upper());
}

/// Curve-side moments M_n(θ') = M̃_n(J(θ')).
inline MomentSet transitional_moments(const TransitionKernel& kernel, const Point& theta_prime, int n_max,
                                      const FractalCurve& curve, const StaircaseTable& s) {
  return transitional_moments(kernel, conjugate_coordinate(s, curve, theta_prime), n_max, s);
}

/// Kramers-Moyal coefficients Ã^(n) = M̃_n/(n! τ), keeping the term linear in τ.
inline MomentSet kramers_moyal_coefficients(const TransitionKernel& kernel, double y_prime, int n_max,
                                            const StaircaseTable& s) {
  require(n_max >= 2, "kramers_moyal_coefficients: need n_max >= 2 for drift and diffusion");
  return transitional_moments(kernel, y_prime, n_max, s);
}

inline MomentSet kramers_moyal_coefficients(const TransitionKernel& kernel, double y_prime, int n_max, double lo,
                                            double hi) {
  require(n_max >= 2, "kramers_moyal_coefficients: need n_max >= 2 for drift and diffusion");
  return transitional_moments(kernel, y_prime, n_max, lo, hi);
}

/// Largest stable explicit step for the given diffusion profile.
inline double fokker_planck_max_dt(const UniformGrid& g, std::span<const double> diffusion) {
  const double dmax = *std::max_element(diffusion.begin(), diffusion.end());
  return 0.5 * g.step() * g.step() / dmax;
}

/// One explicit step of ∂V/∂t = -∂_y(A1 V) + ∂²_y(A2 V) in conservative
/// central-difference form with zero flux through both ends.
inline DensitySnapshot fokker_planck_step(const DensitySnapshot& v, std::span<const double> drift,
                                          std::span<const double> diffusion, double dt) {
  const UniformGrid& g = v.grid;
  const std::size_t n = g.size;
  require(v.values.size() == n && drift.size() == n && diffusion.size() == n,
          "fokker_planck_step: coefficient profiles must match the snapshot grid");
  require(dt > 0.0, "fokker_planck_step: dt must be positive");
  for (double a2 : diffusion)
    require(a2 > 0.0 && std::isfinite(a2), "fokker_planck_step: diffusion coefficient must be positive");
  const double dt_max = fokker_planck_max_dt(g, diffusion);
  if (dt > dt_max * (1.0 + 1e-12))
    throw NumericalGuardError("fokker_planck_step: dt = " + format_double(dt) + " exceeds the stability bound " +
                              format_double(dt_max));
  const double dy = g.step();
  // flux[i] lives between nodes i and i+1
  std::vector<double> flux(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double advective = 0.5 * (drift[i] * v.values[i] + drift[i + 1] * v.values[i + 1]);
    const double diffusive = (diffusion[i + 1] * v.values[i + 1] - diffusion[i] * v.values[i]) / dy;
    flux[i] = advective - diffusive;
  }
  DensitySnapshot out{v.t + dt, g, v.values, 0.0, DensityOrigin::stepped, 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    const double right = i + 1 < n ? flux[i] : 0.0;
    const double left = i > 0 ? flux[i - 1] : 0.0;
    out.values[i] -= dt * (right - left) / dy;
  }
  out.normalization = trapezoid(g, out.values);
  return out;
}

/// Steps to t_end with equal steps at 90% of the stability bound.
inline DensitySnapshot evolve_fokker_planck(DensitySnapshot v, std::span<const double> drift,
                                            std::span<const double> diffusion, double t_end) {
  require(t_end > v.t, "evolve_fokker_planck: t_end must lie after the snapshot time");
  const double dt_max = 0.9 * fokker_planck_max_dt(v.grid, diffusion);
  const auto steps = static_cast<std::size_t>(std::ceil((t_end - v.t) / dt_max));
  const double dt = (t_end - v.t) / static_cast<double>(steps);
  const double start = v.t;
  for (std::size_t k = 0; k < steps; ++k) {
    v = fokker_planck_step(v, drift, diffusion, dt);
    v.t = start + static_cast<double>(k + 1) * dt;
  }
  v.t = t_end;
  return v;
}

}  // namespace ffp
