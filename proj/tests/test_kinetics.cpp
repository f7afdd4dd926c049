#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "fractal_fp/calculus.hpp"
#include "fractal_fp/kinetics.hpp"

using namespace ffp;
using Catch::Approx;

namespace {

double grid_moment(const DensitySnapshot& v, int n) {
  std::vector<double> w(v.values.size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::pow(v.grid.at(i), n) * v.values[i];
  return trapezoid(v.grid, w);
}

DensitySnapshot spike(const UniformGrid& g) {
  DensitySnapshot v{0.0, g, std::vector<double>(g.size, 0.0), 1.0, DensityOrigin::analytic, 0.0};
  v.values[g.size / 2] = 1.0 / g.step();
  return v;
}

}  // namespace

TEST_CASE("Closed-form density at the base point", "[kinetics][analytic]") {
  const auto c = build_curve(GeneratorSpec::koch(), 4, 0.0, 1.0);
  const auto s = build_staircase(c, std::log(4.0) / std::log(3.0));
  CHECK(diffusion_solution(0.25, 1.0, c.origin(), c, s) == Approx(1.0 / std::sqrt(std::numbers::pi / 2.0)));
  CHECK(diffusion_solution(0.25, 1.0, c.origin(), c, s, Convention::heat_kernel) ==
        Approx(1.0 / std::sqrt(std::numbers::pi)));
  double previous = std::numeric_limits<double>::infinity();
  for (double t : {0.01, 0.1, 1.0, 10.0}) {
    const double v = diffusion_solution(t, 1.0, c.origin(), c, s);
    CHECK(v < previous);
    previous = v;
  }
  CHECK_THROWS_AS(diffusion_solution(0.0, 1.0, c.origin(), c, s), PreconditionError);
  CHECK_THROWS_AS(conjugate_density(0.0, -1.0, 1.0), PreconditionError);
}

TEST_CASE("Closed-form density carries half its mass on a one-sided curve", "[kinetics][analytic]") {
  const double alpha = std::log(4.0) / std::log(3.0);
  const auto c = build_curve(GeneratorSpec::koch(), 7, 0.0, 1.0, {.scale = 4.0});
  const auto s = build_staircase(c, alpha);
  const double t = 0.5, A = 1.0;
  const auto v = CurveFunction::from_rule([&](const CurvePoint& p) { return conjugate_density(s.value_at(p.u), t, A); });
  CHECK(f_alpha_integral(v, c, s) == Approx(0.5).margin(1e-6));
}

TEST_CASE("Chapman-Kolmogorov spike spreads with variance tau/2", "[kinetics][ck]") {
  const auto g = make_grid(-2.0, 2.0, 2001);
  for (double tau : {0.005, 0.01, 0.05}) {
    const auto out = chapman_kolmogorov_step(spike(g), TransitionKernel::gaussian(tau));
    CHECK(grid_moment(out, 0) == Approx(1.0).epsilon(1e-12));
    CHECK(grid_moment(out, 1) == Approx(0.0).margin(1e-12));
    CHECK(grid_moment(out, 2) == Approx(tau / 2.0).epsilon(1e-8));
  }
}

TEST_CASE("Chapman-Kolmogorov steps match the closed form and compose", "[kinetics][ck][property]") {
  const auto g = make_grid(-4.0, 4.0, 1601);
  const double A = 0.25;
  const auto c = Convention::heat_kernel;
  const double D = effective_diffusivity(A, c);
  const auto start = analytic_snapshot(g, 0.05, A, c);
  const auto direct = evolve_chapman_kolmogorov(start, D, 0.3);
  CHECK(l1_distance(direct, analytic_snapshot(g, 0.3, A, c)) < 1e-9);
  const auto two = evolve_chapman_kolmogorov(evolve_chapman_kolmogorov(start, D, 0.15), D, 0.3);
  CHECK(l1_distance(two, direct) < 1e-9);
  CHECK(direct.t == 0.3);
  CHECK(direct.origin == DensityOrigin::propagated);
}

TEST_CASE("Chapman-Kolmogorov conserves mass and symmetry", "[kinetics][ck][property]") {
  const auto g = make_grid(-3.0, 3.0, 1201);
  const auto start = analytic_snapshot(g, 0.1, 1.0, Convention::variance);
  const auto out = chapman_kolmogorov_step(start, TransitionKernel::gaussian(0.02));
  CHECK(trapezoid(g, out.values) == Approx(start.normalization).epsilon(1e-14));
  for (std::size_t i = 0; i < g.size / 2; ++i)
    CHECK(out.values[i] == Approx(out.values[g.size - 1 - i]).epsilon(1e-13).margin(1e-300));
}

TEST_CASE("Small steps approach the identity", "[kinetics][ck]") {
  const auto g = make_grid(-3.0, 3.0, 1201);
  const auto start = analytic_snapshot(g, 0.2, 1.0, Convention::variance);
  double previous = std::numeric_limits<double>::infinity();
  for (double tau : {1e-2, 3e-3, 1e-3, 5e-4}) {
    const double d = l1_distance(chapman_kolmogorov_step(start, TransitionKernel::gaussian(tau)), start);
    CHECK(d < previous);
    previous = d;
  }
  CHECK(previous < 1e-2);
}

TEST_CASE("Chapman-Kolmogorov guards", "[kinetics][ck][errors]") {
  const auto g = make_grid(-1.0, 1.0, 201);
  // width sqrt(tau/2) below three spacings of 0.01
  CHECK_THROWS_AS(chapman_kolmogorov_step(spike(g), TransitionKernel::gaussian(1e-4)), NumericalGuardError);
  const auto edge = make_grid(0.0, 2.0, 401);
  const auto half = analytic_snapshot(edge, 0.05, 1.0, Convention::variance);
  CHECK_THROWS_AS(chapman_kolmogorov_step(half, TransitionKernel::gaussian(0.01)), NumericalGuardError);
}

TEST_CASE("Transitional moments of the gaussian kernel", "[kinetics][moments]") {
  for (double tau : {1e-3, 1e-2, 1e-1}) {
    const auto m = transitional_moments(TransitionKernel::gaussian(tau), 0.0, 4, -5.0, 5.0);
    CHECK(m.moments[0] == Approx(1.0).epsilon(1e-12));
    CHECK(m.moments[1] == Approx(0.0).margin(1e-15));
    CHECK(m.moments[2] == Approx(tau / 2.0).epsilon(1e-10));
    CHECK(m.moments[3] == Approx(0.0).margin(1e-15));
    CHECK(m.moments[4] == Approx(3.0 * tau * tau / 4.0).epsilon(1e-10));
    CHECK(m.diffusion() == Approx(0.25).epsilon(1e-10));
    CHECK(m.coefficients[4] == Approx(tau / 32.0).epsilon(1e-10));
    for (double b : m.tail_bounds) CHECK(b < 1e-13);
  }
}

TEST_CASE("Higher Kramers-Moyal coefficients vanish with tau", "[kinetics][moments]") {
  double previous = std::numeric_limits<double>::infinity();
  for (double tau : {1e-1, 1e-2, 1e-3}) {
    const auto m = kramers_moyal_coefficients(TransitionKernel::gaussian(tau), 0.0, 6, -5.0, 5.0);
    const double worst = std::max({std::abs(m.coefficients[3]), std::abs(m.coefficients[4]),
                                   std::abs(m.coefficients[5]), std::abs(m.coefficients[6])});
    CHECK(worst < previous);
    previous = worst;
  }
  CHECK(previous < 1e-4);
}

TEST_CASE("Drifting kernel gives drift equal to its velocity", "[kinetics][moments]") {
  for (double v : {-0.7, 0.3, 2.0}) {
    const auto m = kramers_moyal_coefficients(TransitionKernel::drifting(1e-3, v), 0.0, 2, -5.0, 5.0);
    CHECK(m.drift() == Approx(v).epsilon(1e-10));
  }
}

TEST_CASE("Moments reject base points near the domain ends", "[kinetics][moments][errors]") {
  CHECK_THROWS_AS(transitional_moments(TransitionKernel::gaussian(0.01), 1.9, 4, -2.0, 2.0), PreconditionError);
  CHECK_THROWS_AS(kramers_moyal_coefficients(TransitionKernel::gaussian(0.01), 0.0, 1, -2.0, 2.0), PreconditionError);
}

TEST_CASE("Fokker-Planck stepping follows the closed form", "[kinetics][fp]") {
  const auto g = make_grid(-5.0, 5.0, 2048);
  const double A = 0.25;
  const auto c = Convention::heat_kernel;
  const double D = effective_diffusivity(A, c);
  const std::vector<double> drift(g.size, 0.0), diffusion(g.size, D);
  auto v = analytic_snapshot(g, 0.01, A, c);
  for (double t : {0.05, 0.1, 0.3}) {
    v = evolve_fokker_planck(v, drift, diffusion, t);
    CHECK(l1_distance(v, analytic_snapshot(g, t, A, c)) < 1e-3);
  }
}

TEST_CASE("Fokker-Planck constant drift moves the mean by v dt", "[kinetics][fp]") {
  const auto g = make_grid(-4.0, 4.0, 801);
  const double vel = 0.5;
  const std::vector<double> drift(g.size, vel), diffusion(g.size, 0.05);
  const auto start = analytic_snapshot(g, 0.2, 0.1, Convention::variance);
  const double dt = 0.5 * fokker_planck_max_dt(g, diffusion);
  const auto next = fokker_planck_step(start, drift, diffusion, dt);
  const double mean_shift = grid_moment(next, 1) / grid_moment(next, 0) - grid_moment(start, 1) / grid_moment(start, 0);
  CHECK(mean_shift == Approx(vel * dt).epsilon(1e-8));
}

TEST_CASE("Fokker-Planck guards", "[kinetics][fp][errors]") {
  const auto g = make_grid(-1.0, 1.0, 101);
  const auto v = analytic_snapshot(g, 0.1, 0.5, Convention::variance);
  const std::vector<double> zero(g.size, 0.0), one(g.size, 1.0);
  CHECK_THROWS_AS(fokker_planck_step(v, zero, zero, 1e-6), PreconditionError);
  CHECK_THROWS_AS(fokker_planck_step(v, zero, one, 2.0 * fokker_planck_max_dt(g, one)), NumericalGuardError);
  CHECK_NOTHROW(fokker_planck_step(v, zero, one, fokker_planck_max_dt(g, one)));
}
