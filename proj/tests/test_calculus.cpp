#include <catch_amalgamated.hpp>

#include <cmath>

#include "fractal_fp/calculus.hpp"

using namespace ffp;
using Catch::Approx;

namespace {

struct KochFixture {
  double alpha = std::log(4.0) / std::log(3.0);
  FractalCurve curve = build_curve(GeneratorSpec::koch(), 6, 0.0, 1.0);
  StaircaseTable s = build_staircase(curve, alpha);

  /// g(J(θ)) for a function g of the conjugate coordinate.
  template <typename G>
  CurveFunction of_y(G g) const {
    return CurveFunction::from_rule([this, g](const CurvePoint& p) { return g(s.value_at(p.u)); });
  }
};

}  // namespace

TEST_CASE("phi maps curve functions to the conjugate grid", "[calculus][phi]") {
  const KochFixture fx;
  const auto c = phi(CurveFunction::constant(2.5), fx.curve, fx.s);
  for (double v : c.values) CHECK(v == 2.5);
  const auto j = phi(fx.of_y([](double y) { return y; }), fx.curve, fx.s);
  CHECK(j.values == fx.s.values());
  const auto r2 = phi(CurveFunction::from_rule([](const CurvePoint& p) { return p.x[0] * p.x[0] + p.x[1] * p.x[1]; }),
                      fx.curve, fx.s);
  CHECK(r2.values.back() == 1.0);
  CHECK(r2.values.front() == 0.0);
}

TEST_CASE("phi_inverse undoes phi bit for bit", "[calculus][phi][property]") {
  const KochFixture fx;
  const auto f = CurveFunction::from_rule([](const CurvePoint& p) { return std::sin(3.0 * p.x[0]) + p.x[1]; });
  const auto g = phi_inverse(phi(f, fx.curve, fx.s), fx.curve, fx.s);
  for (std::size_t k = 0; k < fx.curve.knot_count(); ++k) CHECK(g.at_knot(fx.curve, k) == f.at_knot(fx.curve, k));
  const auto other = build_staircase(fx.curve, 1.5);
  CHECK_THROWS_AS(phi_inverse(phi(f, fx.curve, fx.s), fx.curve, other), PreconditionError);
}

TEST_CASE("Derivative examples", "[calculus][derivative]") {
  const KochFixture fx;
  const auto dj = f_alpha_derivative(fx.of_y([](double y) { return y; }), fx.curve, fx.s);
  for (std::size_t k = 0; k < fx.curve.knot_count(); ++k) CHECK(dj.at_knot(fx.curve, k) == Approx(1.0).epsilon(1e-9));

  const auto sq = fx.of_y([](double y) { return y * y; });
  const double u = fx.s.parameter_at(0.4);
  CHECK(f_alpha_derivative_at(sq, u, fx.curve, fx.s) == Approx(0.8).epsilon(1e-9));
  CHECK(f_alpha_derivative(sq, fx.curve.locate(u), fx.curve, fx.s) == Approx(0.8).epsilon(1e-8));

  const auto d0 = f_alpha_derivative(CurveFunction::constant(7.0), fx.curve, fx.s);
  for (std::size_t k = 0; k < fx.curve.knot_count(); ++k) CHECK(d0.at_knot(fx.curve, k) == Approx(0.0).margin(1e-8));
}

TEST_CASE("Conjugacy: phi of the derivative is the grid derivative of phi", "[calculus][property]") {
  const KochFixture fx;
  const auto f = fx.of_y([](double y) { return std::cos(2.0 * y); });
  const auto lhs = phi(f_alpha_derivative(f, fx.curve, fx.s), fx.curve, fx.s);
  const auto rhs = grid_derivative(phi(f, fx.curve, fx.s));
  CHECK(lhs.values == rhs.values);
  CHECK(lhs.grid == rhs.grid);
}

TEST_CASE("Derivative is linear", "[calculus][property]") {
  const KochFixture fx;
  const auto f = fx.of_y([](double y) { return std::exp(y); });
  const auto g = CurveFunction::from_rule([](const CurvePoint& p) { return p.x[1]; });
  const auto h = CurveFunction::from_rule(
      [&](const CurvePoint& p) { return 2.0 * f.at(fx.curve, p) - 3.0 * g.at(fx.curve, p); });
  const auto df = f_alpha_derivative(f, fx.curve, fx.s);
  const auto dg = f_alpha_derivative(g, fx.curve, fx.s);
  const auto dh = f_alpha_derivative(h, fx.curve, fx.s);
  for (std::size_t k = 0; k < fx.curve.knot_count(); k += 7) {
    const double expect = 2.0 * df.at_knot(fx.curve, k) - 3.0 * dg.at_knot(fx.curve, k);
    CHECK(dh.at_knot(fx.curve, k) == Approx(expect).epsilon(1e-9).margin(1e-9));
  }
}

TEST_CASE("Integral examples", "[calculus][integral]") {
  const KochFixture fx;
  const double total = 1.0 / std::tgamma(1.0 + fx.alpha);
  CHECK(f_alpha_integral(CurveFunction::constant(1.0), fx.curve, fx.s) == Approx(total).epsilon(1e-12));
  const double y_end = fx.s.upper();
  CHECK(f_alpha_integral(fx.of_y([](double y) { return y; }), fx.curve, fx.s) ==
        Approx(0.5 * y_end * y_end).epsilon(1e-12));
  CHECK(f_alpha_integral(CurveFunction::constant(1.0), 0.3, 0.3, fx.curve, fx.s) == 0.0);
  CHECK_THROWS_AS(f_alpha_integral(CurveFunction::constant(1.0), 0.6, 0.3, fx.curve, fx.s), PreconditionError);
}

TEST_CASE("Integral over a non-knot range reports its snap", "[calculus][integral]") {
  const KochFixture fx;
  SnapReport report;
  const double v = f_alpha_integral(CurveFunction::constant(1.0), 0.1, 0.9, fx.curve, fx.s, &report);
  CHECK(report.snap_lo >= 0.0);
  CHECK(report.snap_hi >= 0.0);
  CHECK(report.snap_lo < fx.curve.spacing());
  CHECK(report.snap_hi < fx.curve.spacing());
  CHECK(v == Approx(fx.s.value_at(0.9 + report.snap_hi) - fx.s.value_at(0.1 - report.snap_lo)).epsilon(1e-12));
}

TEST_CASE("Fundamental theorem: derivative of the running integral", "[calculus][property]") {
  const KochFixture fx;
  const auto f = fx.of_y([](double y) { return std::sin(3.0 * y) + 0.5; });
  const auto big_f = running_integral(f, fx.curve, fx.s);
  const auto back = f_alpha_derivative(big_f, fx.curve, fx.s);
  double worst = 0.0;
  for (std::size_t k = 0; k < fx.curve.knot_count(); ++k)
    worst = std::max(worst, std::abs(back.at_knot(fx.curve, k) - f.at_knot(fx.curve, k)));
  CHECK(worst < 1e-6);
}

TEST_CASE("Fundamental theorem: integral of the derivative", "[calculus][property]") {
  const KochFixture fx;
  const auto f = fx.of_y([](double y) { return std::exp(y); });
  const auto df = f_alpha_derivative(f, fx.curve, fx.s);
  for (const auto& [a, b] : {std::pair{0.0, 1.0}, std::pair{0.25, 0.75}, std::pair{0.125, 0.5}}) {
    const double lhs = f_alpha_integral(df, a, b, fx.curve, fx.s);
    const double rhs = f.at(fx.curve, fx.curve.at(b)) - f.at(fx.curve, fx.curve.at(a));
    CHECK(lhs == Approx(rhs).epsilon(1e-6));
  }
}

TEST_CASE("At alpha = 1 on a segment the operators are ordinary calculus", "[calculus]") {
  const auto c = build_curve(GeneratorSpec::segment(), 14, 0.0, 1.0);
  const auto s = build_staircase(c, 1.0);
  // three-point stencils are exact on quadratics
  const auto quad = CurveFunction::from_rule([](const CurvePoint& p) { return 2.0 * p.u * p.u - p.u + 3.0; });
  const auto d = f_alpha_derivative(quad, c, s);
  double worst = 0.0;
  for (std::size_t k = 0; k < c.knot_count(); ++k)
    worst = std::max(worst, std::abs(d.at_knot(c, k) - (4.0 * c.params()[k] - 1.0)));
  CHECK(worst < 1e-9);
  // midpoint error for a cubic at h = 2^-14 is about 5e-10
  const auto cube = CurveFunction::from_rule([](const CurvePoint& p) { return p.x[0] * p.x[0] * p.x[0] + p.x[0]; });
  CHECK(f_alpha_integral(cube, c, s) == Approx(0.75).margin(1e-9));
  const auto lin = CurveFunction::from_rule([](const CurvePoint& p) { return 3.0 * p.u - 1.0; });
  CHECK(f_alpha_integral(lin, 0.25, 0.5, c, s) == Approx(3.0 * (0.25 - 0.0625) / 2.0 - 0.25).margin(1e-12));
}

TEST_CASE("Taylor series examples", "[calculus][taylor]") {
  const KochFixture fx;
  const auto sq = fx.of_y([](double y) { return y * y; });
  CHECK(taylor_expand(sq, 0.0, 0.5, 2, fx.curve, fx.s).value == Approx(0.25).epsilon(1e-8));
  // the series of a conjugate quadratic stops at order two
  for (int order : {3, 4, 5}) {
    const auto r = taylor_expand(sq, 0.0, 0.5, order, fx.curve, fx.s);
    CHECK(r.value == Approx(0.25).epsilon(1e-8));
    for (std::size_t n = 3; n < r.derivatives.size(); ++n) CHECK(r.derivatives[n] == Approx(0.0).margin(1e-4));
  }
  CHECK(taylor_expand(CurveFunction::constant(4.0), 0.5, 0.1, 3, fx.curve, fx.s).value == Approx(4.0).epsilon(1e-10));
  const auto ex = fx.of_y([](double y) { return std::exp(y); });
  const Point base = fx.curve.origin();
  const Point target = point_at_coordinate(fx.s, fx.curve, 0.3);
  CHECK(taylor_eval(ex, base, target, 8, fx.curve, fx.s) == Approx(std::exp(0.3)).margin(1e-5));
  const auto r = taylor_expand(ex, 0.0, 0.3, 4, fx.curve, fx.s);
  REQUIRE(r.derivatives.size() == 5);
  for (double d : r.derivatives) CHECK(d == Approx(1.0).epsilon(1e-3));
}

TEST_CASE("Taylor series guards", "[calculus][taylor][errors]") {
  const KochFixture fx;
  const auto ex = fx.of_y([](double y) { return std::exp(y); });
  CHECK_THROWS_AS(taylor_expand(ex, 0.0, 0.3, 40, fx.curve, fx.s), NumericalGuardError);
  const auto tiny = build_curve(GeneratorSpec::koch(), 1, 0.0, 1.0);
  const auto ts = build_staircase(tiny, fx.alpha);
  CHECK_THROWS_AS(taylor_expand(CurveFunction::constant(1.0), 0.0, 0.1, 2, tiny, ts), NumericalGuardError);
  CHECK_THROWS_AS(taylor_expand(ex, 0.0, 0.3, -1, fx.curve, fx.s), PreconditionError);
}
