#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <cmath>

#include "doctest.h"

#include "halc/error.hpp"
#include "halc/theory.hpp"

using namespace halc;

namespace {

// P(chi-square with 3 dof <= x), in closed form.
double chi2_3_cdf(double x) {
  return std::erf(std::sqrt(x / 2.0)) - std::sqrt(2.0 * x / M_PI) * std::exp(-x / 2.0);
}

double gaussian_ball_mass(double eps, double eta_norm, double sigma) {
  const boost::math::non_central_chi_squared dist(3.0, eta_norm * eta_norm / (sigma * sigma));
  return boost::math::cdf(dist, eps * eps / (sigma * sigma));
}

}  // namespace

TEST_CASE("chi-square oracle sanity") {
  CHECK(chi2_3_cdf(1.0) == doctest::Approx(0.198748).epsilon(1e-5));
  CHECK(gaussian_ball_mass(1.0, 1e-9, 1.0) == doctest::Approx(chi2_3_cdf(1.0)).epsilon(1e-6));
}

TEST_CASE("c_g_estimate") {
  Rng rng(17);
  const McEstimate c = c_g_estimate(1.0, Vec3{}, 1.0, 100000, rng);
  CHECK(std::abs(c.value - chi2_3_cdf(1.0)) < 3 * c.std_error);
  CHECK(c.std_error > 0.0);

  Rng r2(18);
  const Vec3 eta{0.4, -0.3, 0.5};
  const McEstimate off = c_g_estimate(0.8, eta, 0.6, 100000, r2);
  CHECK(std::abs(off.value - gaussian_ball_mass(0.8, eta.norm(), 0.6)) < 3.5 * off.std_error);

  Rng r3(19);
  CHECK(c_g_estimate(50.0, Vec3{}, 1.0, 10000, r3).value == 1.0);
  Rng r4(20);
  CHECK(c_g_estimate(0.5, Vec3{10, 0, 0}, 1.0, 10000, r4).value < 1e-4);
  Rng r5(21);
  CHECK_THROWS_AS(c_g_estimate(0.5, Vec3{}, 1.0, 9999, r5), InvalidParameter);
}

TEST_CASE("c_e worked example") {
  const Vec3 v_star{2, 2, 0}, v_d{1, 1, 0};
  const ExpansionInterval e = c_e_interval(0.5, v_star, v_d, 0.6, -5, 5);
  // Independent arithmetic on the endpoint formulas.
  const double ca = (0.25 - 0.0) / (1.0 + 1.0);
  const double cb = (2.0 + 2.0) / 2.0;
  const double lo = std::log(cb - std::sqrt(ca)) / std::log(1.6);
  const double hi = std::log(cb + std::sqrt(ca)) / std::log(1.6);
  CHECK(std::abs(e.c_a - 0.125) < 1e-12);
  CHECK(std::abs(e.c_b - 2.0) < 1e-12);
  CHECK(std::abs(e.c_a - ca) < 1e-12);
  CHECK(std::abs(e.lower - lo) < 1e-12);
  CHECK(std::abs(e.upper - hi) < 1e-12);
  CHECK(e.lower == doctest::Approx(1.061).epsilon(1e-3));
  CHECK(e.upper == doctest::Approx(1.821).epsilon(1e-3));
  CHECK(std::abs(e.c_e - (hi - lo) / 10.0) < 1e-12);
  CHECK(std::abs(e.c_e - 0.0760) < 1e-4);
  CHECK(std::abs(std::pow(1.0 - e.c_e, 4) - 0.7290) < 5e-4);
}

TEST_CASE("c_e edge cases") {
  const Vec3 v_star{2, 2, 0};
  CHECK(c_e_closed_form(0.5, v_star, v_star, 0.6, -1, 1) > 0.0);
  const ExpansionInterval around = c_e_interval(0.5, v_star, v_star, 0.6, -1, 1);
  CHECK(around.lower < 0.0);
  CHECK(around.upper > 0.0);
  CHECK(c_e_closed_form(0.5, v_star, Vec3{0.01, 0.01, 0}, 0.6, -5, 5) == 0.0);
  CHECK(c_e_closed_form(3.0, v_star, Vec3{1, 1, 0}, 0.6, -5, 5) > 0.0);
  CHECK_THROWS_AS(c_e_closed_form(0.5, v_star, Vec3{1, 1, 0.6}, 0.6, -5, 5), InvalidParameter);
  CHECK_THROWS_AS(c_e_closed_form(0.5, v_star, Vec3{1, 2, 0}, 0.6, -5, 5), InvalidParameter);

  for (double s : {0.01, 3.0, 250.0}) {
    const double base = c_e_closed_form(0.5, v_star, Vec3{1, 1, 0.1}, 0.6, -5, 5);
    const double scaled = c_e_closed_form(0.5 * s, v_star * s, Vec3{1, 1, 0.1} * s, 0.6, -5, 5);
    CHECK(std::abs(base - scaled) < 1e-9);
  }
}

TEST_CASE("deviation functions") {
  const Scene s = demo_scene();
  const Fov v_star{64, 48, 360, 210};
  const Fov other{90, 60, 340, 200};
  for (auto d : {Divergence::Jsd, Divergence::TotalVariation}) {
    CHECK(deviation_g(v_star, v_star, s, d) == 0.0);
    const double ab = deviation_g(v_star, other, s, d);
    CHECK(ab == doctest::Approx(deviation_g(other, v_star, s, d)).epsilon(1e-12));
    CHECK(ab > 0.0);
    CHECK(ab <= 1.0);
  }
  const DeviationFn g = scene_deviation(s, v_star, 1.0, 0.0, Divergence::TotalVariation);
  CHECK(g(Vec3{64, 48, 0}) == 0.0);
  CHECK(g(Vec3{64, 48, 40}) > 0.0);

  const DeviationFn sm = smooth_deviation(Vec3{2, 2, 0}, 1.0);
  CHECK(sm(Vec3{2, 2, 0}) == 0.0);
  CHECK(sm(Vec3{3, 2, 0}) == doctest::Approx(1.0 - std::exp(-0.5)));
}

TEST_CASE("estimate_delta") {
  const Vec3 v_star{2, 2, 0};
  const DeviationFn g = smooth_deviation(v_star, 1.0);
  Rng a(3), b(3);
  CHECK(estimate_delta(g, v_star, 0.5, 200, a) == estimate_delta(g, v_star, 0.5, 200, b));
  Rng c(4);
  CHECK(estimate_delta(g, v_star, 1e-6, 50, c) < 1e-10);
  double prev = 0.0;
  for (double eps : {0.1, 0.2, 0.4, 0.8}) {
    Rng r(5);
    const double d = estimate_delta(g, v_star, eps, 100, r);
    CHECK(d >= prev);
    CHECK(d <= 1.0 - std::exp(-eps * eps / 2.0) + 1e-12);
    prev = d;
  }
  Rng e(6);
  CHECK_THROWS_AS(estimate_delta(g, v_star, 0.5, 9, e), InvalidParameter);
}

TEST_CASE("min_deviation_mc") {
  TheoremConfig c;
  c.v_star = {2, 2, 0};
  c.trials = 2000;
  c.seed = 9;
  const DeviationFn g = smooth_deviation(c.v_star, 1.0);

  SUBCASE("many normal samples almost always hit the ball") {
    c.n = 64;
    c.epsilon = 0.8;
    c.sigma = 0.6;
    const BoundReport r = min_deviation_mc(g, c, FovSampler::Normal);
    CHECK(r.empirical_not_a < 0.01);
    CHECK(r.min_deviation.size() == 2000);
    CHECK(r.violation_fraction <= 0.01);
    CHECK(r.mean_min_deviation <= r.bound);
  }
  SUBCASE("eta = 0 with a generous ball") {
    c.eta = {};
    c.epsilon = 1.5;
    c.r_min = -1;
    c.r_max = 1;
    c.n = 8;
    const BoundReport r = min_deviation_mc(g, c, FovSampler::Exponential);
    long within = 0;
    for (double v : r.min_deviation) within += v <= r.delta ? 1 : 0;
    CHECK(within >= 0.99 * c.trials);
  }
  SUBCASE("continuous expansion matches the closed form") {
    c.eta = {-1, -1, 0};
    c.trials = 10000;
    c.n = 4;
    const BoundReport r = min_deviation_mc(g, c, FovSampler::Exponential);
    const double se = std::sqrt(r.analytic_not_a * (1 - r.analytic_not_a) / c.trials);
    CHECK(std::abs(r.empirical_not_a - r.analytic_not_a) < 3 * se);
    CHECK(r.analytic_c == doctest::Approx(0.0760).epsilon(1e-3));
  }
  SUBCASE("reproducible and monotone in n") {
    c.eta = {0.3, -0.2, 0.1};
    const BoundReport a = min_deviation_mc(g, c, FovSampler::Normal);
    const BoundReport b = min_deviation_mc(g, c, FovSampler::Normal);
    CHECK(a.min_deviation == b.min_deviation);
    const std::vector<int> ns{1, 2, 4, 8, 16};
    const auto curve = mean_min_deviation_curve(g, c, FovSampler::Normal, ns);
    for (std::size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] <= curve[i - 1]);
  }
  SUBCASE("config validation") {
    c.trials = 99;
    CHECK_THROWS_AS(min_deviation_mc(g, c, FovSampler::Normal), InvalidParameter);
    c.trials = 100;
    c.epsilon = 0;
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
    c.epsilon = 1;
    c.r_min = 2;
    c.r_max = 2;
    CHECK_THROWS_AS(c.validate(), InvalidParameter);
  }
}
