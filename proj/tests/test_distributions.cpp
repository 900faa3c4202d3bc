#include <cmath>
#include <limits>
#include <random>

#include "doctest.h"

#include "halc/distributions.hpp"
#include "halc/error.hpp"

using namespace halc;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Term-by-term definition with natural logs, converted to bits at the end.
double jsd_oracle(const std::vector<double>& p, const std::vector<double>& q) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const long double m = (static_cast<long double>(p[i]) + q[i]) / 2.0L;
    if (p[i] > 0) total += 0.5L * p[i] * std::log(p[i] / m);
    if (q[i] > 0) total += 0.5L * q[i] * std::log(q[i] / m);
  }
  return static_cast<double>(total / std::log(2.0L));
}

std::vector<double> random_logits(std::mt19937_64& g, std::size_t n) {
  std::normal_distribution<double> z(0.0, 2.0);
  std::vector<double> v(n);
  for (auto& x : v) x = z(g);
  return v;
}

}  // namespace

TEST_CASE("softmax") {
  const ProbDist p = softmax(Logits{{0, 0}});
  CHECK(p[0] == doctest::Approx(0.5));
  const ProbDist a = softmax(Logits{{1.5, -0.25}});
  const ProbDist b = softmax(Logits{{101.5, 99.75}});
  CHECK(a[0] == doctest::Approx(b[0]).epsilon(1e-12));
  const ProbDist m = softmax(Logits{{-kInf, 0}});
  CHECK(m[0] == 0.0);
  CHECK(m[1] == 1.0);
}

TEST_CASE("jsd examples") {
  CHECK(jsd(ProbDist{{0.3, 0.7}}, ProbDist{{0.3, 0.7}}) == 0.0);
  CHECK(jsd(ProbDist{{1, 0}}, ProbDist{{0, 1}}) == doctest::Approx(1.0).epsilon(1e-12));
  const std::vector<double> p{0.5, 0.5}, q{0.9, 0.1};
  CHECK(std::abs(jsd(ProbDist{p}, ProbDist{q}) - jsd_oracle(p, q)) < 1e-12);
  CHECK_THROWS_AS(jsd(ProbDist{{1.0}}, ProbDist{{0.5, 0.5}}), InvalidInput);
}

TEST_CASE("total_variation examples") {
  CHECK(total_variation(ProbDist{{0.2, 0.8}}, ProbDist{{0.2, 0.8}}) == 0.0);
  CHECK(total_variation(ProbDist{{1, 0}}, ProbDist{{0, 1}}) == doctest::Approx(1.0));
  CHECK(total_variation(ProbDist{{0.7, 0.3}}, ProbDist{{0.4, 0.6}}) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("contrast_logits examples") {
  const Logits fe{{2, 0}}, fa{{0, 2}};
  CHECK(contrast_logits(fe, fa, 0.0).values == fe.values);
  const Logits c = contrast_logits(fe, fa, 1.0);
  CHECK(c[0] == doctest::Approx(4));
  CHECK(c[1] == doctest::Approx(-2));
  const Logits self = contrast_logits(fe, fe, 3.7);
  CHECK(self[0] == doctest::Approx(2));
  CHECK(self[1] == doctest::Approx(0));
  CHECK_THROWS_AS(contrast_logits(fe, fa, -0.1), InvalidParameter);
}

TEST_CASE("plausibility_mask examples") {
  const auto uni = plausibility_mask(ProbDist{{0.25, 0.25, 0.25, 0.25}}, 0.9);
  CHECK(uni.count() == 4);
  const auto m = plausibility_mask(ProbDist{{0.96, 0.03, 0.01}}, 0.1);
  CHECK(m.count() == 1);
  CHECK(m.contains(0));
  const auto tiny = plausibility_mask(ProbDist{{0.999, 0.001, 0.0}}, 1e-12);
  CHECK(tiny.contains(1));
  CHECK_FALSE(tiny.contains(2));
  CHECK_THROWS_AS(plausibility_mask(ProbDist{{1.0}}, 1.0), InvalidParameter);
}

TEST_CASE("contrast_distribution against a step-by-step oracle") {
  std::mt19937_64 g(77);
  for (int t = 0; t < 50; ++t) {
    const auto e = random_logits(g, 12);
    const auto a = random_logits(g, 12);
    const double alpha = 0.3, beta = 0.1;
    // Oracle: expert softmax -> mask -> contrast -> masked renormalization.
    double mx = -kInf, z = 0.0;
    for (double x : e) mx = std::max(mx, x);
    std::vector<double> pe(12);
    for (int i = 0; i < 12; ++i) z += std::exp(e[i] - mx);
    for (int i = 0; i < 12; ++i) pe[i] = std::exp(e[i] - mx) / z;
    const double top = *std::max_element(pe.begin(), pe.end());
    std::vector<double> c(12), out(12, 0.0);
    double cmax = -kInf;
    for (int i = 0; i < 12; ++i) {
      c[i] = (1 + alpha) * e[i] - alpha * a[i];
      if (pe[i] >= beta * top) cmax = std::max(cmax, c[i]);
    }
    double cz = 0.0;
    for (int i = 0; i < 12; ++i) {
      if (pe[i] >= beta * top) cz += std::exp(c[i] - cmax);
    }
    for (int i = 0; i < 12; ++i) {
      if (pe[i] >= beta * top) out[i] = std::exp(c[i] - cmax) / cz;
    }
    const ProbDist got = contrast_distribution(Logits{e}, Logits{a}, alpha, beta);
    double sum = 0.0;
    for (int i = 0; i < 12; ++i) {
      CHECK(std::abs(got[i] - out[i]) < 1e-12);
      if (out[i] == 0.0) CHECK(got[i] == 0.0);
      sum += got[i];
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("contrast_distribution degenerate cases") {
  const Logits e{{3.0, 1.0, -1.0}};
  const ProbDist plain = contrast_distribution(e, Logits{{0, 5, 0}}, 0.0, 1e-12);
  const ProbDist ref = softmax(e);
  for (int i = 0; i < 3; ++i) CHECK(plain[i] == doctest::Approx(ref[i]).epsilon(1e-12));
  const ProbDist one = contrast_distribution(Logits{{10.0, 0.0, 0.0}}, Logits{{0, 0, 0}}, 0.5, 0.5);
  CHECK(one[0] == 1.0);
  CHECK(one[1] == 0.0);
}

TEST_CASE("top_m_pairs") {
  const std::vector<ProbDist> two{ProbDist{{0.5, 0.5}}, ProbDist{{0.9, 0.1}}};
  CHECK(top_m_pairs(two, 6) == std::vector<std::pair<int, int>>{{0, 1}});

  const std::vector<ProbDist> same(4, ProbDist{{0.2, 0.8}});
  const std::vector<std::pair<int, int>> lex{{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}};
  CHECK(top_m_pairs(same, 6) == lex);

  const std::vector<ProbDist> four{ProbDist{{0.5, 0.5}}, ProbDist{{0.6, 0.4}}, ProbDist{{0.99, 0.01}},
                                   ProbDist{{0.05, 0.95}}};
  const auto pairs = top_m_pairs(four, 6);
  REQUIRE(pairs.size() == 6);
  for (std::size_t i = 1; i < pairs.size(); ++i) {
    CHECK(jsd(four[pairs[i - 1].first], four[pairs[i - 1].second]) >=
          jsd(four[pairs[i].first], four[pairs[i].second]));
  }
  CHECK(pairs.front() == std::pair<int, int>{2, 3});
  CHECK(top_m_pairs(four, 2).size() == 2);
}

TEST_CASE("argmax_token") {
  CHECK(argmax_token(ProbDist{{0, 0, 1}}) == 2);
  CHECK(argmax_token(ProbDist{{0.25, 0.25, 0.25, 0.25}}) == 0);
  CHECK(argmax_token(ProbDist{{0.2, 0.5, 0.3}}) == 1);
}

TEST_CASE("divergence and contrast properties on 1000 random pairs") {
  std::mt19937_64 g(31337);
  std::uniform_real_distribution<double> shift(-50, 50), alpha(0, 2);
  for (int t = 0; t < 1000; ++t) {
    const auto a = random_logits(g, 32);
    const auto b = random_logits(g, 32);
    const ProbDist p = softmax(Logits{a}), q = softmax(Logits{b});
    const double d = jsd(p, q);
    CHECK(std::abs(d - jsd(q, p)) < 1e-12);
    CHECK(d >= 0.0);
    CHECK(d <= 1.0);
    CHECK(jsd(p, p) == 0.0);
    const double tv = total_variation(p, q);
    CHECK(tv >= 0.0);
    CHECK(tv <= 1.0);
    CHECK(argmax_token(contrast_logits(Logits{a}, Logits{b}, 0.0)) == argmax_token(Logits{a}));

    const double s = shift(g);
    const double al = alpha(g);
    auto a2 = a, b2 = b;
    for (auto& x : a2) x += s;
    for (auto& x : b2) x += s;
    const ProbDist c1 = contrast_distribution(Logits{a}, Logits{b}, al, 0.1);
    const ProbDist c2 = contrast_distribution(Logits{a2}, Logits{b2}, al, 0.1);
    for (int i = 0; i < 32; ++i) CHECK(std::abs(c1[i] - c2[i]) < 1e-9);
  }
}
