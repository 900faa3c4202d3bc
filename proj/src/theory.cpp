#include "halc/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "halc/distributions.hpp"
#include "halc/error.hpp"

namespace halc {

double Vec3::norm() const { return std::sqrt(w * w + h * h + p * p); }

std::string_view to_string(Divergence d) { return d == Divergence::Jsd ? "jsd" : "tv"; }
std::string_view to_string(FovSampler s) { return s == FovSampler::Normal ? "normal" : "exponential"; }

Divergence divergence_from_string(std::string_view s) {
  if (s == "jsd") return Divergence::Jsd;
  if (s == "tv") return Divergence::TotalVariation;
  throw InvalidParameter("unknown divergence '" + std::string(s) + "'");
}

FovSampler fov_sampler_from_string(std::string_view s) {
  if (s == "normal") return FovSampler::Normal;
  if (s == "exponential") return FovSampler::Exponential;
  throw InvalidParameter("unknown sampler '" + std::string(s) + "'");
}

void TheoremConfig::validate() const {
  if (!(epsilon > 0.0)) throw InvalidParameter("epsilon must be positive");
  if (!(r_min < r_max)) throw InvalidParameter("r_min must be below r_max");
  if (trials < 100) throw InvalidParameter("at least 100 macro-trials are required");
  if (!(sigma > 0.0)) throw InvalidParameter("sigma must be positive");
  if (!(lambda > 0.0)) throw InvalidParameter("lambda must be positive");
  if (n < 1) throw InvalidParameter("n must be at least 1");
  if (delta >= 1.0) throw InvalidParameter("delta must be below 1");
}

// ---------------------------------------------------------------------------

double deviation_g(const Fov& v_star, const Fov& v, const Scene& scene, Divergence divergence,
                   std::span<const TokenId> prefix) {
  std::vector<TokenId> first_noun_slot;
  if (prefix.empty()) {
    first_noun_slot.push_back(scene.token_id(Grammar::word_at(0)));
    prefix = first_noun_slot;
  }
  const ProbDist p = softmax(toy_model_logits(scene, v_star, prefix));
  const ProbDist q = softmax(toy_model_logits(scene, v, prefix));
  return divergence == Divergence::Jsd ? jsd(p, q) : total_variation(p, q);
}

DeviationFn scene_deviation(const Scene& scene, const Fov& v_star, double direction_x, double direction_y,
                            Divergence divergence) {
  double len = std::hypot(direction_x, direction_y);
  if (len == 0.0) {
    direction_x = 1.0;
    direction_y = 0.0;
    len = 1.0;
  }
  const double ux = direction_x / len;
  const double uy = direction_y / len;
  return [&scene, v_star, ux, uy, divergence](const Vec3& v) {
    const Fov f{std::max(1.0, v.w), std::max(1.0, v.h), v_star.center_x + v.p * ux, v_star.center_y + v.p * uy};
    return deviation_g(v_star, clamp_to_image(f, scene.image()), scene, divergence);
  };
}

DeviationFn smooth_deviation(const Vec3& v_star, double scale) {
  if (!(scale > 0.0)) throw InvalidParameter("deviation scale must be positive");
  return [v_star, scale](const Vec3& v) {
    const double d = (v - v_star).norm();
    return 1.0 - std::exp(-d * d / (2.0 * scale * scale));
  };
}

namespace {

Vec3 gaussian3(Rng& rng) {
  std::normal_distribution<double> z(0.0, 1.0);
  const double a = z(rng);
  const double b = z(rng);
  const double c = z(rng);
  return {a, b, c};
}

Vec3 uniform_in_ball(double radius, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Vec3 d;
  double len = 0.0;
  do {
    d = gaussian3(rng);
    len = d.norm();
  } while (len == 0.0);
  return d * (radius * std::cbrt(u(rng)) / len);
}

}  // namespace

double estimate_delta(const DeviationFn& g, const Vec3& v_star, double epsilon, int probes, Rng& rng) {
  if (probes < 10) throw InvalidParameter("estimate_delta needs at least 10 probes");
  if (!(epsilon >= 0.0)) throw InvalidParameter("epsilon must be non-negative");
  double worst = 0.0;
  for (int i = 0; i < probes; ++i) worst = std::max(worst, g(v_star + uniform_in_ball(epsilon, rng)));
  return worst;
}

McEstimate c_g_estimate(double epsilon, const Vec3& eta, double sigma, long mc_trials, Rng& rng) {
  if (mc_trials < 10000) throw InvalidParameter("c_g_estimate needs at least 1e4 draws");
  if (!(sigma > 0.0)) throw InvalidParameter("sigma must be positive");
  long hits = 0;
  for (long i = 0; i < mc_trials; ++i) {
    if ((eta + gaussian3(rng) * sigma).norm() <= epsilon) ++hits;
  }
  const double p = static_cast<double>(hits) / static_cast<double>(mc_trials);
  return {p, std::sqrt(p * (1.0 - p) / static_cast<double>(mc_trials))};
}

ExpansionInterval c_e_interval(double epsilon, const Vec3& v_star, const Vec3& v_d, double lambda,
                               double r_min, double r_max) {
  if (!(lambda > 0.0)) throw InvalidParameter("lambda must be positive");
  if (!(r_min < r_max)) throw InvalidParameter("r_min must be below r_max");
  const double dp = v_d.p - v_star.p;
  if (!(epsilon * epsilon > dp * dp)) {
    throw InvalidParameter("detected center must lie within epsilon of the optimum");
  }
  if (std::abs(v_d.w * v_star.h - v_star.w * v_d.h) > 1e-9 * std::max(1.0, std::abs(v_d.w * v_star.h))) {
    throw InvalidParameter("detection and optimum must share an aspect ratio");
  }
  ExpansionInterval out;
  const double norm2 = v_d.w * v_d.w + v_d.h * v_d.h;
  out.c_a = (epsilon * epsilon - dp * dp) / norm2;
  out.c_b = (v_d.w * v_star.w + v_d.h * v_star.h) / norm2;
  const double root = std::sqrt(out.c_a);
  const double log_growth = std::log1p(lambda);
  out.upper = std::min(r_max, std::log(out.c_b + root) / log_growth);
  out.lower = out.c_b > root ? std::max(r_min, std::log(out.c_b - root) / log_growth) : r_min;
  out.c_e = out.upper > out.lower ? (out.upper - out.lower) / (r_max - r_min) : 0.0;
  return out;
}

double c_e_closed_form(double epsilon, const Vec3& v_star, const Vec3& v_d, double lambda, double r_min,
                       double r_max) {
  return c_e_interval(epsilon, v_star, v_d, lambda, r_min, r_max).c_e;
}

// ---------------------------------------------------------------------------

namespace {

Vec3 draw_context(const TheoremConfig& c, FovSampler sampler, Rng& rng) {
  const Vec3 v_d = c.v_d();
  if (sampler == FovSampler::Normal) return v_d + gaussian3(rng) * c.sigma;
  std::uniform_real_distribution<double> r(c.r_min, c.r_max);
  const double s = std::pow(1.0 + c.lambda, r(rng));
  return {v_d.w * s, v_d.h * s, v_d.p};
}

}  // namespace

BoundReport min_deviation_mc(const DeviationFn& g, const TheoremConfig& config, FovSampler sampler) {
  config.validate();
  BoundReport rep;
  rep.sampler = sampler;
  rep.n = config.n;
  rep.trials = config.trials;

  if (sampler == FovSampler::Normal) {
    Rng crng(derive_seed(config.seed, 0xC0));
    const McEstimate c = c_g_estimate(config.epsilon, config.eta, config.sigma, config.c_trials, crng);
    rep.analytic_c = c.value;
    rep.analytic_c_se = c.std_error;
  } else {
    rep.analytic_c = c_e_closed_form(config.epsilon, config.v_star, config.v_d(), config.lambda, config.r_min,
                                     config.r_max);
  }
  if (config.delta >= 0.0) {
    rep.delta = config.delta;
  } else {
    Rng drng(derive_seed(config.seed, 0xDE));
    rep.delta = estimate_delta(g, config.v_star, config.epsilon, config.probes, drng);
  }
  rep.analytic_not_a = std::pow(1.0 - rep.analytic_c, config.n);
  rep.bound = rep.delta + rep.analytic_not_a;

  long misses = 0;
  long violations = 0;
  double sum = 0.0;
  rep.min_deviation.reserve(static_cast<std::size_t>(config.trials));
  for (long t = 0; t < config.trials; ++t) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t) + 1));
    bool hit = false;
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < config.n; ++i) {
      const Vec3 v = draw_context(config, sampler, rng);
      hit = hit || (v - config.v_star).norm() <= config.epsilon;
      best = std::min(best, g(v));
    }
    misses += hit ? 0 : 1;
    violations += hit && best > rep.delta ? 1 : 0;
    sum += best;
    rep.min_deviation.push_back(best);
  }
  const auto trials = static_cast<double>(config.trials);
  rep.empirical_not_a = static_cast<double>(misses) / trials;
  rep.violation_fraction = static_cast<double>(violations) / trials;
  rep.mean_min_deviation = sum / trials;
  rep.mean_slack = rep.bound - rep.mean_min_deviation;
  const double p = rep.analytic_not_a;
  const double dc = config.n * std::pow(1.0 - rep.analytic_c, config.n - 1) * rep.analytic_c_se;
  rep.combined_se = std::sqrt(p * (1.0 - p) / trials + dc * dc);
  return rep;
}

std::vector<double> mean_min_deviation_curve(const DeviationFn& g, const TheoremConfig& config,
                                             FovSampler sampler, std::span<const int> ns) {
  config.validate();
  if (ns.empty()) return {};
  const int n_max = *std::max_element(ns.begin(), ns.end());
  std::vector<double> sums(ns.size(), 0.0);
  for (long t = 0; t < config.trials; ++t) {
    Rng rng(derive_seed(config.seed, static_cast<std::uint64_t>(t) + 1));
    std::vector<double> running(static_cast<std::size_t>(n_max));
    double best = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n_max; ++i) {
      best = std::min(best, g(draw_context(config, sampler, rng)));
      running[static_cast<std::size_t>(i)] = best;
    }
    for (std::size_t k = 0; k < ns.size(); ++k) {
      if (ns[k] < 1) throw InvalidParameter("sample counts must be positive");
      sums[k] += running[static_cast<std::size_t>(ns[k] - 1)];
    }
  }
  for (double& s : sums) s /= static_cast<double>(config.trials);
  return sums;
}

}  // namespace halc
