#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "halc/fov.hpp"
#include "halc/rng.hpp"
#include "halc/sim_world.hpp"

namespace halc {

/// FOV as a point (width, height, scalar center coordinate) in the 3-dim
/// space the sampling bounds are stated in.
struct Vec3 {
  double w = 0.0;
  double h = 0.0;
  double p = 0.0;

  Vec3 operator+(const Vec3& o) const { return {w + o.w, h + o.h, p + o.p}; }
  Vec3 operator-(const Vec3& o) const { return {w - o.w, h - o.h, p - o.p}; }
  Vec3 operator*(double s) const { return {w * s, h * s, p * s}; }
  double norm() const;
};

enum class Divergence { Jsd, TotalVariation };
enum class FovSampler { Normal, Exponential };

std::string_view to_string(Divergence d);
std::string_view to_string(FovSampler s);
Divergence divergence_from_string(std::string_view s);
FovSampler fov_sampler_from_string(std::string_view s);

struct TheoremConfig {
  Vec3 v_star{2.0, 2.0, 0.0};
  Vec3 eta{0.0, 0.0, 0.0};
  double epsilon = 0.5;
  /// Robustness tolerance; negative means "estimate from ball probes".
  double delta = -1.0;
  double sigma = 1.0;
  double lambda = 0.6;
  double r_min = -5.0;
  double r_max = 5.0;
  int n = 4;
  long trials = 10000;
  long c_trials = 100000;  // Monte-Carlo draws behind the normal-sampling constant
  int probes = 200;
  Divergence divergence = Divergence::TotalVariation;
  std::uint64_t seed = 0;

  void validate() const;
  Vec3 v_d() const { return v_star + eta; }
};

/// Deviation of decoding at a sampled context from decoding at the optimum, in [0, 1].
using DeviationFn = std::function<double(const Vec3&)>;

/// Divergence between toy-model distributions at two windows. The default
/// prefix is the first noun slot, the first step where the window matters.
double deviation_g(const Fov& v_star, const Fov& v, const Scene& scene, Divergence divergence,
                   std::span<const TokenId> prefix = {});

/// Maps (w, h, p) to a window centered p pixels from v_star's center along
/// `direction`, clamped to the image, and evaluates deviation_g against v_star.
DeviationFn scene_deviation(const Scene& scene, const Fov& v_star, double direction_x, double direction_y,
                            Divergence divergence);

/// 1 - exp(-|v - v*|^2 / (2 scale^2)).
DeviationFn smooth_deviation(const Vec3& v_star, double scale);

/// Max deviation over `probes` uniform draws from the epsilon-ball around v*.
double estimate_delta(const DeviationFn& g, const Vec3& v_star, double epsilon, int probes, Rng& rng);

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

/// Mass of N(eta, sigma^2 I_3) inside the ball of radius epsilon at the origin.
McEstimate c_g_estimate(double epsilon, const Vec3& eta, double sigma, long mc_trials, Rng& rng);

struct ExpansionInterval {
  double c_a = 0.0;
  double c_b = 0.0;
  double lower = 0.0;  // clamped range of r placing the sample inside the ball
  double upper = 0.0;
  double c_e = 0.0;
};

/// Closed-form fraction of r in [r_min, r_max] with v_r inside the epsilon-ball.
/// Requires |p_d - p*| < epsilon and equal aspect ratios.
ExpansionInterval c_e_interval(double epsilon, const Vec3& v_star, const Vec3& v_d, double lambda,
                               double r_min, double r_max);
double c_e_closed_form(double epsilon, const Vec3& v_star, const Vec3& v_d, double lambda, double r_min,
                       double r_max);

struct BoundReport {
  FovSampler sampler = FovSampler::Normal;
  int n = 0;
  long trials = 0;
  std::vector<double> min_deviation;
  double mean_min_deviation = 0.0;
  double analytic_c = 0.0;
  double analytic_c_se = 0.0;  // zero for the closed form
  double delta = 0.0;
  double bound = 0.0;  // delta + (1 - C)^n
  double empirical_not_a = 0.0;
  double analytic_not_a = 0.0;
  double combined_se = 0.0;  // binomial SE under the analytic value plus C's propagated SE
  /// Trials with a sample inside the epsilon-ball whose minimum still exceeds delta.
  /// The bound holds in expectation; these trials are the only way it can fail.
  double violation_fraction = 0.0;
  double mean_slack = 0.0;  // bound - mean_min_deviation
};

/// Draws n contexts from the sampler at v_d = v* + eta in each macro-trial.
/// Trial t uses its own stream derived from (seed, t).
BoundReport min_deviation_mc(const DeviationFn& g, const TheoremConfig& config, FovSampler sampler);

/// Mean of the running minimum over a shared sample prefix, one entry per n in `ns`.
std::vector<double> mean_min_deviation_curve(const DeviationFn& g, const TheoremConfig& config,
                                             FovSampler sampler, std::span<const int> ns);

}  // namespace halc
