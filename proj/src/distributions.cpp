#include "halc/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "halc/error.hpp"

namespace halc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kPosInf = std::numeric_limits<double>::infinity();

void require_same_size(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw InvalidInput(std::string(op) + ": vocabulary size mismatch (" + std::to_string(a) +
                       " vs " + std::to_string(b) + ")");
  }
}

// x * log2(x / m) with the 0 log 0 = 0 convention.
double kl_term(double x, double m) {
  if (x <= 0.0) return 0.0;
  return x * std::log2(x / m);
}

}  // namespace

std::size_t PlausibilityMask::count() const {
  return static_cast<std::size_t>(std::count(allowed.begin(), allowed.end(), true));
}

ProbDist softmax(const Logits& l) {
  if (l.values.empty()) throw InvalidInput("softmax: empty logits");
  const double mx = *std::max_element(l.values.begin(), l.values.end());
  if (mx == kNegInf) throw InvalidInput("softmax: every entry is -inf");
  ProbDist out;
  out.probs.resize(l.size());
  // A +inf entry can only come out of a contrast against a masked amateur; the
  // limit puts all mass on the +inf entries.
  if (mx == kPosInf) {
    for (std::size_t i = 0; i < l.size(); ++i) out.probs[i] = l.values[i] == kPosInf ? 1.0 : 0.0;
  } else {
    for (std::size_t i = 0; i < l.size(); ++i) out.probs[i] = std::exp(l.values[i] - mx);
  }
  const double z = std::accumulate(out.probs.begin(), out.probs.end(), 0.0);
  for (double& p : out.probs) p /= z;
  return out;
}

double jsd(const ProbDist& p, const ProbDist& q) {
  require_same_size(p.size(), q.size(), "jsd");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    acc += kl_term(p[i], m) + kl_term(q[i], m);
  }
  return std::clamp(0.5 * acc, 0.0, 1.0);
}

double total_variation(const ProbDist& p, const ProbDist& q) {
  require_same_size(p.size(), q.size(), "total_variation");
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - q[i]);
  return std::clamp(0.5 * acc, 0.0, 1.0);
}

Logits contrast_logits(const Logits& expert, const Logits& amateur, double alpha) {
  require_same_size(expert.size(), amateur.size(), "contrast_logits");
  if (!(alpha >= 0.0)) throw InvalidParameter("contrast_logits: alpha must be non-negative");
  Logits out;
  out.values.resize(expert.size());
  for (std::size_t i = 0; i < expert.size(); ++i) {
    const double e = expert[i];
    const double a = amateur[i];
    if (e == kNegInf) {
      out.values[i] = kNegInf;
    } else if (alpha == 0.0) {
      out.values[i] = e;
    } else if (a == kNegInf) {
      out.values[i] = kPosInf;
    } else {
      out.values[i] = (1.0 + alpha) * e - alpha * a;
    }
  }
  return out;
}

PlausibilityMask plausibility_mask(const ProbDist& expert, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidParameter("plausibility threshold must be in (0,1)");
  PlausibilityMask mask;
  mask.beta = beta;
  const double mx = *std::max_element(expert.probs.begin(), expert.probs.end());
  const double cut = beta * mx;
  mask.allowed.resize(expert.size());
  for (std::size_t i = 0; i < expert.size(); ++i) mask.allowed[i] = expert[i] >= cut;
  return mask;
}

ProbDist contrast_distribution(const Logits& expert, const Logits& amateur, double alpha,
                               double beta) {
  const PlausibilityMask mask = plausibility_mask(softmax(expert), beta);
  Logits contrasted = contrast_logits(expert, amateur, alpha);
  for (std::size_t i = 0; i < contrasted.size(); ++i) {
    if (!mask.allowed[i]) contrasted.values[i] = kNegInf;
  }
  return softmax(contrasted);
}

std::vector<std::vector<double>> jsd_matrix(std::span<const ProbDist> dists) {
  const std::size_t n = dists.size();
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      out[i][j] = out[j][i] = jsd(dists[i], dists[j]);
    }
  }
  return out;
}

std::vector<std::pair<int, int>> top_m_pairs(std::span<const ProbDist> dists, int m) {
  if (dists.size() < 2) throw InvalidParameter("top_m_pairs: need at least two distributions");
  if (m < 1) throw InvalidParameter("top_m_pairs: m must be at least 1");
  struct Ranked {
    double d;
    int i;
    int j;
  };
  std::vector<Ranked> all;
  const int n = static_cast<int>(dists.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) all.push_back({jsd(dists[i], dists[j]), i, j});
  }
  // stable_sort keeps the lexicographic generation order among equal distances.
  std::stable_sort(all.begin(), all.end(), [](const Ranked& a, const Ranked& b) { return a.d > b.d; });
  const std::size_t keep = std::min<std::size_t>(static_cast<std::size_t>(m), all.size());
  std::vector<std::pair<int, int>> out;
  out.reserve(keep);
  for (std::size_t k = 0; k < keep; ++k) out.emplace_back(all[k].i, all[k].j);
  return out;
}

TokenId argmax_token(const ProbDist& p) {
  if (p.probs.empty()) throw InvalidInput("argmax_token: empty distribution");
  return static_cast<TokenId>(std::max_element(p.probs.begin(), p.probs.end()) - p.probs.begin());
}

TokenId argmax_token(const Logits& l) {
  if (l.values.empty()) throw InvalidInput("argmax_token: empty logits");
  return static_cast<TokenId>(std::max_element(l.values.begin(), l.values.end()) - l.values.begin());
}

double log_prob(const Logits& l, TokenId t) {
  const double mx = *std::max_element(l.values.begin(), l.values.end());
  double z = 0.0;
  for (double v : l.values) z += std::exp(v - mx);
  return l.values.at(static_cast<std::size_t>(t)) - mx - std::log(z);
}

}  // namespace halc
