#include "halc/decoder.hpp"

#include <algorithm>
#include <map>
#include <numeric>

#include "halc/error.hpp"
#include "halc/scene_io.hpp"

namespace halc {

std::string_view to_string(SamplingMode m) {
  switch (m) {
    case SamplingMode::Exponential: return "exponential";
    case SamplingMode::Normal: return "normal";
    case SamplingMode::Random: return "random";
    case SamplingMode::Center: return "center";
    case SamplingMode::Original: return "original";
  }
  return "exponential";
}

std::string_view to_string(IdkPolicy p) {
  switch (p) {
    case IdkPolicy::Off: return "off";
    case IdkPolicy::Literal: return "literal";
    case IdkPolicy::Confidence: return "confidence";
  }
  return "off";
}

SamplingMode sampling_mode_from_string(std::string_view s) {
  if (s == "exponential" || s == "detector") return SamplingMode::Exponential;
  if (s == "normal") return SamplingMode::Normal;
  if (s == "random") return SamplingMode::Random;
  if (s == "center") return SamplingMode::Center;
  if (s == "original") return SamplingMode::Original;
  throw InvalidParameter("unknown sampling mode '" + std::string(s) + "'");
}

IdkPolicy idk_policy_from_string(std::string_view s) {
  if (s == "off") return IdkPolicy::Off;
  if (s == "literal") return IdkPolicy::Literal;
  if (s == "confidence") return IdkPolicy::Confidence;
  throw InvalidParameter("unknown idk policy '" + std::string(s) + "'");
}

void DecodeConfig::validate() const {
  if (n < 2) throw InvalidParameter("n must be at least 2");
  if (m < 1 || m > n * (n - 1) / 2) throw InvalidParameter("m must lie in [1, n(n-1)/2]");
  if (k < 1) throw InvalidParameter("beam size k must be at least 1");
  if (!(alpha >= 0.0)) throw InvalidParameter("alpha must be non-negative");
  if (!(beta > 0.0 && beta < 1.0)) throw InvalidParameter("beta must lie in (0,1)");
  if (!(lambda > -1.0)) throw InvalidParameter("lambda must exceed -1");
  if (sampling_mode == SamplingMode::Normal && !(sigma > 0.0)) throw InvalidParameter("sigma must be positive");
  if (max_tokens < 1) throw InvalidParameter("max_tokens must be at least 1");
}

int DecodeConfig::effective_pairs() const { return std::min(m, n * (n - 1) / 2); }

// ---------------------------------------------------------------------------
// Baselines

DecodeResult decode_greedy(const TokenModel& model, const DecodeConfig& config) {
  if (config.max_tokens < 1) throw InvalidParameter("max_tokens must be at least 1");
  DecodeResult out;
  out.trace.method = "greedy";
  const Fov full = Fov::full(model.image());
  for (int step = 0; step < config.max_tokens; ++step) {
    const TokenId t = argmax_token(model.logits(full, out.tokens));
    StepRecord rec;
    rec.step = step;
    rec.base_token = t;
    rec.chosen = t;
    rec.model_calls = 1;
    out.trace.steps.push_back(std::move(rec));
    ++out.trace.totals.model_calls;
    if (t == model.eos()) break;
    out.tokens.push_back(t);
  }
  return out;
}

DecodeResult decode_beam(const TokenModel& model, int k, const DecodeConfig& config) {
  if (k < 1) throw InvalidParameter("beam size k must be at least 1");
  if (config.max_tokens < 1) throw InvalidParameter("max_tokens must be at least 1");
  struct Hyp {
    std::vector<TokenId> tokens;
    double logp = 0.0;
    bool terminated = false;
  };
  DecodeResult out;
  out.trace.method = "beam";
  const Fov full = Fov::full(model.image());
  std::vector<Hyp> beams{Hyp{}};
  for (int step = 0; step < config.max_tokens; ++step) {
    if (std::all_of(beams.begin(), beams.end(), [](const Hyp& h) { return h.terminated; })) break;
    std::vector<Hyp> pool;
    for (std::size_t b = 0; b < beams.size(); ++b) {
      const Hyp& h = beams[b];
      if (h.terminated) {
        pool.push_back(h);
        continue;
      }
      const Logits l = model.logits(full, h.tokens);
      std::vector<double> lp(l.size());
      for (std::size_t t = 0; t < l.size(); ++t) lp[t] = log_prob(l, static_cast<TokenId>(t));
      std::vector<TokenId> order(l.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](TokenId a, TokenId c) { return lp[static_cast<std::size_t>(a)] > lp[static_cast<std::size_t>(c)]; });
      StepRecord rec;
      rec.step = step;
      rec.beam = static_cast<int>(b);
      rec.base_token = order.front();
      rec.model_calls = 1;
      for (int r = 0; r < k && r < static_cast<int>(order.size()); ++r) {
        const TokenId t = order[static_cast<std::size_t>(r)];
        rec.candidates.push_back(t);
        Hyp next{h.tokens, h.logp + lp[static_cast<std::size_t>(t)], t == model.eos()};
        if (!next.terminated) next.tokens.push_back(t);
        pool.push_back(std::move(next));
      }
      out.trace.steps.push_back(std::move(rec));
      ++out.trace.totals.model_calls;
    }
    std::stable_sort(pool.begin(), pool.end(), [](const Hyp& a, const Hyp& c) { return a.logp > c.logp; });
    if (static_cast<int>(pool.size()) > k) pool.resize(static_cast<std::size_t>(k));
    beams = std::move(pool);
  }
  const Hyp* best = nullptr;
  for (const auto& h : beams) {
    if (h.terminated && (best == nullptr || h.logp > best->logp)) best = &h;
  }
  if (best == nullptr) best = &beams.front();
  out.tokens = best->tokens;
  return out;
}

// ---------------------------------------------------------------------------
// Focal-contrast correction

namespace {

Fov center_box(const ImageSpec& image) {
  return Fov{image.width / 2, image.height / 2, image.width / 2, image.height / 2};
}

}  // namespace

HalcStepResult halc_step(const TokenModel& model, const Detector& detector,
                         std::span<const TokenId> prefix, TokenId base_token, const DecodeConfig& config,
                         Rng& rng) {
  const ImageSpec& image = model.image();
  HalcStepResult out;
  switch (config.sampling_mode) {
    case SamplingMode::Exponential:
    case SamplingMode::Normal:
      out.detector_called = true;
      out.detector_box = detector.locate(base_token, rng);
      out.detector_hit = out.detector_box.has_value();
      if (!out.detector_hit) {
        out.fovs = sample_fovs_random(image, config.n, rng);
      } else if (config.sampling_mode == SamplingMode::Exponential) {
        out.fovs = sample_fovs_exponential(*out.detector_box, config.lambda, config.n, image);
      } else {
        out.fovs = sample_fovs_normal(*out.detector_box, config.sigma, config.n, rng, image);
      }
      break;
    case SamplingMode::Random:
      out.fovs = sample_fovs_random(image, config.n, rng);
      break;
    case SamplingMode::Center:
      out.fovs = sample_fovs_exponential(center_box(image), config.lambda, config.n, image);
      break;
    case SamplingMode::Original:
      out.fovs = sample_fovs_exponential(Fov::full(image), config.lambda, config.n, image);
      break;
  }

  std::vector<Logits> logits;
  std::vector<ProbDist> dists;
  logits.reserve(out.fovs.samples.size());
  for (const Fov& f : out.fovs.samples) {
    logits.push_back(model.logits(f, prefix));
    dists.push_back(softmax(logits.back()));
    ++out.model_calls;
  }
  out.jsd = jsd_matrix(dists);
  out.pairs = top_m_pairs(dists, config.m);

  auto emit = [&](int expert, int amateur) {
    ContrastCandidate c;
    c.expert = expert;
    c.amateur = amateur;
    c.dist = contrast_distribution(logits[static_cast<std::size_t>(expert)],
                                   logits[static_cast<std::size_t>(amateur)], config.alpha, config.beta);
    c.token = argmax_token(c.dist);
    out.candidates.push_back(std::move(c));
  };
  for (auto [i, j] : out.pairs) {
    const auto& fi = out.fovs.samples[static_cast<std::size_t>(i)];
    const auto& fj = out.fovs.samples[static_cast<std::size_t>(j)];
    const int larger = fi.area() >= fj.area() ? i : j;
    const int smaller = larger == i ? j : i;
    emit(larger, smaller);  // positive
    emit(smaller, larger);  // negative
  }
  return out;
}

std::vector<BeamState> select_beams(std::span<const BeamCandidate> candidates, const MatchScorer& scorer,
                                    int k) {
  if (candidates.empty()) throw InvalidInput("select_beams: empty candidate list");
  if (k < 1) throw InvalidParameter("beam size k must be at least 1");
  std::vector<double> scores(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) scores[i] = scorer.score(candidates[i].tokens);
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return candidates[a].keeps_base && !candidates[b].keeps_base;
  });
  std::vector<BeamState> out;
  for (std::size_t idx : order) {
    const auto& c = candidates[idx];
    const bool dup = std::any_of(out.begin(), out.end(), [&](const BeamState& s) {
      return s.terminated == c.terminated && s.tokens == c.tokens;
    });
    if (dup) continue;
    out.push_back(BeamState{c.tokens, scores[idx], c.terminated, static_cast<int>(idx)});
    if (static_cast<int>(out.size()) == k) break;
  }
  return out;
}

TokenId apply_idk_policy(TokenId original, TokenId corrected, bool detector_hit, IdkPolicy policy,
                         double threshold, double corrected_prob, TokenId idk) {
  switch (policy) {
    case IdkPolicy::Off: return corrected;
    case IdkPolicy::Literal: return detector_hit && corrected == original ? idk : corrected;
    case IdkPolicy::Confidence:
      return detector_hit && corrected == original && corrected_prob < threshold ? idk : corrected;
  }
  return corrected;
}

DecodeResult decode_halc(const TokenModel& model, const Detector& detector, const MatchScorer& scorer,
                         const PosLexicon& lexicon, const DecodeConfig& config) {
  config.validate();
  struct Origin {
    int record = -1;  // index into trace.steps
    TokenId base = -1;
    bool triggered = false;
    bool detector_hit = false;
    double prob = 1.0;
  };

  DecodeResult out;
  out.trace.method = "halc";
  out.trace.n = config.n;
  Rng rng(config.seed);
  const Fov full = Fov::full(model.image());
  std::vector<BeamState> beams{BeamState{{}, scorer.score({}), false, -1}};

  for (int step = 0; step < config.max_tokens; ++step) {
    if (std::all_of(beams.begin(), beams.end(), [](const BeamState& b) { return b.terminated; })) break;
    std::vector<BeamCandidate> pool;
    std::vector<Origin> origins;
    for (std::size_t b = 0; b < beams.size(); ++b) {
      const BeamState& beam = beams[b];
      if (beam.terminated) {
        pool.push_back(BeamCandidate{beam.tokens, true, true});
        origins.push_back(Origin{});
        continue;
      }
      StepRecord rec;
      rec.step = step;
      rec.beam = static_cast<int>(b);
      const TokenId base = argmax_token(model.logits(full, beam.tokens));
      rec.base_token = base;
      rec.model_calls = 1;
      const int record = static_cast<int>(out.trace.steps.size());

      const bool triggered =
          base != model.eos() && tag_token(lexicon, model.token_name(base)) != HallucinationCategory::None;
      if (!triggered) {
        BeamCandidate c{beam.tokens, base == model.eos(), true};
        if (!c.terminated) c.tokens.push_back(base);
        pool.push_back(std::move(c));
        origins.push_back(Origin{record, base, false, false, 1.0});
        rec.candidates.push_back(base);
      } else {
        HalcStepResult hs = halc_step(model, detector, beam.tokens, base, config, rng);
        rec.triggered = true;
        rec.detector_hit = hs.detector_hit;
        rec.detector_box = hs.detector_box;
        rec.fovs = hs.fovs.samples;
        rec.jsd = std::move(hs.jsd);
        rec.pairs = hs.pairs;
        rec.model_calls += hs.model_calls;
        out.trace.totals.detector_calls += hs.detector_called ? 1 : 0;
        ++out.trace.totals.triggered;
        for (const auto& cand : hs.candidates) {
          BeamCandidate c{beam.tokens, cand.token == model.eos(), cand.token == base};
          if (!c.terminated) c.tokens.push_back(cand.token);
          pool.push_back(std::move(c));
          origins.push_back(
              Origin{record, base, true, hs.detector_hit, cand.dist[static_cast<std::size_t>(cand.token)]});
          rec.candidates.push_back(cand.token);
        }
      }
      out.trace.totals.model_calls += rec.model_calls;
      out.trace.steps.push_back(std::move(rec));
    }

    std::vector<BeamState> next = select_beams(pool, scorer, config.k);
    for (BeamState& s : next) {
      const Origin& o = origins[static_cast<std::size_t>(s.source)];
      if (o.record < 0) continue;
      StepRecord& rec = out.trace.steps[static_cast<std::size_t>(o.record)];
      const TokenId corrected = s.terminated ? model.eos() : s.tokens.back();
      if (o.triggered && !s.terminated) {
        const TokenId final_token = apply_idk_policy(o.base, corrected, o.detector_hit, config.idk_policy,
                                                     config.idk_threshold, o.prob, model.idk());
        if (final_token != corrected) {
          s.tokens.back() = final_token;
          s.score = scorer.score(s.tokens);
        }
      }
      if (rec.chosen < 0) rec.chosen = s.terminated ? model.eos() : s.tokens.back();
    }
    beams = std::move(next);
  }

  const BeamState* best = &beams.front();
  for (const auto& b : beams) {
    if (b.score > best->score) best = &b;
  }
  out.tokens = best->tokens;
  return out;
}

// ---------------------------------------------------------------------------

nlohmann::json trace_to_json(const DecodeTrace& trace, const TokenModel& model) {
  using nlohmann::json;
  auto name = [&](TokenId t) { return t < 0 ? std::string() : model.token_name(t); };
  json steps = json::array();
  for (const auto& r : trace.steps) {
    json fovs = json::array();
    for (const auto& f : r.fovs) fovs.push_back(fov_to_json(f, true));
    json jsd = json::array();
    for (const auto& row : r.jsd) {
      json jr = json::array();
      for (double v : row) jr.push_back(round6(v));
      jsd.push_back(std::move(jr));
    }
    json pairs = json::array();
    for (auto [i, j] : r.pairs) pairs.push_back({i, j});
    json cands = json::array();
    for (TokenId t : r.candidates) cands.push_back(name(t));
    json js{{"step", r.step},
            {"beam", r.beam},
            {"base_token", name(r.base_token)},
            {"triggered", r.triggered},
            {"detector_hit", r.detector_hit},
            {"fovs", std::move(fovs)},
            {"jsd", std::move(jsd)},
            {"pairs", std::move(pairs)},
            {"candidates", std::move(cands)},
            {"chosen", name(r.chosen)},
            {"model_calls", r.model_calls}};
    if (r.detector_box) js["detector_box"] = fov_to_json(*r.detector_box, true);
    steps.push_back(std::move(js));
  }
  return json{{"method", trace.method},
              {"n", trace.n},
              {"steps", std::move(steps)},
              {"totals",
               {{"model_calls", trace.totals.model_calls},
                {"detector_calls", trace.totals.detector_calls},
                {"triggered", trace.totals.triggered}}}};
}

}  // namespace halc
