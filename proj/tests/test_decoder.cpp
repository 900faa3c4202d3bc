#include <algorithm>

#include "doctest.h"

#include "halc/cost.hpp"
#include "halc/decoder.hpp"
#include "halc/error.hpp"

using namespace halc;

namespace {

std::string caption(const Scene& s, const std::vector<TokenId>& t) {
  std::string out;
  for (const auto& w : s.decode(t)) out += (out.empty() ? "" : " ") + w;
  return out;
}

bool mentions(const Scene& s, const std::vector<TokenId>& t, const std::string& w) {
  const auto words = s.decode(t);
  return std::find(words.begin(), words.end(), w) != words.end();
}

std::vector<TokenId> trap_prefix(const Scene& s) {
  const std::vector<std::string> words{"a", "beach", "sits", "near", "the", "man", ".", "a"};
  return s.encode(words);
}

/// Returns the same distribution everywhere: every window is equivalent.
class FlatModel final : public TokenModel {
 public:
  explicit FlatModel(const Scene& s) : s_(&s) {}
  Logits logits(const Fov&, std::span<const TokenId> prefix) const override {
    return toy_model_logits(*s_, Fov::full(s_->image()), prefix);
  }
  const ImageSpec& image() const override { return s_->image(); }
  std::size_t vocab_size() const override { return s_->vocab_size(); }
  TokenId eos() const override { return s_->eos(); }
  TokenId idk() const override { return s_->idk(); }
  const std::string& token_name(TokenId id) const override { return s_->token_name(id); }

 private:
  const Scene* s_;
};

}  // namespace

TEST_CASE("DecodeConfig validation") {
  DecodeConfig c;
  CHECK_NOTHROW(c.validate());
  c.n = 1;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  c = {};
  c.m = 7;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  c = {};
  c.beta = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  c = {};
  c.alpha = -1;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
  c = {};
  c.k = 0;
  CHECK_THROWS_AS(c.validate(), InvalidParameter);
}

TEST_CASE("greedy and beam baselines") {
  const Scene s = demo_scene();
  const ToyModel model(s);
  DecodeConfig c;
  const auto g = decode_greedy(model, c);
  CHECK(caption(s, g.tokens) == "a beach sits near the man . a surfboard sits near the");
  CHECK(mentions(s, g.tokens, "surfboard"));
  CHECK_FALSE(mentions(s, g.tokens, "clock"));
  CHECK(g.trace.totals.model_calls == static_cast<long>(g.trace.steps.size()));

  c.max_tokens = 1;
  CHECK(decode_greedy(model, c).tokens.size() == 1);

  c = {};
  CHECK(decode_beam(model, 1, c).tokens == g.tokens);
  const auto b1 = decode_beam(model, 3, c);
  const auto b2 = decode_beam(model, 3, c);
  CHECK(b1.tokens == b2.tokens);
  for (TokenId t : b1.tokens) CHECK(t != s.idk());
}

TEST_CASE("beam search returns the best terminated hypothesis") {
  const Scene s = demo_scene();
  const ToyModel model(s);
  DecodeConfig c;
  const auto b = decode_beam(model, 3, c);
  const Fov full = Fov::full(s.image());
  auto score = [&](const std::vector<TokenId>& t) {
    double lp = 0.0;
    std::vector<TokenId> prefix;
    for (TokenId x : t) {
      lp += log_prob(model.logits(full, prefix), x);
      prefix.push_back(x);
    }
    return lp + log_prob(model.logits(full, prefix), s.eos());
  };
  const auto g = decode_greedy(model, c);
  CHECK(score(b.tokens) >= score(g.tokens) - 1e-12);
}

TEST_CASE("halc_step on the demo trap") {
  const Scene s = demo_scene();
  const ToyModel model(s);
  const ToyDetector det(s, default_detector_eta());
  DecodeConfig c;
  Rng rng(0);
  const auto prefix = trap_prefix(s);
  const TokenId surf = s.token_id("surfboard");
  const auto r = halc_step(model, det, prefix, surf, c, rng);
  CHECK(r.detector_hit);
  CHECK(r.candidates.size() == 12);
  CHECK(r.model_calls == 4);
  const bool has_clock = std::any_of(r.candidates.begin(), r.candidates.end(),
                                     [&](const ContrastCandidate& x) { return x.token == s.token_id("clock"); });
  CHECK(has_clock);

  c.n = 2;
  c.m = 1;
  Rng rng2(0);
  CHECK(halc_step(model, det, prefix, surf, c, rng2).candidates.size() == 2);

  c = {};
  c.n = 5;
  c.m = 7;
  Rng rng3(0);
  CHECK(halc_step(model, det, prefix, surf, c, rng3).candidates.size() == 14);
}

TEST_CASE("identical windows give zero divergence and the plain argmax") {
  const Scene s = demo_scene();
  const FlatModel model(s);
  const ToyDetector det(s, default_detector_eta());
  DecodeConfig c;
  Rng rng(0);
  const auto prefix = trap_prefix(s);
  const auto r = halc_step(model, det, prefix, s.token_id("surfboard"), c, rng);
  for (const auto& row : r.jsd) {
    for (double v : row) CHECK(v == 0.0);
  }
  const TokenId plain = argmax_token(model.logits(Fov::full(s.image()), prefix));
  for (const auto& cand : r.candidates) CHECK(cand.token == plain);
}

TEST_CASE("select_beams") {
  const Scene s = demo_scene();
  const OracleScorer oracle(s);
  const std::vector<std::string> w1{"a", "surfboard"}, w2{"a", "clock"}, w3{"a", "book"};
  std::vector<BeamCandidate> same(3, BeamCandidate{s.encode(w1), false, true});
  CHECK(select_beams(same, oracle, 3).size() == 1);

  std::vector<BeamCandidate> mixed{{s.encode(w1), false, true}, {s.encode(w2), false, false},
                                   {s.encode(w3), false, false}};
  const auto best = select_beams(mixed, oracle, 1);
  REQUIRE(best.size() == 1);
  CHECK(best[0].tokens == s.encode(w2));
  CHECK(best[0].source == 1);

  const auto all = select_beams(mixed, oracle, 3);
  REQUIRE(all.size() == 3);
  for (std::size_t i = 1; i < all.size(); ++i) CHECK(all[i - 1].score >= all[i].score);
  for (std::size_t i = 0; i < all.size(); ++i) {
    for (std::size_t j = i + 1; j < all.size(); ++j) CHECK(all[i].tokens != all[j].tokens);
  }

  // Ties keep the base-token candidate, then earlier candidates.
  const ConstantScorer flat;
  std::vector<BeamCandidate> tied{{s.encode(w2), false, false}, {s.encode(w1), false, true},
                                  {s.encode(w3), false, false}};
  CHECK(select_beams(tied, flat, 1)[0].tokens == s.encode(w1));
  tied[1].keeps_base = false;
  CHECK(select_beams(tied, flat, 1)[0].tokens == s.encode(w2));
}

TEST_CASE("apply_idk_policy") {
  const TokenId idk = 99;
  CHECK(apply_idk_policy(3, 3, true, IdkPolicy::Off, 0.5, 0.9, idk) == 3);
  CHECK(apply_idk_policy(3, 4, true, IdkPolicy::Off, 0.5, 0.9, idk) == 4);
  CHECK(apply_idk_policy(3, 3, true, IdkPolicy::Literal, 0.5, 0.9, idk) == idk);
  CHECK(apply_idk_policy(3, 3, false, IdkPolicy::Literal, 0.5, 0.9, idk) == 3);
  CHECK(apply_idk_policy(3, 4, true, IdkPolicy::Literal, 0.5, 0.9, idk) == 4);
  CHECK(apply_idk_policy(3, 3, true, IdkPolicy::Confidence, 0.5, 0.9, idk) == 3);
  CHECK(apply_idk_policy(3, 3, true, IdkPolicy::Confidence, 0.5, 0.2, idk) == idk);
}

TEST_CASE("decode_halc on the demo scene") {
  const Scene s = demo_scene();
  const ToyModel model(s);
  const ToyDetector det(s, default_detector_eta());
  const OracleScorer oracle(s);
  const PosLexicon lex = PosLexicon::standard(s.vocabulary());
  DecodeConfig c;
  const auto r = decode_halc(model, det, oracle, lex, c);
  CHECK(mentions(s, r.tokens, "clock"));
  CHECK_FALSE(mentions(s, r.tokens, "surfboard"));
  for (TokenId t : r.tokens) CHECK(t != s.idk());

  const auto again = decode_halc(model, det, oracle, lex, c);
  CHECK(again.tokens == r.tokens);
  CHECK(trace_to_json(again.trace, model) == trace_to_json(r.trace, model));

  CostModel cm;
  cm.n = c.n;
  CHECK(verify_cost_accounting(r.trace, cm));
  CHECK(r.trace.totals.model_calls ==
        static_cast<long>(r.trace.steps.size()) + r.trace.totals.triggered * c.n);

  const auto j = trace_to_json(r.trace, model);
  CHECK(j.contains("steps"));
  CHECK(j["totals"]["triggered"] == r.trace.totals.triggered);

  c.idk_policy = IdkPolicy::Literal;
  const auto lit = decode_halc(model, det, oracle, lex, c);
  CHECK(mentions(s, lit.tokens, "[IDK]"));
}

TEST_CASE("alpha = 0 with a constant scorer reproduces greedy") {
  CorpusSpec spec;
  spec.count = 20;
  const ConstantScorer flat;
  DecodeConfig c;
  c.alpha = 0.0;
  c.beta = 1e-12;
  for (const auto& s : generate_corpus(5, spec)) {
    const ToyModel model(s);
    const ToyDetector det(s, default_detector_eta());
    CHECK(decode_halc(model, det, flat, PosLexicon::standard(s.vocabulary()), c).tokens ==
          decode_greedy(model, c).tokens);
  }
}

TEST_CASE("sampling modes all decode") {
  const Scene s = demo_scene();
  const ToyModel model(s);
  const ToyDetector det(s, default_detector_eta());
  const OracleScorer oracle(s);
  const PosLexicon lex = PosLexicon::standard(s.vocabulary());
  for (auto mode : {SamplingMode::Exponential, SamplingMode::Normal, SamplingMode::Random, SamplingMode::Center,
                    SamplingMode::Original}) {
    DecodeConfig c;
    c.sampling_mode = mode;
    const auto r = decode_halc(model, det, oracle, lex, c);
    CostModel cm;
    CHECK(verify_cost_accounting(r.trace, cm));
    CHECK(sampling_mode_from_string(to_string(mode)) == mode);
  }
  CHECK(sampling_mode_from_string("detector") == SamplingMode::Exponential);
  CHECK_THROWS_AS(sampling_mode_from_string("bogus"), InvalidParameter);
}
