#include <cmath>
#include <random>

#include "doctest.h"

#include "halc/error.hpp"
#include "halc/scene_io.hpp"
#include "halc/sim_world.hpp"

using namespace halc;

namespace {

const Fov kClock{64, 48, 360, 210};

std::vector<TokenId> trap_prefix(const Scene& s) {
  const std::vector<std::string> words{"a", "beach", "sits", "near", "the", "man", ".", "a"};
  return s.encode(words);
}

}  // namespace

TEST_CASE("profile values") {
  const ImageSpec img(640, 480);
  const Peaking p{kClock, 20.0, 3.0, 0.5};
  CHECK(profile_value(p, kClock, img) == 3.5);

  const ContextShift cs{0.1, 2.0};
  const Fov full = Fov::full(img);
  const Fov half{640.0 / std::sqrt(2.0), 480.0 / std::sqrt(2.0), 320, 240};
  CHECK(profile_value(cs, full, img) - profile_value(cs, half, img) == doctest::Approx(0.1 * std::log(2.0)));

  CHECK(profile_value(StableHigh{4.2}, half, img) == 4.2);
  const Noisy n{0.3, 7, 0.2};
  const double v = profile_value(n, half, img);
  CHECK(v >= -0.1 - 1e-12);
  CHECK(v <= 0.5 + 1e-12);
  CHECK(profile_value(n, half, img) == v);
}

TEST_CASE("peaking value decreases with distance from its optimum") {
  const ImageSpec img(640, 480);
  const Peaking p{kClock, 20.0, 3.0, 0.0};
  std::mt19937_64 g(3);
  std::normal_distribution<double> z(0, 30);
  for (int t = 0; t < 300; ++t) {
    const Fov a{kClock.width + z(g), kClock.height + z(g), kClock.center_x + z(g), kClock.center_y + z(g)};
    const Fov b{kClock.width + z(g), kClock.height + z(g), kClock.center_x + z(g), kClock.center_y + z(g)};
    const double da = fov_distance(a, kClock), db = fov_distance(b, kClock);
    if (std::abs(da - db) < 1e-6) continue;
    CHECK((da < db) == (profile_value(p, a, img) > profile_value(p, b, img)));
  }
}

TEST_CASE("toy model logits") {
  const Scene s = demo_scene();
  const Fov full = Fov::full(s.image());
  const auto prefix = trap_prefix(s);
  const Logits a = toy_model_logits(s, full, prefix);
  const Logits b = toy_model_logits(s, full, prefix);
  CHECK(a.values == b.values);

  const TokenId clock = s.token_id("clock");
  CHECK(toy_model_logits(s, kClock, prefix)[static_cast<std::size_t>(clock)] == 3.0);

  SUBCASE("function slots force the grammar word") {
    const std::vector<TokenId> one{s.token_id("a")};
    const std::vector<TokenId> two{s.token_id("a"), s.token_id("beach")};
    CHECK(argmax_token(toy_model_logits(s, full, two)) == s.token_id("sits"));
    CHECK(argmax_token(toy_model_logits(s, full, {})) == s.token_id("a"));
    CHECK(argmax_token(toy_model_logits(s, full, one)) == s.token_id("beach"));
  }
  SUBCASE("mentioned objects are suppressed") {
    const TokenId beach = s.token_id("beach");
    CHECK(toy_model_logits(s, full, prefix)[static_cast<std::size_t>(beach)] == -50.0);
  }
  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(toy_model_logits(s, Fov{10, 10, -100, 0}, prefix), InvalidInput);
    const std::vector<TokenId> bad{9999};
    CHECK_THROWS_AS(toy_model_logits(s, full, bad), InvalidInput);
  }
}

TEST_CASE("demo fixture: hallucination at the detector box, victim at the optimum") {
  const Scene s = demo_scene();
  const auto prefix = trap_prefix(s);
  const FovOffset eta = default_detector_eta();
  const Fov v_d{kClock.width + eta.dw, kClock.height + eta.dh, kClock.center_x + eta.dcx, kClock.center_y + eta.dcy};
  CHECK(s.token_name(argmax_token(toy_model_logits(s, v_d, prefix))) == "surfboard");
  CHECK(s.token_name(argmax_token(toy_model_logits(s, kClock, prefix))) == "clock");
  CHECK(s.token_name(argmax_token(toy_model_logits(s, Fov::full(s.image()), prefix))) == "surfboard");
}

TEST_CASE("toy detector") {
  const Scene s = demo_scene();
  Rng rng(1);
  CHECK(toy_detector("clock", s, FovOffset{}, 0.25, rng) == kClock);
  CHECK_FALSE(toy_detector("giraffe", s, FovOffset{}, 0.25, rng).has_value());
  const auto anchored = toy_detector("surfboard", s, FovOffset{-10, -8, 0, 0}, 0.25, rng);
  REQUIRE(anchored.has_value());
  CHECK(anchored->width == 54);
  CHECK(anchored->height == 40);
  CHECK(anchored->center_x == 360);
  CHECK_FALSE(toy_detector("surfboard", s, FovOffset{}, 0.5, rng).has_value());

  // Hallucinated token anchored on "beach".
  std::vector<SceneObject> objs{{"beach", Fov{200, 100, 300, 300}, StableHigh{4}, true, {}},
                                {"kite", Fov{10, 10, 50, 50}, ContextShift{0.1, 2}, false, "beach"}};
  const Scene t(ImageSpec(640, 480), object_pool(), objs, {}, {"a", "beach"});
  const auto k = toy_detector("kite", t, FovOffset{5, 5, 1, 1}, 0.25, rng);
  REQUIRE(k.has_value());
  CHECK(*k == Fov{205, 105, 301, 301});
}

TEST_CASE("tag_token") {
  const Scene s = demo_scene();
  PosLexicon lex = PosLexicon::standard(s.vocabulary());
  CHECK(tag_token(lex, "surfboard") == HallucinationCategory::Existence);
  CHECK(tag_token(lex, "the") == HallucinationCategory::None);
  CHECK(tag_token(lex, "sits") == HallucinationCategory::Attribute);
  CHECK(tag_token(lex, "near") == HallucinationCategory::Relationship);
  lex.set("on", PosTag::Preposition);
  CHECK(tag_token(lex, "on") == HallucinationCategory::Relationship);
  CHECK(tag_token(lex, "unknown-word") == HallucinationCategory::None);
}

TEST_CASE("matching scorers") {
  const Scene s = demo_scene();
  const std::vector<std::string> gt{"a", "beach", "sits", "near", "the", "man"};
  const std::vector<std::string> bad{"a", "surfboard", "sits", "near", "the", "book"};
  const std::vector<std::string> none{"a", "sits"};
  CHECK(oracle_match_score(s.encode(gt), s) == 1.0);
  CHECK(oracle_match_score(s.encode(bad), s) == 0.0);
  CHECK(oracle_match_score(s.encode(none), s) == 0.5);
  const std::vector<std::string> mixed{"beach", "surfboard"};
  CHECK(oracle_match_score(s.encode(mixed), s, 3.0) == doctest::Approx(0.25));

  auto oracle = std::make_shared<OracleScorer>(s);
  const auto silent = noisy_match_score(oracle, 0.0, 4);
  const auto loud = noisy_match_score(oracle, 0.8, 4);
  const auto loud2 = noisy_match_score(oracle, 0.8, 4);
  for (const auto& words : {gt, bad, none, mixed}) {
    const auto ids = s.encode(words);
    CHECK(silent->score(ids) == oracle->score(ids));
    CHECK(loud->score(ids) == loud2->score(ids));
    CHECK(loud->score(ids) >= 0.0);
    CHECK(loud->score(ids) <= 1.0);
  }
  const RandomScorer r(9);
  CHECK(r.score(s.encode(gt)) == RandomScorer(9).score(s.encode(gt)));
  CHECK(ConstantScorer().score(s.encode(bad)) == 0.5);
}

TEST_CASE("scene invariants are enforced") {
  const ImageSpec img(100, 100);
  std::vector<SceneObject> orphan{{"kite", Fov{10, 10, 50, 50}, StableHigh{1}, false, {}}};
  CHECK_THROWS(Scene(img, object_pool(), orphan, {}, {}));
  std::vector<SceneObject> outside{{"kite", Fov{10, 10, 500, 50}, StableHigh{1}, true, {}}};
  CHECK_THROWS(Scene(img, object_pool(), outside, {}, {}));
  std::vector<SceneObject> ok{{"kite", Fov{10, 10, 50, 50}, StableHigh{1}, true, {}}};
  CHECK_THROWS(Scene(img, object_pool(), ok, {}, {"a", "giraffe"}));
  const Scene fine(img, {"kite"}, ok, {}, {"a", "kite"});
  CHECK(fine.find_token("<eos>").has_value());
  CHECK(fine.find_token("[IDK]").has_value());
  CHECK(fine.find_token("sits").has_value());
}

TEST_CASE("corpus generation") {
  CorpusSpec spec;
  const auto a = generate_corpus(42, spec);
  const auto b = generate_corpus(42, spec);
  REQUIRE(a.size() == 100);
  CHECK(corpus_to_json(a) == corpus_to_json(b));
  int traps = 0;
  for (const auto& s : a) traps += has_trap(s) ? 1 : 0;
  CHECK(traps == 50);

  spec.trap_fraction = 1.0;
  spec.count = 30;
  for (const auto& s : generate_corpus(1, spec)) {
    int victims = 0;
    for (const auto& o : s.objects()) victims += (!o.is_ground_truth && std::holds_alternative<ContextShift>(o.profile));
    CHECK(victims == 1);
    CHECK(has_trap(s));
    CHECK(is_correctable_trap(s));
  }

  spec.correctable_fraction = 0.5;
  int correctable = 0;
  for (const auto& s : generate_corpus(2, spec)) correctable += is_correctable_trap(s) ? 1 : 0;
  CHECK(correctable == 15);

  spec.trap_fraction = 2.0;
  CHECK_THROWS_AS(generate_corpus(1, spec), InvalidParameter);
}

TEST_CASE("scene JSON round trip") {
  const Scene s = demo_scene();
  const auto j = scene_to_json(s);
  const Scene back = scene_from_json(j);
  CHECK(scene_to_json(back) == j);
  CHECK(back.id() == "demo");
  const Fov f{1.23456789, 2, 3, 4};
  CHECK(fov_from_json(fov_to_json(f)) == f);
  CHECK(fov_to_json(f, true)["w"].get<double>() == doctest::Approx(1.234568));
  CHECK_THROWS(scene_from_json(nlohmann::json{{"image", 3}}));
}
