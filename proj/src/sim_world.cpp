#include "halc/sim_world.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "halc/error.hpp"

namespace halc {

std::string_view to_string(PosTag tag) {
  switch (tag) {
    case PosTag::Noun: return "noun";
    case PosTag::Adjective: return "adjective";
    case PosTag::Adverb: return "adverb";
    case PosTag::Number: return "number";
    case PosTag::Verb: return "verb";
    case PosTag::Pronoun: return "pronoun";
    case PosTag::Preposition: return "preposition";
    case PosTag::Other: return "other";
  }
  return "other";
}

std::string_view to_string(HallucinationCategory c) {
  switch (c) {
    case HallucinationCategory::Existence: return "existence";
    case HallucinationCategory::Attribute: return "attribute";
    case HallucinationCategory::Relationship: return "relationship";
    case HallucinationCategory::None: return "none";
  }
  return "none";
}

PosTag PosLexicon::tag(std::string_view word) const {
  auto it = tags_.find(std::string(word));
  return it == tags_.end() ? PosTag::Other : it->second;
}

bool Grammar::is_function_word(std::string_view w) {
  return std::any_of(std::begin(kWords), std::end(kWords),
                     [&](std::string_view g) { return !g.empty() && g == w; });
}

PosLexicon PosLexicon::standard(std::span<const std::string> vocabulary) {
  PosLexicon lex;
  lex.set("a", PosTag::Other);
  lex.set("the", PosTag::Other);
  lex.set(".", PosTag::Other);
  lex.set("sits", PosTag::Verb);
  lex.set("near", PosTag::Preposition);
  lex.set(std::string(kEosToken), PosTag::Other);
  lex.set(std::string(kIdkToken), PosTag::Other);
  for (const auto& w : vocabulary) {
    if (lex.tags_.find(w) == lex.tags_.end()) lex.set(w, PosTag::Noun);
  }
  return lex;
}

HallucinationCategory tag_token(const PosLexicon& lexicon, std::string_view word) {
  switch (lexicon.tag(word)) {
    case PosTag::Noun: return HallucinationCategory::Existence;
    case PosTag::Adjective:
    case PosTag::Adverb:
    case PosTag::Number:
    case PosTag::Verb:
    case PosTag::Pronoun: return HallucinationCategory::Attribute;
    case PosTag::Preposition: return HallucinationCategory::Relationship;
    case PosTag::Other: return HallucinationCategory::None;
  }
  return HallucinationCategory::None;
}

// ---------------------------------------------------------------------------

double hash_noise(std::uint64_t seed, const Fov& fov) {
  std::uint64_t h = splitmix64(seed);
  for (double v : {fov.width, fov.height, fov.center_x, fov.center_y}) {
    h = splitmix64(h ^ static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(v))));
  }
  return hash_to_signed_unit(h);
}

namespace {

struct ProfileEval {
  const Fov& fov;
  const ImageSpec& image;

  double operator()(const StableHigh& p) const { return p.level; }
  double operator()(const Peaking& p) const {
    const double d = fov_distance(fov, p.v_star);
    return p.base + p.amp * std::exp(-d * d / (2.0 * p.width * p.width));
  }
  double operator()(const ContextShift& p) const {
    return p.base + p.slope * std::log(fov.area() / image.area());
  }
  double operator()(const Noisy& p) const { return p.base + p.amp * hash_noise(p.noise_seed, fov); }
};

struct ProfileCheck {
  void operator()(const StableHigh&) const {}
  void operator()(const Peaking& p) const {
    if (!(p.width > 0.0)) throw InvalidInput("peaking profile needs a positive width");
    if (p.amp < 0.0) throw InvalidInput("profile amplitude must be non-negative");
  }
  void operator()(const ContextShift&) const {}
  void operator()(const Noisy& p) const {
    if (p.amp < 0.0) throw InvalidInput("profile amplitude must be non-negative");
  }
};

std::uint64_t pair_key(TokenId a, TokenId b) {
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

}  // namespace

double profile_value(const TokenProfile& profile, const Fov& fov, const ImageSpec& image) {
  return std::visit(ProfileEval{fov, image}, profile);
}

Scene::Scene(ImageSpec image, std::vector<std::string> vocabulary, std::vector<SceneObject> objects,
             std::vector<CooccurrenceEntry> cooccurrence, std::vector<std::string> reference,
             std::string id)
    : id_(std::move(id)),
      image_(image),
      vocabulary_(std::move(vocabulary)),
      objects_(std::move(objects)),
      cooccurrence_(std::move(cooccurrence)),
      reference_(std::move(reference)) {
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    if (!index_.emplace(vocabulary_[i], static_cast<TokenId>(i)).second) {
      throw InvalidInput("duplicate vocabulary entry '" + vocabulary_[i] + "'");
    }
  }
  auto ensure = [&](std::string_view w) {
    std::string s(w);
    if (index_.find(s) == index_.end()) {
      index_.emplace(s, static_cast<TokenId>(vocabulary_.size()));
      vocabulary_.push_back(std::move(s));
    }
  };
  for (std::string_view w : Grammar::kWords) {
    if (!w.empty()) ensure(w);
  }
  ensure(kEosToken);
  ensure(kIdkToken);
  eos_ = index_.at(std::string(kEosToken));
  idk_ = index_.at(std::string(kIdkToken));

  const std::size_t v = vocabulary_.size();
  object_index_.assign(v, -1);
  anchor_.assign(v, -1);
  is_object_.assign(v, false);
  for (std::size_t i = 0; i < v; ++i) {
    const auto& w = vocabulary_[i];
    is_object_[i] = !Grammar::is_function_word(w) && w != kEosToken && w != kIdkToken;
  }

  for (std::size_t k = 0; k < objects_.size(); ++k) {
    const auto& obj = objects_[k];
    auto it = index_.find(obj.name);
    if (it == index_.end()) throw InvalidInput("object '" + obj.name + "' missing from vocabulary");
    if (!is_object_[static_cast<std::size_t>(it->second)]) {
      throw InvalidInput("object '" + obj.name + "' collides with a grammar word");
    }
    if (object_index_[static_cast<std::size_t>(it->second)] != -1) {
      throw InvalidInput("object '" + obj.name + "' listed twice");
    }
    std::visit(ProfileCheck{}, obj.profile);
    if (!obj.region.valid()) throw InvalidInput("object '" + obj.name + "' has an empty region");
    if (obj.is_ground_truth) {
      if (!obj.region.inside(image_, 1e-6)) {
        throw InvalidInput("ground-truth object '" + obj.name + "' lies outside the image");
      }
    } else if (!obj.anchor) {
      throw InvalidInput("non-existent object '" + obj.name + "' must name an anchor");
    }
    object_index_[static_cast<std::size_t>(it->second)] = static_cast<int>(k);
  }
  for (const auto& obj : objects_) {
    if (!obj.anchor) continue;
    auto a = index_.find(*obj.anchor);
    if (a == index_.end()) throw InvalidInput("anchor '" + *obj.anchor + "' missing from vocabulary");
    anchor_[static_cast<std::size_t>(index_.at(obj.name))] = a->second;
  }
  for (const auto& c : cooccurrence_) {
    cooc_[pair_key(token_id(c.prev), token_id(c.token))] += c.bonus;
  }
  for (const auto& w : reference_) {
    auto it = index_.find(w);
    if (it == index_.end()) throw InvalidInput("reference word '" + w + "' missing from vocabulary");
    if (is_object_[static_cast<std::size_t>(it->second)] && !is_ground_truth(w)) {
      throw InvalidInput("reference caption names non-existent object '" + w + "'");
    }
  }
}

TokenId Scene::token_id(std::string_view name) const {
  auto t = find_token(name);
  if (!t) throw InvalidInput("unknown token '" + std::string(name) + "'");
  return *t;
}

std::optional<TokenId> Scene::find_token(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Scene::token_name(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= vocabulary_.size()) {
    throw InvalidInput("token id " + std::to_string(id) + " out of range");
  }
  return vocabulary_[static_cast<std::size_t>(id)];
}

const SceneObject* Scene::object_for(TokenId id) const {
  const int k = object_index_.at(static_cast<std::size_t>(id));
  return k < 0 ? nullptr : &objects_[static_cast<std::size_t>(k)];
}

const SceneObject* Scene::find_object(std::string_view name) const {
  auto t = find_token(name);
  return t ? object_for(*t) : nullptr;
}

bool Scene::is_ground_truth(std::string_view name) const {
  const SceneObject* o = find_object(name);
  return o != nullptr && o->is_ground_truth;
}

std::vector<std::string> Scene::ground_truth_names() const {
  std::vector<std::string> out;
  for (const auto& o : objects_) {
    if (o.is_ground_truth) out.push_back(o.name);
  }
  return out;
}

double Scene::cooccurrence_bonus(TokenId prev, TokenId token) const {
  auto it = cooc_.find(pair_key(prev, token));
  return it == cooc_.end() ? 0.0 : it->second;
}

std::vector<TokenId> Scene::encode(std::span<const std::string> words) const {
  std::vector<TokenId> out;
  out.reserve(words.size());
  for (const auto& w : words) out.push_back(token_id(w));
  return out;
}

std::vector<std::string> Scene::decode(std::span<const TokenId> ids) const {
  std::vector<std::string> out;
  out.reserve(ids.size());
  for (TokenId t : ids) out.push_back(token_name(t));
  return out;
}

// ---------------------------------------------------------------------------

Logits toy_model_logits(const Scene& scene, const Fov& fov, std::span<const TokenId> prefix,
                        const ToyModelParams& params) {
  const std::size_t v = scene.vocab_size();
  if (!fov.valid() || !fov.inside(scene.image(), 1e-6)) {
    throw InvalidInput("toy model queried with a window outside the image");
  }
  std::vector<bool> mentioned(v, false);
  for (TokenId t : prefix) {
    if (t < 0 || static_cast<std::size_t>(t) >= v) {
      throw InvalidInput("prefix token id " + std::to_string(t) + " not in vocabulary");
    }
    mentioned[static_cast<std::size_t>(t)] = true;
  }
  const TokenId last = prefix.empty() ? -1 : prefix.back();
  auto bonus = [&](TokenId t) { return last < 0 ? 0.0 : scene.cooccurrence_bonus(last, t); };

  Logits out;
  out.values.assign(v, params.suppressed_logit);
  const std::size_t pos = prefix.size();
  if (!Grammar::is_noun_slot(pos)) {
    const TokenId w = scene.token_id(Grammar::word_at(pos));
    out.values[static_cast<std::size_t>(w)] = bonus(w);
    return out;
  }
  out.values[static_cast<std::size_t>(scene.eos())] = params.eos_logit + bonus(scene.eos());
  for (std::size_t i = 0; i < v; ++i) {
    const auto t = static_cast<TokenId>(i);
    if (!scene.is_object_token(t) || mentioned[i]) continue;
    // A non-existent object is a misreading of its anchor; once the anchor has
    // been named the misreading is explained away.
    const TokenId anchor = scene.anchor_of(t);
    if (anchor >= 0 && mentioned[static_cast<std::size_t>(anchor)]) continue;
    const SceneObject* obj = scene.object_for(t);
    const double value = obj ? profile_value(obj->profile, fov, scene.image()) : params.absent_logit;
    out.values[i] = value + bonus(t);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::optional<Fov> toy_detector(std::string_view token, const Scene& scene, const FovOffset& eta,
                                double confidence_threshold, Rng& rng) {
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  const SceneObject* obj = scene.find_object(token);
  if (obj == nullptr) return std::nullopt;
  const SceneObject* target = obj;
  double confidence = kGroundTruthConfidence;
  if (!obj->is_ground_truth) {
    target = obj->anchor ? scene.find_object(*obj->anchor) : nullptr;
    if (target == nullptr) return std::nullopt;
    confidence = kAnchoredConfidence;
  }
  confidence += jitter(rng);
  if (confidence < confidence_threshold) return std::nullopt;
  Fov box{std::max(1.0, target->region.width + eta.dw), std::max(1.0, target->region.height + eta.dh),
          target->region.center_x + eta.dcx, target->region.center_y + eta.dcy};
  return clamp_to_image(box, scene.image());
}

// ---------------------------------------------------------------------------

double oracle_match_score(std::span<const TokenId> tokens, const Scene& scene, double penalty) {
  int gt = 0;
  int hallucinated = 0;
  for (TokenId t : tokens) {
    if (t < 0 || static_cast<std::size_t>(t) >= scene.vocab_size() || !scene.is_object_token(t)) {
      continue;
    }
    const SceneObject* o = scene.object_for(t);
    if (o != nullptr && o->is_ground_truth) {
      ++gt;
    } else {
      ++hallucinated;
    }
  }
  if (gt + hallucinated == 0) return 0.5;
  const double denom = gt + penalty * hallucinated;
  return denom > 0.0 ? gt / denom : 0.0;
}

std::uint64_t hash_sequence(std::uint64_t seed, std::span<const TokenId> tokens) {
  std::uint64_t h = splitmix64(seed ^ 0x5851F42D4C957F2DULL);
  for (TokenId t : tokens) h = splitmix64(h ^ static_cast<std::uint64_t>(t));
  return splitmix64(h ^ tokens.size());
}

NoisyScorer::NoisyScorer(std::shared_ptr<const MatchScorer> base, double noise_amp, std::uint64_t seed)
    : base_(std::move(base)), amp_(noise_amp), seed_(seed) {
  if (!(noise_amp >= 0.0)) throw InvalidParameter("noise amplitude must be non-negative");
  if (!base_) throw InvalidInput("noisy scorer needs a base scorer");
}

double NoisyScorer::score(std::span<const TokenId> tokens) const {
  const double base = base_->score(tokens);
  if (amp_ == 0.0) return base;
  return std::clamp(base + amp_ * hash_to_signed_unit(hash_sequence(seed_, tokens)), 0.0, 1.0);
}

std::shared_ptr<MatchScorer> noisy_match_score(std::shared_ptr<const MatchScorer> base,
                                               double noise_amp, std::uint64_t seed) {
  return std::make_shared<NoisyScorer>(std::move(base), noise_amp, seed);
}

double RandomScorer::score(std::span<const TokenId> tokens) const {
  return hash_to_unit(hash_sequence(seed_, tokens));
}

}  // namespace halc
