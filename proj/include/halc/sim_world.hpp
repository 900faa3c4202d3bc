#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "halc/distributions.hpp"
#include "halc/fov.hpp"
#include "halc/rng.hpp"

namespace halc {

// ---------------------------------------------------------------------------
// Part-of-speech lexicon

enum class PosTag { Noun, Adjective, Adverb, Number, Verb, Pronoun, Preposition, Other };

enum class HallucinationCategory { Existence, Attribute, Relationship, None };

std::string_view to_string(PosTag tag);
std::string_view to_string(HallucinationCategory c);

class PosLexicon {
 public:
  void set(const std::string& word, PosTag tag) { tags_[word] = tag; }
  /// Unknown words are Other.
  PosTag tag(std::string_view word) const;
  std::size_t size() const { return tags_.size(); }

  /// Function-word table of the caption grammar; every other vocabulary entry is a noun.
  static PosLexicon standard(std::span<const std::string> vocabulary);

 private:
  std::unordered_map<std::string, PosTag> tags_;
};

HallucinationCategory tag_token(const PosLexicon& lexicon, std::string_view word);

// ---------------------------------------------------------------------------
// Scenes

inline constexpr std::string_view kEosToken = "<eos>";
inline constexpr std::string_view kIdkToken = "[IDK]";

/// Caption skeleton: "a <noun> sits near the <noun> ." repeated.
struct Grammar {
  static constexpr int kClauseLength = 7;
  static constexpr std::string_view kWords[kClauseLength] = {"a", "", "sits", "near", "the", "", "."};

  static bool is_noun_slot(std::size_t position) { return kWords[position % kClauseLength].empty(); }
  static std::string_view word_at(std::size_t position) { return kWords[position % kClauseLength]; }
  static bool is_function_word(std::string_view w);
};

struct StableHigh {
  double level = 0.0;
};
struct Peaking {
  Fov v_star;
  double width = 1.0;
  double amp = 0.0;
  double base = 0.0;
};
struct ContextShift {
  double slope = 0.0;
  double base = 0.0;
};
struct Noisy {
  double amp = 0.0;
  std::uint64_t noise_seed = 0;
  double base = 0.0;
};

/// How an object token's logit responds to the visual context.
using TokenProfile = std::variant<StableHigh, Peaking, ContextShift, Noisy>;

double profile_value(const TokenProfile& profile, const Fov& fov, const ImageSpec& image);

/// Stable 64-bit mix of a seed and the FOV quantized to whole pixels, mapped to [-1, 1].
double hash_noise(std::uint64_t seed, const Fov& fov);

struct SceneObject {
  std::string name;
  Fov region;
  TokenProfile profile;
  bool is_ground_truth = true;
  /// Object whose region the detector returns for a non-existent token.
  std::optional<std::string> anchor;
};

struct CooccurrenceEntry {
  std::string prev;
  std::string token;
  double bonus = 0.0;
};

class Scene {
 public:
  /// Validates invariants. Grammar words, the end token and [IDK] are appended
  /// to the vocabulary when missing.
  Scene(ImageSpec image, std::vector<std::string> vocabulary, std::vector<SceneObject> objects,
        std::vector<CooccurrenceEntry> cooccurrence, std::vector<std::string> reference,
        std::string id = {});

  const std::string& id() const { return id_; }
  const ImageSpec& image() const { return image_; }
  const std::vector<std::string>& vocabulary() const { return vocabulary_; }
  const std::vector<SceneObject>& objects() const { return objects_; }
  const std::vector<CooccurrenceEntry>& cooccurrence() const { return cooccurrence_; }
  const std::vector<std::string>& reference() const { return reference_; }

  std::size_t vocab_size() const { return vocabulary_.size(); }
  TokenId token_id(std::string_view name) const;
  std::optional<TokenId> find_token(std::string_view name) const;
  const std::string& token_name(TokenId id) const;
  TokenId eos() const { return eos_; }
  TokenId idk() const { return idk_; }

  /// Object entry for a token, if the scene describes it.
  const SceneObject* object_for(TokenId id) const;
  const SceneObject* find_object(std::string_view name) const;
  bool is_object_token(TokenId id) const { return is_object_[static_cast<std::size_t>(id)]; }
  bool is_ground_truth(std::string_view name) const;
  std::vector<std::string> ground_truth_names() const;

  /// Anchor token id for non-existent objects, -1 otherwise.
  TokenId anchor_of(TokenId id) const { return anchor_[static_cast<std::size_t>(id)]; }
  double cooccurrence_bonus(TokenId prev, TokenId token) const;

  std::vector<TokenId> encode(std::span<const std::string> words) const;
  std::vector<std::string> decode(std::span<const TokenId> ids) const;

 private:
  std::string id_;
  ImageSpec image_;
  std::vector<std::string> vocabulary_;
  std::vector<SceneObject> objects_;
  std::vector<CooccurrenceEntry> cooccurrence_;
  std::vector<std::string> reference_;

  std::unordered_map<std::string, TokenId> index_;
  std::vector<int> object_index_;
  std::vector<bool> is_object_;
  std::vector<TokenId> anchor_;
  std::unordered_map<std::uint64_t, double> cooc_;
  TokenId eos_ = -1;
  TokenId idk_ = -1;
};

// ---------------------------------------------------------------------------
// Token model

struct ToyModelParams {
  /// End-token logit at noun slots: objects below it are never mentioned.
  double eos_logit = 1.0;
  /// Profile value for vocabulary nouns the scene does not describe.
  double absent_logit = -2.0;
  /// Logit of grammatically disallowed or already-mentioned tokens.
  double suppressed_logit = -50.0;
};

/// Conditional next-token model p(. | fov, prefix) over a fixed vocabulary.
class TokenModel {
 public:
  virtual ~TokenModel() = default;
  virtual Logits logits(const Fov& fov, std::span<const TokenId> prefix) const = 0;
  virtual const ImageSpec& image() const = 0;
  virtual std::size_t vocab_size() const = 0;
  virtual TokenId eos() const = 0;
  virtual TokenId idk() const = 0;
  virtual const std::string& token_name(TokenId id) const = 0;
};

Logits toy_model_logits(const Scene& scene, const Fov& fov, std::span<const TokenId> prefix,
                        const ToyModelParams& params = {});

class ToyModel final : public TokenModel {
 public:
  explicit ToyModel(const Scene& scene, ToyModelParams params = {}) : scene_(&scene), params_(params) {}

  Logits logits(const Fov& fov, std::span<const TokenId> prefix) const override {
    return toy_model_logits(*scene_, fov, prefix, params_);
  }
  const ImageSpec& image() const override { return scene_->image(); }
  std::size_t vocab_size() const override { return scene_->vocab_size(); }
  TokenId eos() const override { return scene_->eos(); }
  TokenId idk() const override { return scene_->idk(); }
  const std::string& token_name(TokenId id) const override { return scene_->token_name(id); }
  const Scene& scene() const { return *scene_; }

 private:
  const Scene* scene_;
  ToyModelParams params_;
};

// ---------------------------------------------------------------------------
// Detector

/// Additive perturbation in FOV space.
struct FovOffset {
  double dw = 0.0;
  double dh = 0.0;
  double dcx = 0.0;
  double dcy = 0.0;
};

inline constexpr double kGroundTruthConfidence = 0.9;
inline constexpr double kAnchoredConfidence = 0.35;

std::optional<Fov> toy_detector(std::string_view token, const Scene& scene, const FovOffset& eta,
                                double confidence_threshold, Rng& rng);

class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::optional<Fov> locate(TokenId token, Rng& rng) const = 0;
};

class ToyDetector final : public Detector {
 public:
  ToyDetector(const Scene& scene, FovOffset eta = {}, double confidence_threshold = 0.25)
      : scene_(&scene), eta_(eta), threshold_(confidence_threshold) {}

  std::optional<Fov> locate(TokenId token, Rng& rng) const override {
    return toy_detector(scene_->token_name(token), *scene_, eta_, threshold_, rng);
  }

 private:
  const Scene* scene_;
  FovOffset eta_;
  double threshold_;
};

// ---------------------------------------------------------------------------
// Matching scorers

/// Sequence-to-image agreement in [0, 1]; higher is better.
class MatchScorer {
 public:
  virtual ~MatchScorer() = default;
  virtual double score(std::span<const TokenId> tokens) const = 0;
};

/// gt / (gt + penalty * hallucinated) over object tokens; 0.5 when none are named.
double oracle_match_score(std::span<const TokenId> tokens, const Scene& scene, double penalty = 1.0);

class OracleScorer final : public MatchScorer {
 public:
  explicit OracleScorer(const Scene& scene, double penalty = 1.0) : scene_(&scene), penalty_(penalty) {}
  double score(std::span<const TokenId> tokens) const override {
    return oracle_match_score(tokens, *scene_, penalty_);
  }

 private:
  const Scene* scene_;
  double penalty_;
};

/// Oracle score plus a bounded perturbation keyed on (seed, sequence), clipped to [0, 1].
class NoisyScorer final : public MatchScorer {
 public:
  NoisyScorer(std::shared_ptr<const MatchScorer> base, double noise_amp, std::uint64_t seed);
  double score(std::span<const TokenId> tokens) const override;

 private:
  std::shared_ptr<const MatchScorer> base_;
  double amp_;
  std::uint64_t seed_;
};

std::shared_ptr<MatchScorer> noisy_match_score(std::shared_ptr<const MatchScorer> base,
                                               double noise_amp, std::uint64_t seed);

class ConstantScorer final : public MatchScorer {
 public:
  explicit ConstantScorer(double value = 0.5) : value_(value) {}
  double score(std::span<const TokenId>) const override { return value_; }

 private:
  double value_;
};

/// Uniform score keyed on (seed, sequence): a scorer with no visual information.
class RandomScorer final : public MatchScorer {
 public:
  explicit RandomScorer(std::uint64_t seed) : seed_(seed) {}
  double score(std::span<const TokenId> tokens) const override;

 private:
  std::uint64_t seed_;
};

std::uint64_t hash_sequence(std::uint64_t seed, std::span<const TokenId> tokens);

// ---------------------------------------------------------------------------
// Corpora

struct CorpusSpec {
  int count = 100;
  /// Fraction of scenes holding one victim/trap pair.
  double trap_fraction = 0.5;
  /// Fraction of trap scenes whose victim has a correcting window.
  double correctable_fraction = 1.0;
  /// Ground-truth objects with stable profiles (victim excluded).
  int min_objects = 5;
  int max_objects = 8;
  double image_width = 640.0;
  double image_height = 480.0;
  /// Victim windows sit on the centers of a lattice x lattice partition at
  /// victim_scale of the image extent.
  int lattice = 8;
  double victim_scale = 0.1;
};

/// Object nouns shared by every generated scene.
const std::vector<std::string>& object_pool();

std::vector<Scene> generate_corpus(std::uint64_t seed, const CorpusSpec& spec);

/// Trap scenes whose victim can be recovered by some window.
bool is_correctable_trap(const Scene& scene);
bool has_trap(const Scene& scene);

/// The beach/man/surfboard/clock fixture.
Scene demo_scene();

/// Detector perturbation that shrinks a victim window by one (1 + 0.6) step.
FovOffset default_detector_eta();

}  // namespace halc
