#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "halc/distributions.hpp"
#include "halc/fov.hpp"
#include "halc/rng.hpp"
#include "halc/sim_world.hpp"

namespace halc {

enum class SamplingMode { Exponential, Normal, Random, Center, Original };
enum class IdkPolicy { Off, Literal, Confidence };

std::string_view to_string(SamplingMode m);
std::string_view to_string(IdkPolicy p);
SamplingMode sampling_mode_from_string(std::string_view s);
IdkPolicy idk_policy_from_string(std::string_view s);

struct DecodeConfig {
  double lambda = 0.6;  // exponential growth factor
  int n = 4;            // FOV samples per corrected token
  int m = 6;            // contrast pairs kept
  int k = 1;            // beam size
  double alpha = 0.05;  // contrast amplification
  double beta = 0.1;    // plausibility threshold
  SamplingMode sampling_mode = SamplingMode::Exponential;
  double sigma = 10.0;  // only for SamplingMode::Normal
  IdkPolicy idk_policy = IdkPolicy::Off;
  double idk_threshold = 0.5;  // only for IdkPolicy::Confidence
  int max_tokens = 64;
  std::uint64_t seed = 0;

  /// Throws InvalidParameter on a violated invariant.
  void validate() const;
  int effective_pairs() const;
};

struct BeamState {
  std::vector<TokenId> tokens;
  double score = 0.5;
  bool terminated = false;
  /// Index of the candidate this beam was selected from.
  int source = -1;
};

/// Per (step, beam) record.
struct StepRecord {
  int step = 0;
  int beam = 0;
  TokenId base_token = -1;
  bool triggered = false;
  bool detector_hit = false;
  std::optional<Fov> detector_box;
  std::vector<Fov> fovs;
  std::vector<std::vector<double>> jsd;
  std::vector<std::pair<int, int>> pairs;
  std::vector<TokenId> candidates;
  /// Token kept for this beam after selection; -1 if the beam was pruned.
  TokenId chosen = -1;
  int model_calls = 0;
};

struct TraceTotals {
  long model_calls = 0;
  long detector_calls = 0;
  long triggered = 0;
};

struct DecodeTrace {
  std::string method;
  int n = 0;  // FOV samples per triggered token (0 for baselines)
  std::vector<StepRecord> steps;
  TraceTotals totals;
};

struct DecodeResult {
  std::vector<TokenId> tokens;
  DecodeTrace trace;
};

DecodeResult decode_greedy(const TokenModel& model, const DecodeConfig& config);

/// Log-probability beam search on the full image.
DecodeResult decode_beam(const TokenModel& model, int k, const DecodeConfig& config);

struct ContrastCandidate {
  TokenId token = -1;
  ProbDist dist;
  int expert = -1;
  int amateur = -1;
};

struct HalcStepResult {
  std::vector<ContrastCandidate> candidates;  // 2 per selected pair: positive, negative
  bool detector_called = false;
  bool detector_hit = false;
  std::optional<Fov> detector_box;
  FovSampleSet fovs;
  std::vector<std::vector<double>> jsd;
  std::vector<std::pair<int, int>> pairs;
  int model_calls = 0;
};

/// One focal-contrast correction for the token `base_token` proposed after `prefix`.
HalcStepResult halc_step(const TokenModel& model, const Detector& detector,
                         std::span<const TokenId> prefix, TokenId base_token, const DecodeConfig& config,
                         Rng& rng);

struct BeamCandidate {
  std::vector<TokenId> tokens;
  bool terminated = false;
  /// The extension equals the token the base decoding proposed.
  bool keeps_base = true;
};

/// Top-k distinct sequences by matching score. Ties prefer candidates that keep
/// the base token, then earlier candidates.
std::vector<BeamState> select_beams(std::span<const BeamCandidate> candidates, const MatchScorer& scorer,
                                    int k);

TokenId apply_idk_policy(TokenId original, TokenId corrected, bool detector_hit, IdkPolicy policy,
                         double threshold, double corrected_prob, TokenId idk);

DecodeResult decode_halc(const TokenModel& model, const Detector& detector, const MatchScorer& scorer,
                         const PosLexicon& lexicon, const DecodeConfig& config);

/// {method, n, steps: [...], totals: {model_calls, detector_calls, triggered}}.
nlohmann::json trace_to_json(const DecodeTrace& trace, const TokenModel& model);

}  // namespace halc
