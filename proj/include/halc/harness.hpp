#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "halc/cost.hpp"
#include "halc/decoder.hpp"
#include "halc/metrics.hpp"
#include "halc/sim_world.hpp"
#include "halc/theory.hpp"

namespace halc {

inline constexpr const char* kVersion = "0.1.0";

enum class ScorerKind { Oracle, Noisy, Random, Constant };
std::string_view to_string(ScorerKind k);
ScorerKind scorer_kind_from_string(std::string_view s);

struct DetectorConfig {
  FovOffset eta = default_detector_eta();
  double threshold = 0.25;
};

struct ScorerConfig {
  ScorerKind kind = ScorerKind::Oracle;
  double noise = 0.2;
  double penalty = 1.0;
};

struct PopeConfig {
  PopeMode mode = PopeMode::Popular;
  int count = 3;
  double beta = 0.2;
};

struct OracleGrid {
  int positions = 8;  // positions x positions cell centers
  int scales = 6;     // geometric from min_scale to 1
  double min_scale = 0.1;
};

struct TheoremRun {
  TheoremConfig config;
  std::vector<int> n_grid{1, 2, 4, 8, 16};
  /// "smooth" (closed-form profile) or "scene" (demo scene, pixel units).
  std::string deviation = "smooth";
  double deviation_scale = 1.0;
};

struct CurveConfig {
  std::vector<std::string> tokens{"clock", "surfboard", "beach", "man"};
  int r_min = -3;
  int r_max = 4;
};

struct RunConfig {
  std::string scenario;
  std::uint64_t seed = 0;
  int seeds = 1;  // corpus repetitions averaged by corpus scenarios
  DecodeConfig decode;
  int beam_width = 3;  // beam-search baseline
  CorpusSpec corpus;
  std::string corpus_path;  // replaces the generated corpus when set
  /// Scene for the decode scenario: "demo" or the index of a generated scene.
  std::string scene = "demo";
  DetectorConfig detector;
  ScorerConfig scorer;
  PopeConfig pope;
  TheoremRun theorem;
  OracleGrid oracle_grid;
  std::vector<int> length_grid{16, 32, 64};
  CostModel cost;
  CurveConfig curve;
};

bool is_known_scenario(std::string_view s);

/// Unknown keys, wrong types and violated invariants raise ConfigError. A run
/// manifest is accepted and its "config" member used.
RunConfig run_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const RunConfig& c);
RunConfig load_run_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------

struct OutputFile {
  std::string name;
  std::string content;
};

/// Fixed-point with six decimals; negative zero prints as zero.
std::string fmt6(double x);

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);
  CsvWriter& row(std::vector<std::string> cells);
  std::string str() const;

 private:
  std::string out_;
  std::size_t width_;
};

std::vector<std::vector<std::string>> parse_csv(const std::string& text);

// ---------------------------------------------------------------------------

struct MethodRun {
  std::vector<CaptionRecord> captions;
  std::vector<DecodeTrace> traces;
};

/// "greedy", "beam" or "halc" over every scene; scene i draws from seed stream i.
MethodRun run_method(std::string_view method, std::span<const Scene> corpus, const RunConfig& config,
                     std::uint64_t seed);

struct MethodMetrics {
  ChairReport chair;
  OpopeReport opope;
  double bleu = 0.0;
  long bleu_tokens = 0;
};

MethodMetrics evaluate(std::span<const CaptionRecord> captions, std::span<const Scene> corpus,
                       const PopeConfig& pope, std::uint64_t seed);

struct OracleStudyRow {
  std::string category;
  long hallucinations = 0;
  long eliminated = 0;
  double elimination = 0.0;
};

/// Grid search, per greedy hallucination, for a window whose argmax is a
/// ground-truth object. The last row aggregates all categories.
std::vector<OracleStudyRow> oracle_study(std::span<const Scene> corpus, const OracleGrid& grid,
                                         int max_tokens);

struct CurvePoint {
  int r = 0;
  std::string token;
  double logprob = 0.0;
};

/// Log-probability of each token at expand_fov(v_d, lambda, r) for r in the grid,
/// where v_d is the detector window of the scene's first trap victim (or of the
/// first token when the scene has none). The prefix is the first noun slot.
std::vector<CurvePoint> emit_profile_curve(const Scene& scene, std::span<const std::string> tokens,
                                           std::span<const int> r_grid, const RunConfig& config);

std::vector<Scene> scenario_corpus(const RunConfig& config, int repetition);

/// Runs the configured scenario and returns its files (manifest excluded).
std::vector<OutputFile> run_scenario(const RunConfig& config);

/// Writes outputs plus manifest.json into `dir`; IoError on failure.
void write_outputs(const std::filesystem::path& dir, const RunConfig& config,
                   const std::vector<OutputFile>& files);

}  // namespace halc
