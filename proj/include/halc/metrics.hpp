#pragma once

#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "halc/rng.hpp"
#include "halc/sim_world.hpp"

namespace halc {

struct CaptionRecord {
  std::string scene_id;
  std::vector<std::string> tokens;
  /// Distinct noun tokens, in first-mention order.
  std::vector<std::string> mentioned;
  std::string method;
};

CaptionRecord make_caption(std::string scene_id, std::vector<std::string> tokens, const PosLexicon& lexicon,
                           std::string method = {});

std::set<std::string> hallucinated_objects(const CaptionRecord& caption, const Scene& scene);

struct ChairReport {
  double chair_s = 0.0;
  double chair_i = 0.0;
  long captions = 0;
  long hallucinated_captions = 0;
  long mentions = 0;
  long hallucinated_mentions = 0;

  /// Count-weighted combination, as if the two corpora had been scored together.
  ChairReport merged(const ChairReport& other) const;
  static ChairReport from_counts(long captions, long hallucinated_captions, long mentions,
                                 long hallucinated_mentions);
};

/// Captions are matched to scenes by id.
ChairReport chair(std::span<const CaptionRecord> captions, std::span<const Scene> scenes);

/// Ground-truth frequency and pairwise co-occurrence over a corpus.
struct CorpusStats {
  std::vector<std::string> objects;  // every object noun seen in a vocabulary, sorted
  std::map<std::string, int> frequency;
  std::map<std::pair<std::string, std::string>, int> cooccurrence;

  static CorpusStats from(std::span<const Scene> scenes);
  int freq(const std::string& o) const;
  int cooc(const std::string& a, const std::string& b) const;
};

enum class PopeMode { Random, Popular, Adversarial };
std::string_view to_string(PopeMode m);
PopeMode pope_mode_from_string(std::string_view s);

struct QuerySample {
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
};

QuerySample sample_query_objects(const Scene& scene, const CorpusStats& stats, PopeMode mode, int count,
                                 Rng& rng);

struct OpopeReport {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f_beta = 0.0;
  double beta = 0.2;
  long tp = 0;
  long fp = 0;
  long tn = 0;
  long fn = 0;
};

double f_beta_score(double precision, double recall, double beta);

/// `samples[i]` holds the probe objects for `captions[i]`.
OpopeReport opope(std::span<const CaptionRecord> captions, std::span<const Scene> scenes,
                  std::span<const QuerySample> samples, double beta = 0.2);

/// Clipped n-gram precision BLEU with brevity penalty. Orders for which the
/// candidates hold no n-grams at all are left out of the geometric mean; a
/// zero precision is replaced by 1e-9.
double corpus_bleu(std::span<const std::vector<std::string>> candidates,
                   std::span<const std::vector<std::string>> references, int max_n = 4);

struct LengthRow {
  int max_tokens = 0;
  long objects = 0;
  double chair_i = 0.0;
  double chair_s = 0.0;
};

using CaptionFn = std::function<std::vector<std::string>(const Scene&, int max_tokens)>;

std::vector<LengthRow> hallucination_vs_length(std::span<const Scene> corpus, const CaptionFn& decoder,
                                               std::span<const int> max_token_grid);

nlohmann::json to_json(const ChairReport& r);
nlohmann::json to_json(const OpopeReport& r);

}  // namespace halc
