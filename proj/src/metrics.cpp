#include "halc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "halc/error.hpp"

namespace halc {

namespace {

double ratio(long num, long den) { return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den); }

const Scene& scene_for(const std::string& id, std::span<const Scene> scenes,
                       const std::unordered_map<std::string, std::size_t>& index) {
  auto it = index.find(id);
  if (it == index.end()) throw InvalidInput("no scene with id '" + id + "'");
  return scenes[it->second];
}

std::unordered_map<std::string, std::size_t> index_scenes(std::span<const Scene> scenes) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < scenes.size(); ++i) index.emplace(scenes[i].id(), i);
  return index;
}

}  // namespace

CaptionRecord make_caption(std::string scene_id, std::vector<std::string> tokens, const PosLexicon& lexicon,
                           std::string method) {
  CaptionRecord rec{std::move(scene_id), std::move(tokens), {}, std::move(method)};
  for (const auto& t : rec.tokens) {
    if (lexicon.tag(t) != PosTag::Noun) continue;
    if (std::find(rec.mentioned.begin(), rec.mentioned.end(), t) == rec.mentioned.end()) {
      rec.mentioned.push_back(t);
    }
  }
  return rec;
}

std::set<std::string> hallucinated_objects(const CaptionRecord& caption, const Scene& scene) {
  std::set<std::string> out;
  for (const auto& o : caption.mentioned) {
    if (!scene.is_ground_truth(o)) out.insert(o);
  }
  return out;
}

ChairReport ChairReport::from_counts(long captions, long hallucinated_captions, long mentions,
                                     long hallucinated_mentions) {
  ChairReport r;
  r.captions = captions;
  r.hallucinated_captions = hallucinated_captions;
  r.mentions = mentions;
  r.hallucinated_mentions = hallucinated_mentions;
  r.chair_s = ratio(hallucinated_captions, captions);
  r.chair_i = ratio(hallucinated_mentions, mentions);
  return r;
}

ChairReport ChairReport::merged(const ChairReport& other) const {
  return from_counts(captions + other.captions, hallucinated_captions + other.hallucinated_captions,
                     mentions + other.mentions, hallucinated_mentions + other.hallucinated_mentions);
}

ChairReport chair(std::span<const CaptionRecord> captions, std::span<const Scene> scenes) {
  const auto index = index_scenes(scenes);
  long hall_caps = 0;
  long mentions = 0;
  long hall_mentions = 0;
  for (const auto& c : captions) {
    const Scene& s = scene_for(c.scene_id, scenes, index);
    const auto h = hallucinated_objects(c, s);
    mentions += static_cast<long>(c.mentioned.size());
    hall_mentions += static_cast<long>(h.size());
    hall_caps += h.empty() ? 0 : 1;
  }
  return ChairReport::from_counts(static_cast<long>(captions.size()), hall_caps, mentions, hall_mentions);
}

// ---------------------------------------------------------------------------

CorpusStats CorpusStats::from(std::span<const Scene> scenes) {
  CorpusStats st;
  std::set<std::string> objects;
  for (const auto& s : scenes) {
    for (std::size_t t = 0; t < s.vocab_size(); ++t) {
      if (s.is_object_token(static_cast<TokenId>(t))) objects.insert(s.vocabulary()[t]);
    }
    const auto gt = s.ground_truth_names();
    for (const auto& g : gt) ++st.frequency[g];
    for (std::size_t i = 0; i < gt.size(); ++i) {
      for (std::size_t j = 0; j < gt.size(); ++j) {
        if (i != j) ++st.cooccurrence[{gt[i], gt[j]}];
      }
    }
  }
  st.objects.assign(objects.begin(), objects.end());
  return st;
}

int CorpusStats::freq(const std::string& o) const {
  auto it = frequency.find(o);
  return it == frequency.end() ? 0 : it->second;
}

int CorpusStats::cooc(const std::string& a, const std::string& b) const {
  auto it = cooccurrence.find({a, b});
  return it == cooccurrence.end() ? 0 : it->second;
}

std::string_view to_string(PopeMode m) {
  switch (m) {
    case PopeMode::Random: return "random";
    case PopeMode::Popular: return "popular";
    case PopeMode::Adversarial: return "adversarial";
  }
  return "random";
}

PopeMode pope_mode_from_string(std::string_view s) {
  if (s == "random") return PopeMode::Random;
  if (s == "popular") return PopeMode::Popular;
  if (s == "adversarial") return PopeMode::Adversarial;
  throw InvalidParameter("unknown POPE mode '" + std::string(s) + "'");
}

QuerySample sample_query_objects(const Scene& scene, const CorpusStats& stats, PopeMode mode, int count,
                                 Rng& rng) {
  if (count < 1) throw InvalidParameter("query count must be at least 1");
  std::vector<std::string> gt = scene.ground_truth_names();
  std::sort(gt.begin(), gt.end());
  std::vector<std::string> absent;
  for (const auto& o : stats.objects) {
    if (!std::binary_search(gt.begin(), gt.end(), o)) absent.push_back(o);
  }
  if (absent.size() < static_cast<std::size_t>(count)) {
    throw InvalidInput("object vocabulary too small for " + std::to_string(count) + " negatives");
  }

  QuerySample out;
  std::shuffle(gt.begin(), gt.end(), rng);
  out.positives.assign(gt.begin(), gt.begin() + std::min<std::ptrdiff_t>(count, std::ssize(gt)));

  switch (mode) {
    case PopeMode::Random:
      std::shuffle(absent.begin(), absent.end(), rng);
      break;
    case PopeMode::Popular:
      std::stable_sort(absent.begin(), absent.end(), [&](const std::string& a, const std::string& b) {
        return stats.freq(a) > stats.freq(b);
      });
      break;
    case PopeMode::Adversarial: {
      std::map<std::string, int> score;
      for (const auto& a : absent) {
        int s = 0;
        for (const auto& g : gt) s += stats.cooc(a, g);
        score[a] = s;
      }
      std::stable_sort(absent.begin(), absent.end(), [&](const std::string& a, const std::string& b) {
        if (score[a] != score[b]) return score[a] > score[b];
        return stats.freq(a) > stats.freq(b);
      });
      break;
    }
  }
  out.negatives.assign(absent.begin(), absent.begin() + count);
  return out;
}

double f_beta_score(double precision, double recall, double beta) {
  const double b2 = beta * beta;
  const double den = b2 * precision + recall;
  return den == 0.0 ? 0.0 : (1.0 + b2) * precision * recall / den;
}

OpopeReport opope(std::span<const CaptionRecord> captions, std::span<const Scene> scenes,
                  std::span<const QuerySample> samples, double beta) {
  if (samples.size() != captions.size()) throw InvalidInput("opope: one query sample per caption required");
  const auto index = index_scenes(scenes);
  OpopeReport r;
  r.beta = beta;
  for (std::size_t i = 0; i < captions.size(); ++i) {
    scene_for(captions[i].scene_id, scenes, index);
    const auto& toks = captions[i].tokens;
    auto said = [&](const std::string& o) { return std::find(toks.begin(), toks.end(), o) != toks.end(); };
    for (const auto& p : samples[i].positives) (said(p) ? r.tp : r.fn) += 1;
    for (const auto& n : samples[i].negatives) (said(n) ? r.fp : r.tn) += 1;
  }
  r.accuracy = ratio(r.tp + r.tn, r.tp + r.tn + r.fp + r.fn);
  r.precision = ratio(r.tp, r.tp + r.fp);
  r.recall = ratio(r.tp, r.tp + r.fn);
  r.f_beta = f_beta_score(r.precision, r.recall, beta);
  return r;
}

// ---------------------------------------------------------------------------

namespace {

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts count_ngrams(const std::vector<std::string>& s, int n) {
  NgramCounts out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= s.size(); ++i) {
    ++out[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                   s.begin() + static_cast<std::ptrdiff_t>(i) + n)];
  }
  return out;
}

}  // namespace

double corpus_bleu(std::span<const std::vector<std::string>> candidates,
                   std::span<const std::vector<std::string>> references, int max_n) {
  if (candidates.empty()) throw InvalidInput("corpus_bleu: empty corpus");
  if (candidates.size() != references.size()) throw InvalidInput("corpus_bleu: misaligned corpus");
  if (max_n < 1) throw InvalidParameter("corpus_bleu: max_n must be at least 1");
  double log_sum = 0.0;
  int orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    long matches = 0;
    long total = 0;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      const auto cand = count_ngrams(candidates[i], n);
      const auto ref = count_ngrams(references[i], n);
      for (const auto& [g, c] : cand) {
        total += c;
        auto it = ref.find(g);
        if (it != ref.end()) matches += std::min(c, it->second);
      }
    }
    if (total == 0) continue;
    const double p = matches == 0 ? 1e-9 : static_cast<double>(matches) / static_cast<double>(total);
    log_sum += std::log(p);
    ++orders;
  }
  if (orders == 0) return 0.0;
  long c = 0;
  long r = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    c += static_cast<long>(candidates[i].size());
    r += static_cast<long>(references[i].size());
  }
  const double bp = c >= r ? 1.0 : std::exp(1.0 - static_cast<double>(r) / static_cast<double>(c));
  return std::clamp(bp * std::exp(log_sum / orders), 0.0, 1.0);
}

std::vector<LengthRow> hallucination_vs_length(std::span<const Scene> corpus, const CaptionFn& decoder,
                                               std::span<const int> max_token_grid) {
  if (max_token_grid.empty()) throw InvalidParameter("max token grid is empty");
  std::vector<LengthRow> rows;
  for (int max_tokens : max_token_grid) {
    std::vector<CaptionRecord> caps;
    for (const auto& s : corpus) {
      caps.push_back(make_caption(s.id(), decoder(s, max_tokens), PosLexicon::standard(s.vocabulary())));
    }
    const ChairReport r = chair(caps, corpus);
    rows.push_back(LengthRow{max_tokens, r.mentions, r.chair_i, r.chair_s});
  }
  return rows;
}

nlohmann::json to_json(const ChairReport& r) {
  return {{"chair_s", r.chair_s},
          {"chair_i", r.chair_i},
          {"captions", r.captions},
          {"hallucinated_captions", r.hallucinated_captions},
          {"mentions", r.mentions},
          {"hallucinated_mentions", r.hallucinated_mentions}};
}

nlohmann::json to_json(const OpopeReport& r) {
  return {{"accuracy", r.accuracy}, {"precision", r.precision}, {"recall", r.recall},
          {"f_beta", r.f_beta},     {"beta", r.beta},           {"tp", r.tp},
          {"fp", r.fp},             {"tn", r.tn},               {"fn", r.fn}};
}

}  // namespace halc
