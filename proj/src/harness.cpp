#include "halc/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <type_traits>
#include <unordered_map>

#include "halc/error.hpp"
#include "halc/scene_io.hpp"

namespace halc {

using nlohmann::json;

std::string_view to_string(ScorerKind k) {
  switch (k) {
    case ScorerKind::Oracle: return "oracle";
    case ScorerKind::Noisy: return "noisy";
    case ScorerKind::Random: return "random";
    case ScorerKind::Constant: return "constant";
  }
  return "oracle";
}

ScorerKind scorer_kind_from_string(std::string_view s) {
  if (s == "oracle") return ScorerKind::Oracle;
  if (s == "noisy") return ScorerKind::Noisy;
  if (s == "random") return ScorerKind::Random;
  if (s == "constant") return ScorerKind::Constant;
  throw InvalidParameter("unknown scorer '" + std::string(s) + "'");
}

bool is_known_scenario(std::string_view s) {
  static const std::vector<std::string_view> names = {"decode",       "compare",    "oracle-study", "theorem-verify",
                                                      "ablate",       "length-curve", "cost-model", "emit-curve"};
  return std::find(names.begin(), names.end(), s) != names.end();
}

// ---------------------------------------------------------------------------
// Config parsing

namespace {

class Section {
 public:
  Section(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError("'" + where_ + "' must be an object");
  }

  template <class T>
  void get(const std::string& key, T& out) {
    auto it = j_.find(key);
    if (it == j_.end()) return;
    used_.push_back(key);
    const json& v = *it;
    bool ok = false;
    if constexpr (std::is_same_v<T, bool>) {
      ok = v.is_boolean();
    } else if constexpr (std::is_integral_v<T> && std::is_unsigned_v<T>) {
      ok = v.is_number_unsigned() || (v.is_number_integer() && v.get<long long>() >= 0);
    } else if constexpr (std::is_integral_v<T>) {
      ok = v.is_number_integer();
    } else if constexpr (std::is_floating_point_v<T>) {
      ok = v.is_number();
    } else if constexpr (std::is_same_v<T, std::string>) {
      ok = v.is_string();
    } else {
      ok = true;
    }
    if (!ok) throw ConfigError("'" + path(key) + "' has the wrong type");
    try {
      out = v.get<T>();
    } catch (const json::exception&) {
      throw ConfigError("'" + path(key) + "' has the wrong type");
    }
  }

  template <class E, class Parse>
  void get_enum(const std::string& key, E& out, Parse parse) {
    std::string s;
    if (!j_.contains(key)) return;
    get(key, s);
    try {
      out = parse(s);
    } catch (const InvalidParameter& e) {
      throw ConfigError("'" + path(key) + "': " + e.what());
    }
  }

  const json* sub(const std::string& key) {
    auto it = j_.find(key);
    if (it == j_.end()) return nullptr;
    used_.push_back(key);
    return &*it;
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (std::find(used_.begin(), used_.end(), k) == used_.end()) throw ConfigError("unknown key '" + path(k) + "'");
    }
  }

 private:
  const json& j_;
  std::string where_;
  std::vector<std::string> used_;
};

Vec3 vec3_from(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3 || !std::all_of(j.begin(), j.end(), [](const json& x) { return x.is_number(); })) {
    throw ConfigError("'" + where + "' must be an array of three numbers");
  }
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::vector<int> int_list(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() ||
      !std::all_of(j.begin(), j.end(), [](const json& x) { return x.is_number_integer(); })) {
    throw ConfigError("'" + where + "' must be a non-empty array of integers");
  }
  return j.get<std::vector<int>>();
}

}  // namespace

RunConfig run_config_from_json(const json& input) {
  const json* root = &input;
  if (input.is_object() && input.contains("config") && input.contains("outputs")) root = &input["config"];

  RunConfig c;
  Section top(*root, "");
  top.get("scenario", c.scenario);
  top.get("seed", c.seed);
  top.get("seeds", c.seeds);
  top.get("beam_width", c.beam_width);
  top.get("scene", c.scene);

  if (const json* d = top.sub("decode")) {
    Section s(*d, "decode");
    s.get("lambda", c.decode.lambda);
    s.get("n", c.decode.n);
    s.get("m", c.decode.m);
    s.get("k", c.decode.k);
    s.get("alpha", c.decode.alpha);
    s.get("beta", c.decode.beta);
    s.get_enum("sampling_mode", c.decode.sampling_mode, sampling_mode_from_string);
    s.get("sigma", c.decode.sigma);
    s.get_enum("idk_policy", c.decode.idk_policy, idk_policy_from_string);
    s.get("idk_threshold", c.decode.idk_threshold);
    s.get("max_tokens", c.decode.max_tokens);
    s.finish();
  }
  if (const json* d = top.sub("corpus")) {
    Section s(*d, "corpus");
    s.get("path", c.corpus_path);
    s.get("count", c.corpus.count);
    s.get("trap_fraction", c.corpus.trap_fraction);
    s.get("correctable_fraction", c.corpus.correctable_fraction);
    s.get("min_objects", c.corpus.min_objects);
    s.get("max_objects", c.corpus.max_objects);
    s.get("image_width", c.corpus.image_width);
    s.get("image_height", c.corpus.image_height);
    s.get("lattice", c.corpus.lattice);
    s.get("victim_scale", c.corpus.victim_scale);
    s.finish();
  }
  if (const json* d = top.sub("detector")) {
    Section s(*d, "detector");
    if (const json* e = s.sub("eta")) {
      if (!e->is_array() || e->size() != 4 ||
          !std::all_of(e->begin(), e->end(), [](const json& x) { return x.is_number(); })) {
        throw ConfigError("'detector.eta' must be an array of four numbers");
      }
      c.detector.eta = {(*e)[0].get<double>(), (*e)[1].get<double>(), (*e)[2].get<double>(), (*e)[3].get<double>()};
    }
    s.get("threshold", c.detector.threshold);
    s.finish();
  }
  if (const json* d = top.sub("scorer")) {
    Section s(*d, "scorer");
    s.get_enum("kind", c.scorer.kind, scorer_kind_from_string);
    s.get("noise", c.scorer.noise);
    s.get("penalty", c.scorer.penalty);
    s.finish();
  }
  if (const json* d = top.sub("pope")) {
    Section s(*d, "pope");
    s.get_enum("mode", c.pope.mode, pope_mode_from_string);
    s.get("count", c.pope.count);
    s.get("beta", c.pope.beta);
    s.finish();
  }
  if (const json* d = top.sub("theorem")) {
    Section s(*d, "theorem");
    TheoremConfig& t = c.theorem.config;
    if (const json* v = s.sub("v_star")) t.v_star = vec3_from(*v, "theorem.v_star");
    if (const json* v = s.sub("eta")) t.eta = vec3_from(*v, "theorem.eta");
    s.get("epsilon", t.epsilon);
    s.get("delta", t.delta);
    s.get("sigma", t.sigma);
    s.get("lambda", t.lambda);
    s.get("r_min", t.r_min);
    s.get("r_max", t.r_max);
    s.get("trials", t.trials);
    s.get("c_trials", t.c_trials);
    s.get("probes", t.probes);
    s.get_enum("divergence", t.divergence, divergence_from_string);
    if (const json* v = s.sub("n_grid")) c.theorem.n_grid = int_list(*v, "theorem.n_grid");
    s.get("deviation", c.theorem.deviation);
    s.get("deviation_scale", c.theorem.deviation_scale);
    s.finish();
  }
  if (const json* d = top.sub("oracle_grid")) {
    Section s(*d, "oracle_grid");
    s.get("positions", c.oracle_grid.positions);
    s.get("scales", c.oracle_grid.scales);
    s.get("min_scale", c.oracle_grid.min_scale);
    s.finish();
  }
  if (const json* d = top.sub("length_grid")) c.length_grid = int_list(*d, "length_grid");
  if (const json* d = top.sub("cost")) {
    Section s(*d, "cost");
    s.get("tokens", c.cost.tokens);
    s.get("t_lvlm", c.cost.t_lvlm);
    s.get("t_detector", c.cost.t_detector);
    s.get("n", c.cost.n);
    s.get("trigger_rate", c.cost.trigger_rate);
    s.finish();
  }
  if (const json* d = top.sub("curve")) {
    Section s(*d, "curve");
    s.get("tokens", c.curve.tokens);
    s.get("r_min", c.curve.r_min);
    s.get("r_max", c.curve.r_max);
    s.finish();
  }
  top.finish();

  if (!c.scenario.empty() && !is_known_scenario(c.scenario)) {
    throw ConfigError("unknown scenario '" + c.scenario + "'");
  }
  try {
    c.decode.validate();
    c.cost.validate();
    c.theorem.config.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
  if (c.seeds < 1) throw ConfigError("'seeds' must be at least 1");
  if (c.beam_width < 1) throw ConfigError("'beam_width' must be at least 1");
  if (c.pope.count < 1 || !(c.pope.beta > 0.0)) throw ConfigError("'pope' needs count >= 1 and beta > 0");
  if (c.oracle_grid.positions < 1 || c.oracle_grid.scales < 1 || !(c.oracle_grid.min_scale > 0.0) ||
      c.oracle_grid.min_scale > 1.0) {
    throw ConfigError("'oracle_grid' needs positions, scales >= 1 and min_scale in (0, 1]");
  }
  if (std::any_of(c.length_grid.begin(), c.length_grid.end(), [](int v) { return v < 1; })) {
    throw ConfigError("'length_grid' entries must be positive");
  }
  if (std::any_of(c.theorem.n_grid.begin(), c.theorem.n_grid.end(), [](int v) { return v < 1; })) {
    throw ConfigError("'theorem.n_grid' entries must be positive");
  }
  if (c.theorem.deviation != "smooth" && c.theorem.deviation != "scene") {
    throw ConfigError("'theorem.deviation' must be 'smooth' or 'scene'");
  }
  if (!(c.theorem.deviation_scale > 0.0)) throw ConfigError("'theorem.deviation_scale' must be positive");
  if (c.curve.r_min > c.curve.r_max) throw ConfigError("'curve.r_min' exceeds 'curve.r_max'");
  if (c.curve.tokens.empty()) throw ConfigError("'curve.tokens' is empty");
  return c;
}

json to_json(const RunConfig& c) {
  const TheoremConfig& t = c.theorem.config;
  auto vec = [](const Vec3& v) { return json::array({v.w, v.h, v.p}); };
  json corpus = {{"count", c.corpus.count},
                 {"trap_fraction", c.corpus.trap_fraction},
                 {"correctable_fraction", c.corpus.correctable_fraction},
                 {"min_objects", c.corpus.min_objects},
                 {"max_objects", c.corpus.max_objects},
                 {"image_width", c.corpus.image_width},
                 {"image_height", c.corpus.image_height},
                 {"lattice", c.corpus.lattice},
                 {"victim_scale", c.corpus.victim_scale}};
  if (!c.corpus_path.empty()) corpus["path"] = c.corpus_path;
  return json{
      {"scenario", c.scenario},
      {"seed", c.seed},
      {"seeds", c.seeds},
      {"beam_width", c.beam_width},
      {"scene", c.scene},
      {"decode",
       {{"lambda", c.decode.lambda},
        {"n", c.decode.n},
        {"m", c.decode.m},
        {"k", c.decode.k},
        {"alpha", c.decode.alpha},
        {"beta", c.decode.beta},
        {"sampling_mode", to_string(c.decode.sampling_mode)},
        {"sigma", c.decode.sigma},
        {"idk_policy", to_string(c.decode.idk_policy)},
        {"idk_threshold", c.decode.idk_threshold},
        {"max_tokens", c.decode.max_tokens}}},
      {"corpus", corpus},
      {"detector",
       {{"eta", {c.detector.eta.dw, c.detector.eta.dh, c.detector.eta.dcx, c.detector.eta.dcy}},
        {"threshold", c.detector.threshold}}},
      {"scorer", {{"kind", to_string(c.scorer.kind)}, {"noise", c.scorer.noise}, {"penalty", c.scorer.penalty}}},
      {"pope", {{"mode", to_string(c.pope.mode)}, {"count", c.pope.count}, {"beta", c.pope.beta}}},
      {"theorem",
       {{"v_star", vec(t.v_star)},
        {"eta", vec(t.eta)},
        {"epsilon", t.epsilon},
        {"delta", t.delta},
        {"sigma", t.sigma},
        {"lambda", t.lambda},
        {"r_min", t.r_min},
        {"r_max", t.r_max},
        {"trials", t.trials},
        {"c_trials", t.c_trials},
        {"probes", t.probes},
        {"divergence", to_string(t.divergence)},
        {"n_grid", c.theorem.n_grid},
        {"deviation", c.theorem.deviation},
        {"deviation_scale", c.theorem.deviation_scale}}},
      {"oracle_grid",
       {{"positions", c.oracle_grid.positions},
        {"scales", c.oracle_grid.scales},
        {"min_scale", c.oracle_grid.min_scale}}},
      {"length_grid", c.length_grid},
      {"cost",
       {{"tokens", c.cost.tokens},
        {"t_lvlm", c.cost.t_lvlm},
        {"t_detector", c.cost.t_detector},
        {"n", c.cost.n},
        {"trigger_rate", c.cost.trigger_rate}}},
      {"curve", {{"tokens", c.curve.tokens}, {"r_min", c.curve.r_min}, {"r_max", c.curve.r_max}}}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path.string(), "cannot open config file");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return run_config_from_json(j);
}

// ---------------------------------------------------------------------------
// CSV

std::string fmt6(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (std::abs(x) < 5e-7) x = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", x);
  return buf;
}

namespace {

std::string csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

}  // namespace

CsvWriter::CsvWriter(std::vector<std::string> header) : width_(header.size()) { row(std::move(header)); }

CsvWriter& CsvWriter::row(std::vector<std::string> cells) {
  if (cells.size() != width_) throw InvalidInput("csv row width mismatch");
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i > 0) out_ += ',';
    out_ += csv_cell(cells[i]);
  }
  out_ += '\n';
  return *this;
}

std::string CsvWriter::str() const { return out_; }

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false;
  bool any = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    any = true;
    if (quoted) {
      if (ch == '"' && i + 1 < text.size() && text[i + 1] == '"') {
        cell += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      row.push_back(std::move(cell));
      cell.clear();
    } else if (ch == '\n') {
      row.push_back(std::move(cell));
      cell.clear();
      rows.push_back(std::move(row));
      row.clear();
      any = false;
    } else {
      cell += ch;
    }
  }
  if (any) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Runs

namespace {

std::unique_ptr<MatchScorer> make_scorer(const ScorerConfig& c, const Scene& scene, std::uint64_t seed) {
  switch (c.kind) {
    case ScorerKind::Oracle: return std::make_unique<OracleScorer>(scene, c.penalty);
    case ScorerKind::Noisy:
      return std::make_unique<NoisyScorer>(std::make_shared<OracleScorer>(scene, c.penalty), c.noise, seed);
    case ScorerKind::Random: return std::make_unique<RandomScorer>(seed);
    case ScorerKind::Constant: return std::make_unique<ConstantScorer>(0.5);
  }
  return std::make_unique<OracleScorer>(scene, c.penalty);
}

DecodeResult decode_scene(std::string_view method, const Scene& scene, const RunConfig& config,
                          std::uint64_t scene_seed, int max_tokens) {
  DecodeConfig dc = config.decode;
  dc.seed = scene_seed;
  dc.max_tokens = max_tokens;
  const ToyModel model(scene);
  if (method == "greedy") return decode_greedy(model, dc);
  if (method == "beam") return decode_beam(model, config.beam_width, dc);
  if (method == "halc") {
    const ToyDetector detector(scene, config.detector.eta, config.detector.threshold);
    const auto scorer = make_scorer(config.scorer, scene, derive_seed(scene_seed, 0x5C));
    return decode_halc(model, detector, *scorer, PosLexicon::standard(scene.vocabulary()), dc);
  }
  throw InvalidParameter("unknown method '" + std::string(method) + "'");
}

CaptionRecord caption_of(const Scene& scene, const DecodeResult& r, std::string_view method) {
  return make_caption(scene.id(), scene.decode(r.tokens), PosLexicon::standard(scene.vocabulary()),
                      std::string(method));
}

}  // namespace

MethodRun run_method(std::string_view method, std::span<const Scene> corpus, const RunConfig& config,
                     std::uint64_t seed) {
  MethodRun run;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    DecodeResult r = decode_scene(method, corpus[i], config, derive_seed(seed, i), config.decode.max_tokens);
    run.captions.push_back(caption_of(corpus[i], r, method));
    run.traces.push_back(std::move(r.trace));
  }
  return run;
}

MethodMetrics evaluate(std::span<const CaptionRecord> captions, std::span<const Scene> corpus,
                       const PopeConfig& pope, std::uint64_t seed) {
  if (captions.size() != corpus.size()) throw InvalidInput("evaluate: one caption per scene required");
  MethodMetrics m;
  m.chair = chair(captions, corpus);
  const CorpusStats stats = CorpusStats::from(corpus);
  std::vector<QuerySample> samples;
  std::vector<std::vector<std::string>> cands;
  std::vector<std::vector<std::string>> refs;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (captions[i].scene_id != corpus[i].id()) throw InvalidInput("evaluate: captions out of scene order");
    Rng rng(derive_seed(seed, 0x9000 + i));
    samples.push_back(sample_query_objects(corpus[i], stats, pope.mode, pope.count, rng));
    cands.push_back(captions[i].tokens);
    refs.push_back(corpus[i].reference());
    m.bleu_tokens += static_cast<long>(captions[i].tokens.size());
  }
  m.opope = opope(captions, corpus, samples, pope.beta);
  m.bleu = corpus_bleu(cands, refs);
  return m;
}

std::vector<OracleStudyRow> oracle_study(std::span<const Scene> corpus, const OracleGrid& grid, int max_tokens) {
  if (grid.positions < 1 || grid.scales < 1) throw InvalidParameter("oracle grid must be non-empty");
  const HallucinationCategory cats[] = {HallucinationCategory::Existence, HallucinationCategory::Attribute,
                                        HallucinationCategory::Relationship};
  std::map<HallucinationCategory, std::pair<long, long>> counts;
  DecodeConfig dc;
  dc.max_tokens = max_tokens;
  for (const Scene& scene : corpus) {
    const ToyModel model(scene);
    const PosLexicon lex = PosLexicon::standard(scene.vocabulary());
    const ImageSpec& img = scene.image();
    std::vector<Fov> windows;
    for (int si = 0; si < grid.scales; ++si) {
      const double s =
          grid.scales == 1 ? 1.0 : std::pow(grid.min_scale, 1.0 - static_cast<double>(si) / (grid.scales - 1));
      for (int a = 0; a < grid.positions; ++a) {
        for (int b = 0; b < grid.positions; ++b) {
          const Fov f{s * img.width, s * img.height, (a + 0.5) * img.width / grid.positions,
                      (b + 0.5) * img.height / grid.positions};
          windows.push_back(clamp_to_image(f, img));
        }
      }
    }
    const std::vector<TokenId> tokens = decode_greedy(model, dc).tokens;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      const TokenId tok = tokens[t];
      if (!scene.is_object_token(tok) || scene.is_ground_truth(scene.token_name(tok))) continue;
      const HallucinationCategory cat = tag_token(lex, scene.token_name(tok));
      if (cat == HallucinationCategory::None) continue;
      const std::span<const TokenId> prefix(tokens.data(), t);
      bool fixed = false;
      for (const Fov& w : windows) {
        const TokenId g = argmax_token(model.logits(w, prefix));
        if (scene.is_object_token(g) && scene.is_ground_truth(scene.token_name(g))) {
          fixed = true;
          break;
        }
      }
      ++counts[cat].first;
      counts[cat].second += fixed ? 1 : 0;
    }
  }
  std::vector<OracleStudyRow> rows;
  long total = 0;
  long eliminated = 0;
  for (auto cat : cats) {
    const auto [h, e] = counts[cat];
    rows.push_back({std::string(to_string(cat)), h, e, h == 0 ? 0.0 : static_cast<double>(e) / h});
    total += h;
    eliminated += e;
  }
  rows.push_back({"all", total, eliminated, total == 0 ? 0.0 : static_cast<double>(eliminated) / total});
  return rows;
}

namespace {

const SceneObject* curve_anchor(const Scene& scene, std::span<const std::string> tokens) {
  for (const auto& o : scene.objects()) {
    if (o.is_ground_truth && std::holds_alternative<Peaking>(o.profile)) return &o;
  }
  for (const auto& t : tokens) {
    if (const SceneObject* o = scene.find_object(t)) return o;
  }
  return nullptr;
}

}  // namespace

std::vector<CurvePoint> emit_profile_curve(const Scene& scene, std::span<const std::string> tokens,
                                           std::span<const int> r_grid, const RunConfig& config) {
  std::vector<TokenId> ids;
  for (const auto& t : tokens) ids.push_back(scene.token_id(t));
  const SceneObject* anchor = curve_anchor(scene, tokens);
  if (anchor == nullptr) throw InvalidInput("scene has no object to center the curve on");
  Rng rng(derive_seed(config.seed, 0xC0DE));
  const std::optional<Fov> detected =
      toy_detector(anchor->name, scene, config.detector.eta, config.detector.threshold, rng);
  const Fov v_d = detected.value_or(anchor->region);
  const std::vector<TokenId> prefix{scene.token_id(Grammar::word_at(0))};
  const ToyModel model(scene);
  std::vector<CurvePoint> out;
  for (int r : r_grid) {
    const Fov f = clamp_to_image(expand_fov(v_d, config.decode.lambda, r), scene.image());
    const Logits l = model.logits(f, prefix);
    for (std::size_t i = 0; i < ids.size(); ++i) out.push_back({r, std::string(tokens[i]), log_prob(l, ids[i])});
  }
  return out;
}

std::vector<Scene> scenario_corpus(const RunConfig& config, int repetition) {
  if (!config.corpus_path.empty()) {
    std::vector<Scene> scenes = load_corpus(config.corpus_path);
    std::stable_sort(scenes.begin(), scenes.end(), [](const Scene& a, const Scene& b) { return a.id() < b.id(); });
    return scenes;
  }
  return generate_corpus(config.seed + static_cast<std::uint64_t>(repetition), config.corpus);
}

// ---------------------------------------------------------------------------
// Scenarios

namespace {

std::uint64_t rep_seed(const RunConfig& c, int rep) { return derive_seed(c.seed, 0x100 + static_cast<std::uint64_t>(rep)); }

Scene selected_scene(const RunConfig& c) {
  if (c.scene == "demo") return demo_scene();
  std::size_t idx = 0;
  try {
    std::size_t used = 0;
    idx = std::stoul(c.scene, &used);
    if (used != c.scene.size()) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw ConfigError("'scene' must be \"demo\" or a corpus index");
  }
  std::vector<Scene> corpus = scenario_corpus(c, 0);
  if (idx >= corpus.size()) throw ConfigError("'scene' index out of range");
  return corpus[idx];
}

struct Averaged {
  std::map<std::string, std::pair<double, long>> cells;  // metric -> (sum of values, summed count)
  std::vector<std::string> order;

  void add(const std::string& metric, double value, long count) {
    if (!cells.contains(metric)) order.push_back(metric);
    cells[metric].first += value;
    cells[metric].second += count;
  }
};

void add_metrics(Averaged& a, const MethodMetrics& m, const MethodRun& run) {
  a.add("chair_s", m.chair.chair_s, m.chair.captions);
  a.add("chair_i", m.chair.chair_i, m.chair.mentions);
  const long queries = m.opope.tp + m.opope.fp + m.opope.tn + m.opope.fn;
  a.add("opope_accuracy", m.opope.accuracy, queries);
  a.add("opope_precision", m.opope.precision, queries);
  a.add("opope_recall", m.opope.recall, queries);
  a.add("opope_f_beta", m.opope.f_beta, queries);
  a.add("bleu", m.bleu, m.bleu_tokens);
  long calls = 0;
  for (const auto& t : run.traces) calls += t.totals.model_calls;
  a.add("model_calls_per_caption", run.captions.empty() ? 0.0 : static_cast<double>(calls) / run.captions.size(),
        calls);
}

std::vector<OutputFile> scenario_decode(const RunConfig& c) {
  const Scene scene = selected_scene(c);
  const ToyModel model(scene);
  std::vector<OutputFile> files;
  CsvWriter captions({"method", "caption", "model_calls"});
  for (const char* method : {"greedy", "beam", "halc"}) {
    const DecodeResult r = decode_scene(method, scene, c, derive_seed(c.seed, 0), c.decode.max_tokens);
    captions.row({method, join(scene.decode(r.tokens)), std::to_string(r.trace.totals.model_calls)});
    files.push_back({std::string("trace_") + method + ".json", trace_to_json(r.trace, model).dump(2) + "\n"});
  }
  files.insert(files.begin(), OutputFile{"captions.csv", captions.str()});
  return files;
}

std::vector<OutputFile> scenario_compare(const RunConfig& c) {
  const std::vector<std::string> methods = {"greedy", "beam", "halc"};
  std::map<std::string, Averaged> agg;
  CsvWriter captions({"repetition", "scene_id", "method", "caption"});
  for (int rep = 0; rep < c.seeds; ++rep) {
    const std::vector<Scene> corpus = scenario_corpus(c, rep);
    const std::uint64_t seed = rep_seed(c, rep);
    std::vector<MethodRun> runs;
    for (const auto& method : methods) {
      runs.push_back(run_method(method, corpus, c, seed));
      add_metrics(agg[method], evaluate(runs.back().captions, corpus, c.pope, seed), runs.back());
    }
    for (std::size_t i = 0; i < corpus.size(); ++i) {
      for (std::size_t m = 0; m < methods.size(); ++m) {
        captions.row({std::to_string(rep), corpus[i].id(), methods[m], join(runs[m].captions[i].tokens)});
      }
    }
  }
  CsvWriter metrics({"method", "metric", "value", "count"});
  for (const auto& method : methods) {
    const Averaged& a = agg[method];
    for (const auto& name : a.order) {
      const auto& [sum, count] = a.cells.at(name);
      metrics.row({method, name, fmt6(sum / c.seeds), std::to_string(count)});
    }
  }
  return {{"metrics.csv", metrics.str()}, {"captions.csv", captions.str()}};
}

std::vector<OutputFile> scenario_oracle(const RunConfig& c) {
  std::map<std::string, std::pair<long, long>> totals;
  std::vector<std::string> order;
  CsvWriter scenes({"repetition", "scene_id", "designed_correctable", "hallucinations", "eliminated"});
  for (int rep = 0; rep < c.seeds; ++rep) {
    const std::vector<Scene> corpus = scenario_corpus(c, rep);
    for (const auto& row : oracle_study(corpus, c.oracle_grid, c.decode.max_tokens)) {
      if (!totals.contains(row.category)) order.push_back(row.category);
      totals[row.category].first += row.hallucinations;
      totals[row.category].second += row.eliminated;
    }
    for (const Scene& s : corpus) {
      const auto one = oracle_study(std::span<const Scene>(&s, 1), c.oracle_grid, c.decode.max_tokens).back();
      scenes.row({std::to_string(rep), s.id(), is_correctable_trap(s) ? "1" : "0", std::to_string(one.hallucinations),
                  std::to_string(one.eliminated)});
    }
  }
  CsvWriter out({"category", "hallucinations", "eliminated", "elimination"});
  for (const auto& cat : order) {
    const auto [h, e] = totals[cat];
    out.row({cat, std::to_string(h), std::to_string(e), fmt6(h == 0 ? 0.0 : static_cast<double>(e) / h)});
  }
  return {{"oracle_study.csv", out.str()}, {"oracle_scenes.csv", scenes.str()}};
}

std::vector<OutputFile> scenario_length(const RunConfig& c) {
  CsvWriter out({"method", "max_tokens", "objects", "chair_i", "chair_s"});
  for (const char* method : {"greedy", "halc"}) {
    std::vector<LengthRow> sum(c.length_grid.size());
    for (int rep = 0; rep < c.seeds; ++rep) {
      const std::vector<Scene> corpus = scenario_corpus(c, rep);
      const std::uint64_t seed = rep_seed(c, rep);
      std::unordered_map<std::string, std::size_t> index;
      for (std::size_t i = 0; i < corpus.size(); ++i) index.emplace(corpus[i].id(), i);
      const CaptionFn fn = [&](const Scene& s, int max_tokens) {
        const DecodeResult r = decode_scene(method, s, c, derive_seed(seed, index.at(s.id())), max_tokens);
        return s.decode(r.tokens);
      };
      const auto rows = hallucination_vs_length(corpus, fn, c.length_grid);
      for (std::size_t g = 0; g < rows.size(); ++g) {
        sum[g].max_tokens = rows[g].max_tokens;
        sum[g].objects += rows[g].objects;
        sum[g].chair_i += rows[g].chair_i;
        sum[g].chair_s += rows[g].chair_s;
      }
    }
    for (const auto& r : sum) {
      out.row({method, std::to_string(r.max_tokens), std::to_string(r.objects), fmt6(r.chair_i / c.seeds),
               fmt6(r.chair_s / c.seeds)});
    }
  }
  return {{"length_curve.csv", out.str()}};
}

std::vector<OutputFile> scenario_ablate(const RunConfig& c) {
  std::vector<std::vector<Scene>> corpora;
  for (int rep = 0; rep < c.seeds; ++rep) corpora.push_back(scenario_corpus(c, rep));

  auto sweep = [&](const std::string& column, const std::vector<std::pair<std::string, RunConfig>>& variants) {
    CsvWriter out({column, "chair_s", "chair_i", "opope_f_beta", "bleu"});
    for (const auto& [label, cfg] : variants) {
      double s = 0.0, i = 0.0, f = 0.0, b = 0.0;
      for (int rep = 0; rep < c.seeds; ++rep) {
        const std::uint64_t seed = rep_seed(c, rep);
        const MethodRun run = run_method("halc", corpora[rep], cfg, seed);
        const MethodMetrics m = evaluate(run.captions, corpora[rep], cfg.pope, seed);
        s += m.chair.chair_s;
        i += m.chair.chair_i;
        f += m.opope.f_beta;
        b += m.bleu;
      }
      const double k = c.seeds;
      out.row({label, fmt6(s / k), fmt6(i / k), fmt6(f / k), fmt6(b / k)});
    }
    return out.str();
  };

  std::vector<std::pair<std::string, RunConfig>> sampling;
  for (auto [label, mode] : {std::pair{"random", SamplingMode::Random}, std::pair{"center", SamplingMode::Center},
                             std::pair{"original", SamplingMode::Original},
                             std::pair{"detector", SamplingMode::Exponential}}) {
    RunConfig v = c;
    v.decode.sampling_mode = mode;
    sampling.emplace_back(label, v);
  }
  std::vector<std::pair<std::string, RunConfig>> lambdas;
  for (double l : {0.2, 0.4, 0.6, 0.8, 1.0}) {
    RunConfig v = c;
    v.decode.lambda = l;
    lambdas.emplace_back(fmt6(l), v);
  }
  std::vector<std::pair<std::string, RunConfig>> beams;
  for (int k : {1, 2, 3, 5, 8}) {
    RunConfig v = c;
    v.decode.k = k;
    beams.emplace_back(std::to_string(k), v);
  }
  std::vector<std::pair<std::string, RunConfig>> scorers;
  for (auto kind : {ScorerKind::Random, ScorerKind::Oracle, ScorerKind::Noisy}) {
    RunConfig v = c;
    v.scorer.kind = kind;
    scorers.emplace_back(std::string(to_string(kind)), v);
  }
  return {{"ablate_sampling.csv", sweep("sampling", sampling)},
          {"ablate_lambda.csv", sweep("lambda", lambdas)},
          {"ablate_beam.csv", sweep("k", beams)},
          {"ablate_scorer.csv", sweep("scorer", scorers)}};
}

std::vector<OutputFile> scenario_theorem(const RunConfig& c) {
  TheoremConfig base = c.theorem.config;
  base.seed = c.seed;
  std::optional<Scene> scene;
  DeviationFn g;
  if (c.theorem.deviation == "scene") {
    scene = demo_scene();
    const SceneObject* victim = curve_anchor(*scene, {});
    base.v_star = {victim->region.width, victim->region.height, 0.0};
    g = scene_deviation(*scene, victim->region, 1.0, 0.0, base.divergence);
  } else {
    g = smooth_deviation(base.v_star, c.theorem.deviation_scale);
  }
  CsvWriter out({"sampler", "n", "trials", "epsilon", "sigma", "lambda", "analytic_c", "analytic_c_se", "delta",
                 "bound", "empirical_not_a", "analytic_not_a", "combined_se", "mean_min_deviation",
                 "violation_fraction", "mean_slack"});
  for (FovSampler sampler : {FovSampler::Normal, FovSampler::Exponential}) {
    for (int n : c.theorem.n_grid) {
      TheoremConfig t = base;
      t.n = n;
      BoundReport r;
      try {
        r = min_deviation_mc(g, t, sampler);
      } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("theorem: ") + e.what());
      }
      out.row({std::string(to_string(sampler)), std::to_string(n), std::to_string(r.trials), fmt6(t.epsilon),
               fmt6(t.sigma), fmt6(t.lambda), fmt6(r.analytic_c), fmt6(r.analytic_c_se), fmt6(r.delta),
               fmt6(r.bound), fmt6(r.empirical_not_a), fmt6(r.analytic_not_a), fmt6(r.combined_se),
               fmt6(r.mean_min_deviation), fmt6(r.violation_fraction), fmt6(r.mean_slack)});
    }
  }
  return {{"theorem.csv", out.str()}};
}

std::vector<OutputFile> scenario_cost(const RunConfig& c) {
  const CostEstimate e = cost_estimate(c.cost);
  CsvWriter cost({"variant", "seconds", "ratio"});
  cost.row({"greedy", fmt6(e.greedy_seconds), fmt6(1.0)});
  cost.row({"sequential", fmt6(e.sequential_seconds), fmt6(e.sequential_ratio)});
  cost.row({"parallel", fmt6(e.parallel_seconds), fmt6(e.parallel_ratio)});

  CostModel accounting = c.cost;
  accounting.n = c.decode.n;
  const Scene scene = selected_scene(c);
  CsvWriter acc({"method", "steps", "triggered", "n", "model_calls", "expected_calls", "consistent"});
  for (const char* method : {"greedy", "beam", "halc"}) {
    const DecodeResult r = decode_scene(method, scene, c, derive_seed(c.seed, 0), c.decode.max_tokens);
    const long expected = static_cast<long>(r.trace.steps.size()) + r.trace.totals.triggered * accounting.n;
    acc.row({method, std::to_string(r.trace.steps.size()), std::to_string(r.trace.totals.triggered),
             std::to_string(r.trace.n), std::to_string(r.trace.totals.model_calls), std::to_string(expected),
             verify_cost_accounting(r.trace, accounting) ? "true" : "false"});
  }
  return {{"cost.csv", cost.str()}, {"accounting.csv", acc.str()}};
}

std::vector<OutputFile> scenario_curve(const RunConfig& c) {
  const Scene scene = selected_scene(c);
  for (const auto& t : c.curve.tokens) {
    if (!scene.find_token(t)) throw ConfigError("curve token '" + t + "' is not in the scene vocabulary");
  }
  std::vector<int> grid;
  for (int r = c.curve.r_min; r <= c.curve.r_max; ++r) grid.push_back(r);
  CsvWriter out({"r", "token", "logprob"});
  for (const auto& p : emit_profile_curve(scene, c.curve.tokens, grid, c)) {
    out.row({std::to_string(p.r), p.token, fmt6(p.logprob)});
  }
  return {{"profile_curve.csv", out.str()}};
}

std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

std::vector<OutputFile> run_scenario(const RunConfig& c) {
  try {
    if (c.scenario == "decode") return scenario_decode(c);
    if (c.scenario == "compare") return scenario_compare(c);
    if (c.scenario == "oracle-study") return scenario_oracle(c);
    if (c.scenario == "length-curve") return scenario_length(c);
    if (c.scenario == "ablate") return scenario_ablate(c);
    if (c.scenario == "theorem-verify") return scenario_theorem(c);
    if (c.scenario == "cost-model") return scenario_cost(c);
    if (c.scenario == "emit-curve") return scenario_curve(c);
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
  throw ConfigError("unknown scenario '" + c.scenario + "'");
}

void write_outputs(const std::filesystem::path& dir, const RunConfig& config, const std::vector<OutputFile>& files) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError(dir.string(), ec.message());
  json outputs = json::array();
  auto write = [&](const std::string& name, const std::string& content) {
    const auto path = dir / name;
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError(path.string(), "cannot open for writing");
    f << content;
    f.close();
    if (!f) throw IoError(path.string(), "write failed");
  };
  for (const auto& file : files) {
    write(file.name, file.content);
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a64(file.content)));
    outputs.push_back({{"file", file.name}, {"bytes", file.content.size()}, {"fnv1a64", hex}});
  }
  const json manifest = {{"tool", "halc"},
                         {"version", kVersion},
                         {"scenario", config.scenario},
                         {"seed", config.seed},
                         {"config", to_json(config)},
                         {"outputs", outputs}};
  write("manifest.json", manifest.dump(2) + "\n");
}

}  // namespace halc
