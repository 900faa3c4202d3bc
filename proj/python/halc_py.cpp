#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "halc/cost.hpp"
#include "halc/distributions.hpp"
#include "halc/error.hpp"
#include "halc/fov.hpp"
#include "halc/harness.hpp"
#include "halc/metrics.hpp"
#include "halc/scene_io.hpp"
#include "halc/theory.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

// Structured values cross the boundary as JSON text; the Python package decodes them.

halc::RunConfig config_of(const std::string& text) {
  return halc::run_config_from_json(text.empty() ? json::object() : json::parse(text));
}

std::string generate_corpus(std::uint64_t seed, const std::string& config) {
  return halc::corpus_to_json(halc::generate_corpus(seed, config_of(config).corpus)).dump();
}

std::string decode(const std::string& scene_json, const std::string& method, const std::string& config,
                   std::uint64_t seed) {
  const std::vector<halc::Scene> one{halc::scene_from_json(json::parse(scene_json))};
  const halc::RunConfig c = config_of(config);
  const halc::MethodRun run = halc::run_method(method, one, c, seed);
  const halc::ToyModel model(one[0]);
  return json{{"tokens", run.captions[0].tokens},
              {"mentioned", run.captions[0].mentioned},
              {"trace", halc::trace_to_json(run.traces[0], model)}}
      .dump();
}

std::string evaluate(const std::vector<std::vector<std::string>>& captions, const std::string& corpus_json,
                     const std::string& config, std::uint64_t seed) {
  const auto corpus = halc::corpus_from_json(json::parse(corpus_json));
  if (captions.size() != corpus.size()) throw halc::InvalidInput("one caption per scene required");
  std::vector<halc::CaptionRecord> records;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    records.push_back(
        halc::make_caption(corpus[i].id(), captions[i], halc::PosLexicon::standard(corpus[i].vocabulary())));
  }
  const halc::MethodMetrics m = halc::evaluate(records, corpus, config_of(config).pope, seed);
  return json{{"chair", halc::to_json(m.chair)}, {"opope", halc::to_json(m.opope)}, {"bleu", m.bleu}}.dump();
}

std::tuple<double, double, double, double> expand(std::tuple<double, double, double, double> f, double lambda,
                                                  double r) {
  const auto [w, h, x, y] = f;
  const halc::Fov e = halc::expand_fov(halc::Fov{w, h, x, y}, lambda, r);
  return {e.width, e.height, e.center_x, e.center_y};
}

halc::Vec3 vec(std::tuple<double, double, double> t) { return {std::get<0>(t), std::get<1>(t), std::get<2>(t)}; }

std::map<std::string, std::string> run_scenario(const std::string& config) {
  std::map<std::string, std::string> out;
  for (auto& f : halc::run_scenario(config_of(config))) out[f.name] = std::move(f.content);
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Focal-contrast decoding over a synthetic captioning world";
  m.attr("__version__") = halc::kVersion;

  py::register_exception<halc::ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<halc::InvalidParameter>(m, "InvalidParameter", PyExc_ValueError);
  py::register_exception<halc::InvalidInput>(m, "InvalidInput", PyExc_ValueError);
  py::register_exception<halc::IoError>(m, "IoError", PyExc_OSError);

  m.def("demo_scene", [] { return halc::scene_to_json(halc::demo_scene()).dump(); });
  m.def("generate_corpus", &generate_corpus, py::arg("seed"), py::arg("config") = "");
  m.def("decode", &decode, py::arg("scene"), py::arg("method"), py::arg("config") = "", py::arg("seed") = 0);
  m.def("evaluate", &evaluate, py::arg("captions"), py::arg("corpus"), py::arg("config") = "",
        py::arg("seed") = 0);

  m.def("expand_fov", &expand, py::arg("fov"), py::arg("lam"), py::arg("r"));
  m.def("softmax", [](std::vector<double> l) { return halc::softmax(halc::Logits{std::move(l)}).probs; });
  m.def("jsd", [](std::vector<double> p, std::vector<double> q) {
    return halc::jsd(halc::ProbDist{std::move(p)}, halc::ProbDist{std::move(q)});
  });
  m.def("total_variation", [](std::vector<double> p, std::vector<double> q) {
    return halc::total_variation(halc::ProbDist{std::move(p)}, halc::ProbDist{std::move(q)});
  });
  m.def(
      "contrast_distribution",
      [](std::vector<double> expert, std::vector<double> amateur, double alpha, double beta) {
        return halc::contrast_distribution(halc::Logits{std::move(expert)}, halc::Logits{std::move(amateur)}, alpha,
                                           beta)
            .probs;
      },
      py::arg("expert"), py::arg("amateur"), py::arg("alpha"), py::arg("beta"));

  m.def("f_beta_score", &halc::f_beta_score, py::arg("precision"), py::arg("recall"), py::arg("beta") = 0.2);
  m.def(
      "corpus_bleu",
      [](const std::vector<std::vector<std::string>>& c, const std::vector<std::vector<std::string>>& r, int n) {
        return halc::corpus_bleu(c, r, n);
      },
      py::arg("candidates"), py::arg("references"), py::arg("max_n") = 4);

  m.def(
      "c_e_closed_form",
      [](double eps, std::tuple<double, double, double> v_star, std::tuple<double, double, double> v_d, double lambda,
         double r_min, double r_max) { return halc::c_e_closed_form(eps, vec(v_star), vec(v_d), lambda, r_min, r_max); },
      py::arg("epsilon"), py::arg("v_star"), py::arg("v_d"), py::arg("lam") = 0.6, py::arg("r_min") = -5.0,
      py::arg("r_max") = 5.0);
  m.def(
      "c_g_estimate",
      [](double eps, std::tuple<double, double, double> eta, double sigma, long trials, std::uint64_t seed) {
        halc::Rng rng(seed);
        const halc::McEstimate e = halc::c_g_estimate(eps, vec(eta), sigma, trials, rng);
        return std::make_pair(e.value, e.std_error);
      },
      py::arg("epsilon"), py::arg("eta"), py::arg("sigma"), py::arg("trials") = 100000, py::arg("seed") = 0);

  m.def(
      "cost_estimate",
      [](const std::string& config) {
        const halc::CostEstimate e = halc::cost_estimate(config_of(config).cost);
        return std::map<std::string, double>{{"greedy_seconds", e.greedy_seconds},
                                             {"sequential_seconds", e.sequential_seconds},
                                             {"sequential_ratio", e.sequential_ratio},
                                             {"parallel_seconds", e.parallel_seconds},
                                             {"parallel_ratio", e.parallel_ratio}};
      },
      py::arg("config") = "");

  m.def("normalize_config", [](const std::string& config) { return halc::to_json(config_of(config)).dump(); });
  m.def("run_scenario", &run_scenario, py::arg("config"));
  m.def(
      "write_outputs",
      [](const std::string& dir, const std::string& config) {
        const halc::RunConfig c = config_of(config);
        halc::write_outputs(dir, c, halc::run_scenario(c));
      },
      py::arg("out_dir"), py::arg("config"));
}
