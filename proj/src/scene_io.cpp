#include "halc/scene_io.hpp"

#include <cmath>
#include <fstream>

#include "halc/error.hpp"

namespace halc {

using nlohmann::json;

double round6(double x) {
  const double r = std::round(x * 1e6) / 1e6;
  return r == 0.0 ? 0.0 : r;  // no "-0.0" in output
}

json fov_to_json(const Fov& f, bool rounded) {
  auto v = [&](double x) { return rounded ? round6(x) : x; };
  return json{{"w", v(f.width)}, {"h", v(f.height)}, {"cx", v(f.center_x)}, {"cy", v(f.center_y)}};
}

Fov fov_from_json(const json& j) {
  return Fov{j.at("w").get<double>(), j.at("h").get<double>(), j.at("cx").get<double>(),
             j.at("cy").get<double>()};
}

namespace {

struct ProfileToJson {
  json operator()(const StableHigh& p) const { return {{"kind", "stable_high"}, {"level", p.level}}; }
  json operator()(const Peaking& p) const {
    return {{"kind", "peaking"}, {"v_star", fov_to_json(p.v_star)}, {"width", p.width},
            {"amp", p.amp}, {"base", p.base}};
  }
  json operator()(const ContextShift& p) const {
    return {{"kind", "context_shift"}, {"slope", p.slope}, {"base", p.base}};
  }
  json operator()(const Noisy& p) const {
    return {{"kind", "noisy"}, {"amp", p.amp}, {"noise_seed", p.noise_seed}, {"base", p.base}};
  }
};

TokenProfile profile_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "stable_high") return StableHigh{j.at("level").get<double>()};
  if (kind == "peaking") {
    return Peaking{fov_from_json(j.at("v_star")), j.at("width").get<double>(), j.at("amp").get<double>(),
                   j.at("base").get<double>()};
  }
  if (kind == "context_shift") return ContextShift{j.at("slope").get<double>(), j.at("base").get<double>()};
  if (kind == "noisy") {
    return Noisy{j.at("amp").get<double>(), j.at("noise_seed").get<std::uint64_t>(), j.at("base").get<double>()};
  }
  throw InvalidInput("unknown profile kind '" + kind + "'");
}

}  // namespace

json scene_to_json(const Scene& scene) {
  json objects = json::array();
  for (const auto& o : scene.objects()) {
    json jo{{"name", o.name},
            {"region", fov_to_json(o.region)},
            {"profile", std::visit(ProfileToJson{}, o.profile)},
            {"ground_truth", o.is_ground_truth}};
    if (o.anchor) jo["anchor"] = *o.anchor;
    objects.push_back(std::move(jo));
  }
  json cooc = json::array();
  for (const auto& c : scene.cooccurrence()) {
    cooc.push_back({{"prev", c.prev}, {"token", c.token}, {"bonus", c.bonus}});
  }
  json out{{"image", {{"w", scene.image().width}, {"h", scene.image().height}}},
           {"vocabulary", scene.vocabulary()},
           {"objects", std::move(objects)},
           {"cooccurrence", std::move(cooc)},
           {"reference", scene.reference()}};
  if (!scene.id().empty()) out["id"] = scene.id();
  return out;
}

Scene scene_from_json(const json& j) {
  try {
    const auto& img = j.at("image");
    std::vector<SceneObject> objects;
    for (const auto& jo : j.at("objects")) {
      SceneObject o{jo.at("name").get<std::string>(), fov_from_json(jo.at("region")),
                    profile_from_json(jo.at("profile")), jo.at("ground_truth").get<bool>(), {}};
      if (jo.contains("anchor") && !jo.at("anchor").is_null()) o.anchor = jo.at("anchor").get<std::string>();
      objects.push_back(std::move(o));
    }
    std::vector<CooccurrenceEntry> cooc;
    if (j.contains("cooccurrence")) {
      for (const auto& jc : j.at("cooccurrence")) {
        cooc.push_back({jc.at("prev").get<std::string>(), jc.at("token").get<std::string>(),
                        jc.at("bonus").get<double>()});
      }
    }
    return Scene(ImageSpec(img.at("w").get<double>(), img.at("h").get<double>()),
                 j.at("vocabulary").get<std::vector<std::string>>(), std::move(objects), std::move(cooc),
                 j.value("reference", std::vector<std::string>{}), j.value("id", std::string{}));
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed scene document: ") + e.what());
  }
}

std::vector<Scene> corpus_from_json(const json& j) {
  std::vector<Scene> out;
  const json* list = &j;
  if (j.is_object() && j.contains("scenes")) list = &j.at("scenes");
  if (list->is_array()) {
    for (const auto& s : *list) out.push_back(scene_from_json(s));
  } else {
    out.push_back(scene_from_json(*list));
  }
  return out;
}

json corpus_to_json(const std::vector<Scene>& scenes) {
  json arr = json::array();
  for (const auto& s : scenes) arr.push_back(scene_to_json(s));
  return json{{"scenes", std::move(arr)}};
}

std::vector<Scene> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path.string(), "cannot open corpus file");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  return corpus_from_json(j);
}

void save_corpus(const std::filesystem::path& path, const std::vector<Scene>& scenes) {
  std::ofstream out(path);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << corpus_to_json(scenes).dump(1) << '\n';
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace halc
