#pragma once

#include <filesystem>
#include <vector>

#include "json.hpp"

#include "halc/fov.hpp"
#include "halc/sim_world.hpp"

namespace halc {

/// {w, h, cx, cy}, rounded to 6 decimals when `rounded` is set.
nlohmann::json fov_to_json(const Fov& f, bool rounded = false);
Fov fov_from_json(const nlohmann::json& j);

nlohmann::json scene_to_json(const Scene& scene);
Scene scene_from_json(const nlohmann::json& j);

/// Accepts {"scenes": [...]}, a bare array, or a single scene document.
std::vector<Scene> corpus_from_json(const nlohmann::json& j);
nlohmann::json corpus_to_json(const std::vector<Scene>& scenes);

std::vector<Scene> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::filesystem::path& path, const std::vector<Scene>& scenes);

/// Rounds to 6 decimal places so dumped documents are stable and readable.
double round6(double x);

}  // namespace halc
