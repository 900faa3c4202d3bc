#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "halc/error.hpp"
#include "halc/sim_world.hpp"

namespace halc {

namespace {

constexpr double kVictimPeakWidthRatio = 0.3125;
constexpr double kVictimAmp = 3.0;
constexpr double kTrapSlope = 0.1;

// Fills the caption skeleton with the given nouns, stopping after the last one.
std::vector<std::string> skeleton_caption(const std::vector<std::string>& nouns) {
  std::vector<std::string> out;
  std::size_t next = 0;
  for (std::size_t pos = 0; next < nouns.size(); ++pos) {
    if (Grammar::is_noun_slot(pos)) {
      out.push_back(nouns[next++]);
    } else {
      out.emplace_back(Grammar::word_at(pos));
    }
  }
  return out;
}

std::string take_uniform(std::vector<std::string>& pool, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const std::size_t k = pick(rng);
  std::string out = pool[k];
  pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
  return out;
}

// Without replacement; earlier pool entries are more common.
std::vector<std::string> take_weighted(std::vector<std::string>& pool, std::size_t count, Rng& rng) {
  std::vector<std::string> out;
  for (std::size_t c = 0; c < count && !pool.empty(); ++c) {
    std::vector<double> weights(pool.size());
    for (std::size_t k = 0; k < pool.size(); ++k) {
      const auto rank = static_cast<std::size_t>(
          std::find(object_pool().begin(), object_pool().end(), pool[k]) - object_pool().begin());
      weights[k] = 1.0 / std::pow(static_cast<double>(rank) + 1.0, 0.8);
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    const std::size_t k = pick(rng);
    out.push_back(pool[k]);
    pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(k));
  }
  return out;
}

Fov random_region(const ImageSpec& image, Rng& rng) {
  std::uniform_real_distribution<double> ext(0.15, 0.5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double w = ext(rng) * image.width;
  const double h = ext(rng) * image.height;
  return Fov{w, h, w / 2 + unit(rng) * (image.width - w), h / 2 + unit(rng) * (image.height - h)};
}

const Peaking* victim_profile(const Scene& scene) {
  for (const auto& o : scene.objects()) {
    if (o.is_ground_truth || !o.anchor || !std::holds_alternative<ContextShift>(o.profile)) continue;
    const SceneObject* a = scene.find_object(*o.anchor);
    if (a != nullptr && a->is_ground_truth) {
      if (const auto* p = std::get_if<Peaking>(&a->profile)) return p;
    }
  }
  return nullptr;
}

}  // namespace

const std::vector<std::string>& object_pool() {
  static const std::vector<std::string> pool = {
      "person", "chair",  "car",      "cup",    "book",      "bottle",  "dog",       "table",
      "bench",  "bird",   "cat",      "clock",  "umbrella",  "bus",     "boat",      "plant",
      "bowl",   "horse",  "truck",    "kite",   "surfboard", "bicycle", "vase",      "sheep",
      "laptop", "phone",  "pizza",    "cake",   "banana",    "apple",   "sandwich",  "couch",
      "bed",    "sink",   "oven",     "train",  "cow",       "beach",   "man",       "skateboard"};
  return pool;
}

FovOffset default_detector_eta() { return FovOffset{-24.0, -18.0, 0.0, 0.0}; }

bool has_trap(const Scene& scene) {
  for (const auto& o : scene.objects()) {
    if (!o.is_ground_truth && o.anchor && std::holds_alternative<ContextShift>(o.profile)) {
      const SceneObject* a = scene.find_object(*o.anchor);
      if (a != nullptr && a->is_ground_truth && std::holds_alternative<Peaking>(a->profile)) return true;
    }
  }
  return false;
}

bool is_correctable_trap(const Scene& scene) {
  const Peaking* p = victim_profile(scene);
  return p != nullptr && p->amp > 0.0;
}

std::vector<Scene> generate_corpus(std::uint64_t seed, const CorpusSpec& spec) {
  if (spec.count < 1) throw InvalidParameter("corpus count must be at least 1");
  if (spec.trap_fraction < 0.0 || spec.trap_fraction > 1.0) {
    throw InvalidParameter("trap_fraction must lie in [0,1]");
  }
  if (spec.correctable_fraction < 0.0 || spec.correctable_fraction > 1.0) {
    throw InvalidParameter("correctable_fraction must lie in [0,1]");
  }
  if (spec.min_objects < 1 || spec.max_objects < spec.min_objects) {
    throw InvalidParameter("object count range is empty");
  }
  if (static_cast<std::size_t>(spec.max_objects) + 3 > object_pool().size()) {
    throw InvalidParameter("max_objects exceeds the object pool");
  }
  if (spec.lattice < 1) throw InvalidParameter("lattice must be at least 1");
  const ImageSpec image(spec.image_width, spec.image_height);

  Rng rng(seed);
  std::vector<std::size_t> order(static_cast<std::size_t>(spec.count));
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  const auto traps = static_cast<std::size_t>(std::llround(spec.trap_fraction * spec.count));
  const auto correctable = static_cast<std::size_t>(std::llround(spec.correctable_fraction * traps));
  std::vector<int> kind(order.size(), 0);  // 0 clean, 1 uncorrectable trap, 2 correctable trap
  for (std::size_t k = 0; k < traps; ++k) kind[order[k]] = k < correctable ? 2 : 1;

  std::vector<std::string> vocabulary = object_pool();
  std::vector<Scene> scenes;
  scenes.reserve(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    Rng srng(derive_seed(seed, i));
    std::vector<std::string> pool = object_pool();
    std::uniform_int_distribution<int> count_dist(spec.min_objects, spec.max_objects);
    const auto g = static_cast<std::size_t>(count_dist(srng));
    std::vector<std::string> names = take_weighted(pool, g, srng);

    std::uniform_real_distribution<double> level_dist(3.2, 4.6);
    std::vector<double> levels(g);
    for (double& l : levels) l = level_dist(srng);
    std::sort(levels.begin(), levels.end(), std::greater<>());

    std::vector<SceneObject> objects;
    std::vector<std::string> reference_nouns;
    for (std::size_t k = 0; k < g; ++k) {
      objects.push_back(SceneObject{names[k], random_region(image, srng), StableHigh{levels[k]}, true, {}});
      reference_nouns.push_back(names[k]);
    }
    if (kind[i] != 0) {
      const std::string victim = take_uniform(pool, srng);
      const std::string trap = take_uniform(pool, srng);
      std::uniform_int_distribution<int> cell(0, spec.lattice - 1);
      const int cx = cell(srng);
      const int cy = cell(srng);
      const Fov v_star{spec.victim_scale * image.width, spec.victim_scale * image.height,
                       (cx + 0.5) * image.width / spec.lattice, (cy + 0.5) * image.height / spec.lattice};
      const double amp = kind[i] == 2 ? kVictimAmp : 0.0;
      objects.push_back(
          SceneObject{victim, v_star, Peaking{v_star, kVictimPeakWidthRatio * v_star.width, amp, 0.0}, true, {}});
      std::uniform_real_distribution<double> trap_base(1.8, 2.4);
      objects.push_back(SceneObject{trap, v_star, ContextShift{kTrapSlope, trap_base(srng)}, false, victim});
      reference_nouns.push_back(victim);
    }
    const std::string distractor = take_uniform(pool, srng);
    objects.push_back(SceneObject{distractor, random_region(image, srng),
                                  Noisy{0.3, srng(), 0.2}, false, names.front()});
    std::vector<CooccurrenceEntry> cooc{{"the", distractor, 0.2}};

    char id[32];
    std::snprintf(id, sizeof id, "scene-%04zu", i);
    scenes.emplace_back(image, vocabulary, std::move(objects), std::move(cooc),
                        skeleton_caption(reference_nouns), id);
  }
  return scenes;
}

Scene demo_scene() {
  const ImageSpec image(640.0, 480.0);
  const Fov clock_box{64.0, 48.0, 360.0, 210.0};
  std::vector<SceneObject> objects{
      {"beach", Fov{640.0, 200.0, 320.0, 380.0}, StableHigh{4.0}, true, {}},
      {"man", Fov{80.0, 200.0, 200.0, 300.0}, StableHigh{3.6}, true, {}},
      {"clock", clock_box, Peaking{clock_box, 20.0, kVictimAmp, 0.0}, true, {}},
      {"surfboard", Fov{120.0, 40.0, 480.0, 400.0}, ContextShift{kTrapSlope, 2.0}, false, "clock"},
      {"book", Fov{40.0, 30.0, 560.0, 120.0}, Noisy{0.3, 7, 0.2}, false, "man"},
  };
  return Scene(image, object_pool(), std::move(objects), {},
               skeleton_caption({"beach", "man", "clock"}), "demo");
}

}  // namespace halc
