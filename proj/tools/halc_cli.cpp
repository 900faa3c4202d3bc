#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "halc/error.hpp"
#include "halc/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;

struct Descriptions {
  const char* name;
  const char* help;
};

constexpr Descriptions kScenarios[] = {
    {"decode", "Decode one scene with greedy, beam and HALC; write traces"},
    {"compare", "Run all methods over a corpus and report CHAIR, OPOPE and BLEU"},
    {"oracle-study", "Grid-search windows that remove greedy hallucinations"},
    {"theorem-verify", "Monte-Carlo check of the sampling bounds"},
    {"ablate", "Sweep sampling init, lambda, beam size and scorer"},
    {"length-curve", "CHAIR_I against the max-token budget"},
    {"cost-model", "Closed-form cost ratios plus trace accounting"},
    {"emit-curve", "Token log-probabilities along the expansion ladder"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Focal-contrast decoding harness over a synthetic captioning world"};
  app.set_version_flag("--version", std::string(halc::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  app.add_option("--config", config_path, "JSON run configuration or a previous manifest.json");
  app.add_option("--seed", seed, "Seed overriding the configuration");
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  for (const auto& s : kScenarios) app.add_subcommand(s.name, s.help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  const std::string scenario = app.get_subcommands().front()->get_name();
  try {
    halc::RunConfig config =
        config_path.empty() ? halc::run_config_from_json(nlohmann::json::object()) : halc::load_run_config(config_path);
    if (!config.scenario.empty() && config.scenario != scenario) {
      throw halc::ConfigError("configuration is for scenario '" + config.scenario + "', not '" + scenario + "'");
    }
    config.scenario = scenario;
    if (seed) config.seed = *seed;
    const auto files = halc::run_scenario(config);
    halc::write_outputs(out_dir, config, files);
    for (const auto& f : files) std::cout << (std::filesystem::path(out_dir) / f.name).string() << "\n";
    std::cout << (std::filesystem::path(out_dir) / "manifest.json").string() << "\n";
  } catch (const halc::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const halc::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
