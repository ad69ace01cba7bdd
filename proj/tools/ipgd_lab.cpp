#include <cstdint>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <string>

#include "CLI11.hpp"
#include "ipgd/experiment.hpp"

namespace {

int cmd_run(const std::string& config_path, bool seed_set, std::uint64_t seed,
            const std::string& out_override) {
  std::ifstream in(config_path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open config file " << config_path << "\n";
    return 2;
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    std::cerr << "error: " << config_path << " is not valid JSON: " << e.what() << "\n";
    return 2;
  }
  ipgd::ExperimentConfig cfg = ipgd::config_from_json(j);
  if (seed_set) cfg.seed = seed;
  if (!out_override.empty()) cfg.out_dir = out_override;
  return ipgd::run_config(cfg);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ipgd-lab: perturbed gradient descent experiments on over-parameterized recovery problems"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t run_seed = 0;
  bool run_seed_set = false;
  std::string run_out;
  CLI::App* run = app.add_subcommand("run", "Run one configured experiment");
  run->add_option("--config", config_path, "JSON experiment config")->required();
  run->add_option("--seed", run_seed, "Override the config seed")
      ->each([&run_seed_set](const std::string&) { run_seed_set = true; });
  run->add_option("--out", run_out, "Override the output directory");

  std::string preset_name;
  std::uint64_t preset_seed = 7;
  std::string preset_out;
  std::string profile = "full";
  CLI::App* preset = app.add_subcommand("preset", "Run a named experiment bundle");
  preset->add_option("name", preset_name, "fig1, fig4, fig5, fig6, or escape")->required();
  preset->add_option("--seed", preset_seed, "Master seed for the bundle (default 7)");
  preset->add_option("--out", preset_out, "Output directory for the bundle");
  preset->add_option("--profile", profile, "quick or full (default full)");

  std::string family = "all";
  std::uint64_t verify_seed = 0;
  CLI::App* verify = app.add_subcommand("verify", "Check derivatives and measurement geometry");
  verify->add_option("--family", family,
                     "all, ms, ms-asym, mc, mc-asym, onebit, onebit-asym, or sparse");
  verify->add_option("--seed", verify_seed, "Seed for the check streams");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(config_path, run_seed_set, run_seed, run_out);
    if (preset->parsed()) {
      return ipgd::run_preset(preset_name, preset_seed, preset_out, profile, std::cout);
    }
    if (verify->parsed()) return ipgd::verify_command(family, verify_seed, std::cout);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
