#include <exception>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "jbasim/dispatch.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Transmon readout simulator with a bifurcation-amplifier detector"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed_override = 0;
  bool have_seed = false;

  auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
  run->add_option("config", config_path, "JSON config path")->required();
  auto* seed_opt = run->add_option("--seed", seed_override, "Override the config seed");
  run->add_option("--out", out_dir, "Override the output directory");

  auto* validate = app.add_subcommand("validate", "Parse and validate a config file");
  validate->add_option("config", config_path, "JSON config path")->required();

  auto* list = app.add_subcommand("list-experiments", "List the supported experiment types");

  CLI11_PARSE(app, argc, argv);
  have_seed = seed_opt->count() > 0;

  try {
    if (list->parsed()) {
      for (const auto& name : jbasim::known_experiments()) {
        std::cout << name << "\n";
      }
      return 0;
    }
    if (validate->parsed()) {
      const jbasim::RunConfig config = jbasim::load_config(config_path);
      std::cout << "ok: " << config_path << " (experiment = "
                << jbasim::experiment_name(config.experiment) << ")\n";
      return 0;
    }
    jbasim::RunConfig config = jbasim::load_config(config_path);
    if (have_seed) config.seed = seed_override;
    if (!out_dir.empty()) config.output_dir = out_dir;
    const jbasim::DispatchOutcome outcome = jbasim::dispatch(config, std::cout);
    for (const auto& f : outcome.outputs) {
      std::cout << "wrote " << config.output_dir << "/" << f << "\n";
    }
    return outcome.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
