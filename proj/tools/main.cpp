#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "tempo/config.hpp"
#include "tempo/error.hpp"
#include "tempo/harness.hpp"

namespace {

// Exit code for an error category; 0 is success and 1 is reserved for
// unexpected exceptions.
int exit_code(tempo::ErrorCategory c) { return 10 + static_cast<int>(c); }

int fail(tempo::ErrorCategory c, const std::string& message) {
  nlohmann::json err = {{"error", {{"category", tempo::category_name(c)}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
  return exit_code(c);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interval-timing agents: simulation, timing estimation and behavioral inference"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  int jobs = 1;
  app.add_option("--config", config_path, "JSON experiment config")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "root seed; replaces the config's seed list");
  app.add_option("--out", out_dir, "output directory (default out/<experiment>)");
  app.add_option("--jobs", jobs, "worker threads for independent simulations")
      ->check(CLI::Range(1, 1024));

  const std::pair<const char*, const char*> commands[] = {
      {"train", "train agents and log every step"},
      {"psychometric", "p(Long | tau) of trained agents"},
      {"misclass", "misclassifications per interval over training"},
      {"td-trace", "TD errors of probe episodes during training"},
      {"q-trace", "Q-values along greedy episodes after training"},
      {"timing-demo", "elapsed-time estimation error per interval"},
      {"infer", "maximum-likelihood parameter recovery from behavior"},
      {"infer-curve", "recovery accuracy against history length"},
      {"sensitivity", "recovery accuracy under perturbed known parameters"},
      {"scalability", "recovery accuracy under partial observation"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail(tempo::ErrorCategory::kUsage, e.what());
  }

  try {
    tempo::ExperimentConfig config =
        config_path.empty() ? tempo::ExperimentConfig{} : tempo::load_config(config_path);
    config.experiment = app.get_subcommands().front()->get_name();
    if (seed) config.seeds = {*seed};
    config.validate();
    const std::filesystem::path out =
        out_dir.empty() ? std::filesystem::path("out") / config.experiment : std::filesystem::path(out_dir);
    const nlohmann::json manifest = tempo::run_experiment(config, out, jobs);
    std::cout << manifest["summary"].dump() << '\n';
    return 0;
  } catch (const tempo::Error& e) {
    return fail(e.category(), e.what());
  } catch (const std::exception& e) {
    nlohmann::json err = {{"error", {{"category", "internal"}, {"message", e.what()}}}};
    std::cerr << err.dump() << '\n';
    return 1;
  }
}
