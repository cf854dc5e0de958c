#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "idla/campaign.hpp"
#include "idla/io.hpp"

namespace {

// Exit codes: 0 ok, 1 invariant failure, 2 config error, 3 I/O error.
int dispatch(const std::string& command, idla::ExperimentConfig cfg) {
  if (command == "simulate") return idla::cmd_simulate(cfg);
  if (command == "kernel") return idla::cmd_kernel(cfg);
  if (command == "harmonic-verify") return idla::cmd_harmonic_verify(cfg);
  if (command == "scaling") return idla::cmd_scaling(cfg);
  if (command == "sandpile") return idla::cmd_sandpile(cfg);
  throw idla::ConfigError("unknown command: " + command);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lattice laboratory for extended-source internal DLA"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_override;
  std::uint64_t seed_override = 0;
  bool seed_given = false;
  int workers_override = -1;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config JSON")->required();
    sub->add_option("--out", out_override, "output directory override");
    sub->add_option("--seed", seed_override, "base seed override")
        ->each([&](const std::string&) { seed_given = true; });
    sub->add_option("--workers", workers_override, "worker thread count");
  };
  for (const char* name : {"simulate", "kernel", "harmonic-verify", "scaling", "sandpile"})
    add_common(app.add_subcommand(name));

  CLI11_PARSE(app, argc, argv);
  std::string command = app.get_subcommands().front()->get_name();

  try {
    idla::ExperimentConfig cfg = idla::load_config(config_path);
    if (!out_override.empty()) {
      cfg.out_dir = out_override;
      cfg.raw["out"] = out_override;
    }
    if (seed_given) {
      cfg.seed = seed_override;
      cfg.raw["seed"] = seed_override;
    }
    if (workers_override >= 0) cfg.workers = workers_override;
    return dispatch(command, std::move(cfg));
  } catch (const idla::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const idla::IoError& e) {
    std::fprintf(stderr, "io error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
