#include <iostream>

#include <CLI11.hpp>

#include "cli/commands.h"

int main(int argc, char** argv) {
  using cautious::cli::Flags;
  CLI::App app{"Worst-case bounds and certificates from noisy data"};
  app.require_subcommand(1);

  Flags flags;
  auto add_common = [&](CLI::App* cmd, bool with_config) {
    if (with_config) {
      cmd->add_option("--config", flags.config, "JSON experiment config")->required();
    }
    cmd->add_option("--seed", flags.seed, "random seed (overrides the config)");
    cmd->add_option("--out", flags.out, "output directory")->capture_default_str();
    cmd->add_option("--tol", flags.tol, "numerical tolerance for the checks");
  };

  add_common(app.add_subcommand("bound", "worst-case bounds on a grid of inputs"), true);
  add_common(app.add_subcommand("certify", "convexity certificates for g_c"), true);
  add_common(app.add_subcommand("contract", "contraction certificates"), true);
  add_common(app.add_subcommand("regulate", "certified regulation of a linear system"), true);
  add_common(app.add_subcommand("online", "online cautious descent experiments"), true);
  CLI::App* reproduce = app.add_subcommand("reproduce", "rerun a built-in example");
  add_common(reproduce, false);
  reproduce->add_option("example", flags.example, "linear, contraction or uav")
      ->required()
      ->check(CLI::IsMember({"linear", "contraction", "uav"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : cautious::cli::kExitConfig;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  return cautious::cli::Dispatch(command, flags, std::cout, std::cerr);
}
