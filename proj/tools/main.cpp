#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "affect_sdt/commands.hpp"

using namespace affect_sdt;

namespace {

struct Flags {
  std::string data, config, out, grid;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
  bool force = false;
  bool paper_faithful = false;
};

void add_run_flags(CLI::App& cmd, Flags& f) {
  cmd.add_option("--data", f.data, "Trials file (.csv or .json)");
  cmd.add_option("--config", f.config, "Run configuration (JSON)");
  cmd.add_option("--seed", f.seed, "Seed for every random draw");
  cmd.add_option("--jobs", f.jobs, "Worker threads")->check(CLI::PositiveNumber);
  cmd.add_option("--out", f.out, "Output directory");
  cmd.add_option("--grid", f.grid, "Model grid (JSON)");
  cmd.add_flag("--force", f.force, "Overwrite existing outputs");
  cmd.add_flag("--paper-faithful", f.paper_faithful, "Fit whitening on every trial");
}

ConfigOverrides overrides(const CLI::App& cmd, const Flags& f) {
  ConfigOverrides o;
  if (cmd.count("--data")) o.data = f.data;
  if (cmd.count("--config")) o.config = f.config;
  if (cmd.count("--seed")) o.seed = f.seed;
  if (cmd.count("--jobs")) o.jobs = f.jobs;
  if (cmd.count("--out")) o.out = f.out;
  if (cmd.count("--grid")) o.grid = f.grid;
  o.force = f.force;
  o.paper_faithful = f.paper_faithful;
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Affective-transition signal detection models"};
  app.require_subcommand(1);

  std::string validate_data;
  auto* validate = app.add_subcommand("validate", "Check a trials file");
  validate->add_option("--data", validate_data, "Trials file")->required();

  Flags fit_flags;
  auto* fit = app.add_subcommand("fit", "Nested cross-validation over the model grid");
  add_run_flags(*fit, fit_flags);

  Flags an_flags;
  std::string which;
  auto* analyze = app.add_subcommand("analyze", "Run one replication analysis");
  analyze->add_option("which", which, "turing, rsa, simulate, affect-change, correlations, "
                                      "wordcloud or magnitude")
      ->required();
  add_run_flags(*analyze, an_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  if (*validate) return cmd_validate(validate_data, std::cout, std::cerr);
  const bool is_fit = static_cast<bool>(*fit);
  const auto& cmd = is_fit ? *fit : *analyze;
  const auto& flags = is_fit ? fit_flags : an_flags;
  RunConfig config;
  try {
    config = resolve_config(overrides(cmd, flags));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  if (is_fit) return cmd_fit(config, std::cout, std::cerr);
  return cmd_analyze(config, which, std::cout, std::cerr);
}
