#include <iostream>

#include <CLI11.hpp>

#include "commands.hpp"
#include "oracles.hpp"

int main(int argc, char** argv) {
  using hencky::cli::RunSpec;
  CLI::App app{"Hencky plasticity experiments"};
  app.require_subcommand(1);
  RunSpec spec;

  auto common = [&spec](CLI::App* sub, bool scenario) {
    if (scenario) sub->add_option("--scenario", spec.scenario, "scenario file")->required()->check(CLI::ExistingFile);
    sub->add_option("--levels", spec.levels, "mesh resolutions m")->delimiter(',');
    sub->add_option("--out", spec.out, "output directory")->capture_default_str();
    sub->add_option("--seed", spec.seed, "random seed")->capture_default_str();
    sub->add_option("--tol", spec.tol, "relative gap tolerance of the solver");
    sub->add_flag("--quiet", spec.quiet, "no tables on stdout");
  };
  common(app.add_subcommand("mesh-gen", "write meshes for each level"), true);
  common(app.add_subcommand("solve", "solve each level"), true);
  auto* rec = app.add_subcommand("recover", "recovery sequence from the relaxed minimizer");
  common(rec, true);
  rec->add_option("--schedule", spec.schedule, "k values")->delimiter(',');
  auto* gc = app.add_subcommand("gamma-check", "gap between relaxed minimum and recovered energies");
  common(gc, true);
  gc->add_option("--schedule", spec.schedule, "k values")->delimiter(',');
  auto* orc = app.add_subcommand("oracle", "brute-force reference values");
  common(orc, false);
  orc->add_option("name", spec.oracle, "oracle name")->required()->check(CLI::IsMember(hencky::cli::oracle_names()));
  common(app.add_subcommand("selftest", "quick consistency checks"), false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hencky::cli::kUsage;
  }
  spec.command = app.get_subcommands().front()->get_name();
  return hencky::cli::run(spec);
}
