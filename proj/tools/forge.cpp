#include <iostream>

#include "CLI11.hpp"
#include "forge/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"forge: periodic monopole gluing experiments"};
  app.require_subcommand(1);

  forge::RunOptions opt;
  std::string config, mode, out;
  app.add_option("--config", config, "run configuration file");
  app.add_option("--mode", mode, "highmass | largedistance");
  app.add_option("--out", out, "output directory (overrides the config)");
  app.add_option("--seed", opt.seed, "seed for randomized sample points");
  app.add_option("--tol-scale", opt.tol_scale, "widen every check bound by this factor")
      ->check(CLI::PositiveNumber);

  const char* commands[][2] = {
      {"greens-check", "Green's function branches, pole and far-field decay"},
      {"blocks-check", "exact-solution residuals, fluxes and local masses"},
      {"build", "assemble the pregluing and check the obstruction pairing"},
      {"residual", "pregluing error estimates and lattice residual table"},
      {"deform", "Picard deformation on per-centre grids"},
      {"balance", "balancing map and zeta fixed point"},
      {"report", "aggregate all CSVs in the output directory"},
  };
  for (auto& c : commands) app.add_subcommand(c[0], c[1])->fallthrough();

  CLI11_PARSE(app, argc, argv);

  if (!config.empty()) opt.config = config;
  if (!out.empty()) opt.out = out;
  if (!mode.empty()) {
    try {
      opt.mode = forge::parse_mode(mode);
    } catch (const std::exception& e) {
      std::cerr << "forge: " << e.what() << "\n";
      return 2;
    }
  }
  return forge::run_command(app.get_subcommands().front()->get_name(), opt, std::cout, std::cerr);
}
