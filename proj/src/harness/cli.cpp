#include <CLI11.hpp>

#include "objsoup/harness.hpp"

namespace objsoup {

int cli_main(int argc, char** argv) {
  CLI::App app{"objsoup: multi-objective training recipes on synthetic problems"};
  app.require_subcommand(1);

  std::string config;
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  auto* run = app.add_subcommand("run", "train one recipe and write trace, summary and resolved config");
  run->add_option("--config", config, "experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--seed", seed, "master seed (overrides config and OBJSOUP_SEED)");

  std::optional<std::filesystem::path> conflict_run;
  std::optional<std::filesystem::path> conflict_config;
  std::filesystem::path conflict_out;
  bool per_layer = false;
  auto* conflicts = app.add_subcommand("conflicts", "gradient cosine matrices as CSV");
  conflicts->add_option("--run", conflict_run, "run directory with accumulator.json");
  conflicts->add_option("--config", conflict_config, "config to accumulate from scratch");
  conflicts->add_option("--out", conflict_out, "output CSV")->required();
  conflicts->add_flag("--per-layer", per_layer, "include per-layer matrices");

  std::vector<std::filesystem::path> run_dirs;
  std::filesystem::path compare_out;
  auto* compare = app.add_subcommand("compare", "one CSV row per completed run");
  compare->add_option("--out", compare_out, "output CSV")->required();
  compare->add_option("runs", run_dirs, "run directories")->required();

  std::string problem;
  std::optional<double> h;
  std::uint64_t params_seed = 0;
  std::size_t points = 3;
  std::optional<double> corrupt;
  auto* gradcheck = app.add_subcommand("gradcheck", "analytic vs finite-difference gradients");
  gradcheck->set_help_flag("--help", "print this help message and exit");
  gradcheck->add_option("--problem", problem, "quadratic_soup | conflict_by_construction | toy_multitask_net")
      ->required();
  gradcheck->add_option("--h", h, "finite-difference step (default: problem-specific)");
  gradcheck->add_option("--seed", params_seed, "seed for data and parameter points");
  gradcheck->add_option("--points", points, "number of random parameter points");
  gradcheck->add_option("--corrupt", corrupt, "add an offset to analytic gradients")
      ->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*run) return cmd_run(config, out_dir, seed);
  if (*conflicts) return cmd_conflicts(conflict_run, conflict_config, conflict_out, per_layer);
  if (*compare) return cmd_compare(run_dirs, compare_out);
  return cmd_gradcheck(problem, h, params_seed, points, corrupt);
}

}  // namespace objsoup
