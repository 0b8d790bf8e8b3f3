#pragma once

// Experiment configuration, run persistence and the command-line surface.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "objsoup/problems.hpp"
#include "objsoup/recipes.hpp"

namespace objsoup {

struct ExperimentConfig {
  // Problem section with every parameter materialized ("name", "seed", ...).
  Json problem;
  RecipeConfig recipe;
  TrainOptions train;  // seed is the resolved master seed
  std::string output_directory;
  std::vector<std::string> output_formats = {"jsonl"};
};

enum ExitCode : int { kExitOk = 0, kExitConfig = 1, kExitNumerical = 2, kExitIo = 3 };

/// Parses and fully validates a config document. Unknown keys and wrong types
/// are ConfigErrors. Seed priority: seed_override, then problem.seed, then the
/// OBJSOUP_SEED environment variable, then 0.
ExperimentConfig parse_experiment_config(const Json& doc,
                                         std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_experiment_config(const std::filesystem::path& path,
                                        std::optional<std::uint64_t> seed_override = std::nullopt);
/// The config with all defaults written out; parsing it again yields the same config.
Json resolved_config_json(const ExperimentConfig& config);

/// Builds the problem named in a (possibly partial) problem section; `seed` is
/// the master seed, from which the "data" stream is derived.
std::unique_ptr<Problem> build_problem(const Json& problem_section, std::uint64_t seed);
/// Problem section with defaults filled in, for a bare problem name.
Json default_problem_section(const std::string& name);

/// Aggregates computed from a run trace alone.
Json summarize_trace(const std::vector<Json>& records);
std::vector<Json> read_jsonl(const std::filesystem::path& path);

Json accumulator_to_json(const GradientAccumulator& acc);
GradientAccumulator accumulator_from_json(const Json& doc);

// Command implementations; each returns a process exit code and reports
// errors on stderr.
int cmd_run(const std::filesystem::path& config_path, const std::optional<std::string>& out_dir,
            std::optional<std::uint64_t> seed);
int cmd_conflicts(const std::optional<std::filesystem::path>& run_dir,
                  const std::optional<std::filesystem::path>& config_path,
                  const std::filesystem::path& out_csv, bool per_layer);
int cmd_compare(const std::vector<std::filesystem::path>& run_dirs,
                const std::filesystem::path& out_csv);
int cmd_gradcheck(const std::string& problem_name, std::optional<double> h,
                  std::uint64_t params_seed, std::size_t points, std::optional<double> corrupt);

int cli_main(int argc, char** argv);

}  // namespace objsoup
