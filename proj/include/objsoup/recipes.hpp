#pragma once

// Objective-soup training recipes: flat (VS), constrained (VC) and multilevel
// (VM) dynamic weighting, the baselines, and the epoch/iteration driver.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "objsoup/conflict.hpp"
#include "objsoup/param_space.hpp"
#include "objsoup/problems.hpp"
#include "objsoup/weighting.hpp"

namespace objsoup {

using Json = nlohmann::ordered_json;

struct PenaltySchedule {
  double init = 0.0;
  double rate_per_epoch = 0.02;
  double cap = 1.5;

  double value(std::size_t epoch) const;
  bool operator==(const PenaltySchedule&) const = default;
};

double penalty_value(const PenaltySchedule& schedule, std::size_t epoch);

enum class RecipeKind { VS, VC, VM, TwoStage, StaticWeight, Joint };

std::string to_string(RecipeKind kind);
RecipeKind parse_recipe_kind(const std::string& text);

struct RecipeConfig {
  RecipeKind kind = RecipeKind::VS;
  // Supervised objectives per level, level 1 (uppermost) first. Empty means a
  // single level holding every supervised objective. The unsupervised
  // objective is implicitly below the last level.
  std::vector<std::vector<ObjectiveId>> levels;
  // Whether the unsupervised objective (if the problem has one) takes part.
  bool use_unsupervised = true;
  std::string order_label;
  // Penalties for levels 2..P (size P - 1) and for the unsupervised term.
  std::vector<PenaltySchedule> level_penalties;
  PenaltySchedule unsup_penalty;
  // VM: unsupervised coefficient is the product of all level penalties times
  // its own, instead of its own alone.
  bool nested = false;
  double alpha = 5e-5;
  double beta = 5e-4;
  GammaSchedule gamma;
  std::optional<std::vector<double>> static_weights;  // aligned with supervised()
  std::optional<double> epsilon;
  std::size_t pretrain_epochs = 0;  // TwoStage / StaticWeight
  ConflictOptions conflict;

  // Fills defaulted levels and penalties for `spec`, then validates.
  // Throws ConfigError.
  RecipeConfig resolved(const ProblemSpec& spec) const;
  void validate(const ProblemSpec& spec) const;

  bool unsup_active(const ProblemSpec& spec) const {
    return use_unsupervised && spec.has_unsupervised;
  }
};

struct OptimizerState {
  ParamVector params;
  // One simplex per level; VS keeps a single one that also carries λ_u last.
  std::vector<WeightState> weights;
  std::size_t epoch = 0;
  std::size_t iteration = 0;
  // "level_2", ..., "unsup"
  std::map<std::string, double> penalty_values;
};

/// Gradients of one iteration: `first` on (ξ1, ζ1), `second` on (ξ2, ζ2) for
/// VS and on (ξ2, ζ1) otherwise.
struct StepEvals {
  ObjectiveEval first;
  ObjectiveEval second;
};

// Penalty values in force during `epoch`: "level_p" for VM levels below the
// first, "unsup" when the recipe weights the unsupervised term by a penalty.
std::map<std::string, double> penalty_values_at(const RecipeConfig& config, bool unsup_active,
                                                std::size_t epoch);

// Objectives sharing the simplex of each level (VS appends the unsupervised one).
std::vector<std::vector<ObjectiveId>> level_objectives(const RecipeConfig& config,
                                                       bool unsup_active);

OptimizerState initial_state(const Problem& problem, const RecipeConfig& config,
                             ParamVector params);

// Single-iteration updates. Each advances `iteration` by one.
OptimizerState vs_step(const OptimizerState& state, const RecipeConfig& config,
                       const StepEvals& evals);
OptimizerState vc_step(const OptimizerState& state, const RecipeConfig& config,
                       const StepEvals& evals);
OptimizerState vm_step(const OptimizerState& state, const RecipeConfig& config,
                       const StepEvals& evals);
// φ_{t,n} -= β ∇φ ℓ_{t,n} for every supervised head; throws StructureError if
// a head gradient is missing.
void head_step(ParamVector& params, const ObjectiveEval& eval, double beta);
OptimizerState static_weight_step(const OptimizerState& state, const RecipeConfig& config,
                                  const ObjectiveEval& eval);
OptimizerState joint_step(const OptimizerState& state, const RecipeConfig& config,
                          const ObjectiveEval& eval);
// θ -= α ∇ℓ_u (pretraining phase).
OptimizerState pretrain_step(const OptimizerState& state, const RecipeConfig& config,
                             const ObjectiveEval& eval);
// θ -= (β / NT) Σ ∇ℓ_s, heads -= β ∇φ.
OptimizerState finetune_step(const OptimizerState& state, const RecipeConfig& config,
                             const ObjectiveEval& eval);

class TraceSink {
 public:
  virtual ~TraceSink() = default;
  virtual void write(const Json& record) = 0;
};

class MemoryTraceSink final : public TraceSink {
 public:
  void write(const Json& record) override { records.push_back(record); }
  std::vector<Json> records;
};

class StreamTraceSink final : public TraceSink {
 public:
  explicit StreamTraceSink(std::ostream& out) : out_(out) {}
  void write(const Json& record) override;

 private:
  std::ostream& out_;
};

struct TrainOptions {
  std::size_t epochs = 1;
  std::size_t iters_per_epoch = 100;
  std::size_t batch_size = 64;
  std::size_t log_every = 10;  // plus epoch boundaries and the last iteration
  bool full_batch = false;
  bool efficient_mode = false;
  std::size_t warmup_epochs = 20;  // also the accumulation window
  std::uint64_t seed = 0;
  std::optional<ParamVector> initial_params;  // default: problem init from the "init" stream
  double stationarity_tol = 1e-10;
  std::size_t stationarity_max_iter = 10000;
  // Written to the final trace record; defaults to problem_fingerprint().
  std::string problem_tag;
};

struct RunResult {
  OptimizerState state;
  GradientAccumulator accumulator;
  std::optional<ConflictReport> efficient_report;
  double wallclock_ms = 0.0;
};

using StepObserver = std::function<void(const OptimizerState&)>;

/// The checks train() performs before doing any work. Throws ConfigError.
void validate_run(const Problem& problem, const RecipeConfig& config, const TrainOptions& options);

/// Runs the recipe for epochs × iters_per_epoch iterations. Throws ConfigError
/// before any work on invalid input, and NumericalError after writing a
/// diagnostic record when the run diverges.
RunResult train(const Problem& problem, const RecipeConfig& config, const TrainOptions& options,
                TraceSink& sink, const StepObserver& observer = {});

/// Identifies a problem instance: name, layout and losses at a fixed probe point.
std::string problem_fingerprint(const Problem& problem);

inline constexpr double kDivergenceLoss = 1e12;

}  // namespace objsoup
