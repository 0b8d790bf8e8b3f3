#include <chrono>
#include <cmath>
#include <cstring>

#include "objsoup/error.hpp"
#include "objsoup/rng.hpp"
#include "trace_records.hpp"

namespace objsoup {
namespace {

bool uses_pretraining(RecipeKind kind) {
  return kind == RecipeKind::TwoStage || kind == RecipeKind::StaticWeight;
}

void check_losses(const std::vector<double>& losses, std::size_t iter) {
  for (double l : losses) {
    if (!std::isfinite(l) || l > kDivergenceLoss) {
      throw NumericalError("loss diverged at iteration " + std::to_string(iter));
    }
  }
}

void check_options(const TrainOptions& o) {
  if (o.epochs > 0 && o.iters_per_epoch == 0) throw ConfigError("iters_per_epoch must be >= 1");
  if (o.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (o.log_every == 0) throw ConfigError("log_every must be >= 1");
  if (o.efficient_mode && o.warmup_epochs == 0) {
    throw ConfigError("efficient mode needs warmup_epochs >= 1");
  }
  if (!(o.stationarity_tol > 0.0) || o.stationarity_max_iter == 0) {
    throw ConfigError("stationarity solver settings must be positive");
  }
}

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

std::string problem_fingerprint(const Problem& problem) {
  std::string text = problem.spec().name;
  for (const auto& [id, dim] : problem.spec().layout()) {
    text += "|" + id.name() + ":" + std::to_string(dim);
  }
  for (const auto& id : problem.spec().objectives) text += "|" + id.name();
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return hex;
}

void validate_run(const Problem& problem, const RecipeConfig& config_in,
                  const TrainOptions& options) {
  check_options(options);
  const RecipeConfig config = config_in.resolved(problem.spec());
  if (uses_pretraining(config.kind) && config.pretrain_epochs > options.epochs) {
    throw ConfigError("pretrain_epochs exceeds the epoch budget");
  }
  if (options.initial_params &&
      options.initial_params->layout() != ParamVector::zeros(problem.spec().layout()).layout()) {
    throw ConfigError("initial parameters do not match the problem layout");
  }
}

RunResult train(const Problem& problem, const RecipeConfig& config_in, const TrainOptions& options,
                TraceSink& sink, const StepObserver& observer) {
  validate_run(problem, config_in, options);
  const ProblemSpec& spec = problem.spec();
  const RecipeConfig config = config_in.resolved(spec);
  const bool unsup = config.unsup_active(spec);
  ParamVector params;
  if (options.initial_params) {
    params = *options.initial_params;
  } else {
    params = problem.initial_params(derive_seed(options.seed, "init"));
  }

  const auto start = std::chrono::steady_clock::now();
  const std::uint64_t sampling = derive_seed(options.seed, "modo-sampling");

  std::vector<ObjectiveId> stationarity_ids;
  if (config.kind == RecipeKind::VS) {
    stationarity_ids = level_objectives(config, unsup).front();
  } else {
    for (const auto& level : config.levels) {
      stationarity_ids.insert(stationarity_ids.end(), level.begin(), level.end());
    }
  }
  const detail::RecordContext ctx{problem, config, options, unsup, stationarity_ids};

  RunResult result{initial_state(problem, config, std::move(params)),
                   GradientAccumulator(options.warmup_epochs), std::nullopt, 0.0};
  OptimizerState& state = result.state;

  const auto phase_of = [&](std::size_t epoch) -> std::string {
    return uses_pretraining(config.kind) && epoch < config.pretrain_epochs ? "pretrain" : "main";
  };

  const auto fail = [&](std::size_t iter, std::size_t epoch, const std::string& message,
                        const std::vector<double>* losses) {
    sink.write(detail::diagnostic_record(ctx, iter, epoch, message, losses));
    throw NumericalError(message);
  };

  try {
    sink.write(detail::iteration_record(ctx, state, 0, 0, phase_of(0)));
  } catch (const NumericalError& e) {
    fail(0, 0, e.what(), nullptr);
  }

  const std::size_t total = options.epochs * options.iters_per_epoch;
  for (std::size_t k = 0; k < total; ++k) {
    const std::size_t epoch = k / options.iters_per_epoch;
    if (k % options.iters_per_epoch == 0) {
      state.epoch = epoch;
      state.penalty_values = penalty_values_at(config, unsup, epoch);
    }
    const BatchDraw draw =
        sample_batches(problem, sampling, k, options.batch_size, options.full_batch);

    std::vector<double> step_losses;
    try {
      const ObjectiveEval first = problem.evaluate(state.params, draw.xi1, draw.zeta1);
      step_losses = first.losses;
      check_losses(first.losses, k);
      if (epoch < options.warmup_epochs) result.accumulator.add(epoch, first.backbone);

      const auto second_eval = [&](const SampleBatch& zeta) {
        if (draw.xi2 == draw.xi1 && zeta == draw.zeta1) return first;
        return problem.evaluate(state.params, draw.xi2, zeta);
      };

      switch (config.kind) {
        case RecipeKind::VS:
          state = vs_step(state, config, {first, second_eval(draw.zeta2)});
          break;
        case RecipeKind::VC:
          state = vc_step(state, config, {first, second_eval(draw.zeta1)});
          break;
        case RecipeKind::VM:
          state = vm_step(state, config, {first, second_eval(draw.zeta1)});
          break;
        case RecipeKind::Joint:
          state = joint_step(state, config, first);
          break;
        case RecipeKind::TwoStage:
          state = epoch < config.pretrain_epochs ? pretrain_step(state, config, first)
                                                 : finetune_step(state, config, first);
          break;
        case RecipeKind::StaticWeight:
          state = epoch < config.pretrain_epochs ? pretrain_step(state, config, first)
                                                 : static_weight_step(state, config, first);
          break;
      }
    } catch (const NumericalError& e) {
      fail(k, epoch, e.what(), step_losses.empty() ? nullptr : &step_losses);
    }

    const bool epoch_end = (k + 1) % options.iters_per_epoch == 0;
    if (options.efficient_mode && epoch_end && epoch + 1 == options.warmup_epochs) {
      result.efficient_report = detect_conflicting_layers(result.accumulator, config.conflict);
      for (auto& w : state.weights) w.restriction = result.efficient_report->conflicting_layers;
    }
    if (observer) observer(state);

    if ((k + 1) % options.log_every == 0 || epoch_end || k + 1 == total) {
      try {
        sink.write(detail::iteration_record(ctx, state, k + 1, epoch, phase_of(epoch)));
      } catch (const NumericalError& e) {
        fail(k + 1, epoch, e.what(), nullptr);
      }
    }
  }

  result.wallclock_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  Json fin;
  fin["final"] = true;
  fin["iterations"] = total;
  fin["params_hash"] = state.params.hash_hex();
  fin["seed"] = options.seed;
  fin["problem"] = options.problem_tag.empty() ? problem_fingerprint(problem) : options.problem_tag;
  fin["wallclock_ms"] = result.wallclock_ms;
  sink.write(fin);
  return result;
}

}  // namespace objsoup
