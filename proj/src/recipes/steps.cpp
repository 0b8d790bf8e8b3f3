#include <algorithm>

#include "objsoup/error.hpp"
#include "objsoup/recipes.hpp"

namespace objsoup {
namespace {

bool eval_has_unsup(const ObjectiveEval& eval) {
  return std::any_of(eval.objectives.begin(), eval.objectives.end(),
                     [](const ObjectiveId& id) { return id.is_unsupervised(); });
}

bool unsup_used(const RecipeConfig& config, const ObjectiveEval& eval) {
  return config.use_unsupervised && eval_has_unsup(eval);
}

double penalty(const OptimizerState& state, const std::string& key) {
  const auto it = state.penalty_values.find(key);
  if (it == state.penalty_values.end()) throw StructureError("no penalty value for " + key);
  return it->second;
}

// An empty restriction leaves nothing to weigh, so λ is held where it is.
WeightState advance(const WeightState& w, const GradientMatrix& g1, const GradientMatrix& g2) {
  if (w.restriction && w.restriction->empty()) {
    WeightState next = w;
    ++next.iteration;
    return next;
  }
  return modo_step(w, g1, g2);
}

void check_levels(const OptimizerState& state, std::size_t levels) {
  if (state.weights.size() != levels) {
    throw StructureError("optimizer state has " + std::to_string(state.weights.size()) +
                         " weight levels, recipe needs " + std::to_string(levels));
  }
}

void apply_backbone(OptimizerState& next, double rate, const ParamVector& total) {
  axpy_into(next.params, -rate, total);
}

std::vector<double> uniform(std::size_t n) {
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

}  // namespace

std::map<std::string, double> penalty_values_at(const RecipeConfig& config, bool unsup_active,
                                                std::size_t epoch) {
  std::map<std::string, double> values;
  if (config.kind == RecipeKind::VM) {
    for (std::size_t p = 0; p < config.level_penalties.size(); ++p) {
      values["level_" + std::to_string(p + 2)] = config.level_penalties[p].value(epoch);
    }
  }
  const bool penalised = config.kind == RecipeKind::VC || config.kind == RecipeKind::VM ||
                         config.kind == RecipeKind::Joint;
  if (penalised && unsup_active) values["unsup"] = config.unsup_penalty.value(epoch);
  return values;
}

std::vector<std::vector<ObjectiveId>> level_objectives(const RecipeConfig& config,
                                                       bool unsup_active) {
  switch (config.kind) {
    case RecipeKind::VS: {
      auto ids = config.levels.at(0);
      if (unsup_active) ids.push_back(ObjectiveId::unsupervised());
      return {ids};
    }
    case RecipeKind::VC:
    case RecipeKind::VM:
      return config.levels;
    default:
      return {};
  }
}

OptimizerState initial_state(const Problem& problem, const RecipeConfig& config,
                             ParamVector params) {
  OptimizerState state;
  state.params = std::move(params);
  const bool unsup = config.unsup_active(problem.spec());
  for (const auto& ids : level_objectives(config, unsup)) {
    state.weights.push_back(WeightState::initial(ids.size(), config.gamma));
  }
  state.penalty_values = penalty_values_at(config, unsup, 0);
  return state;
}

void head_step(ParamVector& params, const ObjectiveEval& eval, double beta) {
  for (const auto& id : eval.objectives) {
    if (!id.is_supervised()) continue;
    const auto it = eval.head_grads.find(id);
    if (it == eval.head_grads.end()) throw StructureError("missing head gradient for " + id.name());
    axpy_into(params, -beta, it->second);
  }
}

// The backbone step uses λ^k, the weights before this iteration's update.
OptimizerState vs_step(const OptimizerState& state, const RecipeConfig& config,
                       const StepEvals& evals) {
  check_levels(state, 1);
  auto ids = config.levels.at(0);
  if (unsup_used(config, evals.first)) ids.push_back(ObjectiveId::unsupervised());
  const GradientMatrix g1 = evals.first.backbone.select(ids);
  const GradientMatrix g2 = evals.second.backbone.select(ids);
  const ParamVector total = combine(g1, state.weights[0].lambda);

  OptimizerState next = state;
  next.weights[0] = advance(state.weights[0], g1, g2);
  apply_backbone(next, config.alpha, total);
  head_step(next.params, evals.first, config.beta);
  ++next.iteration;
  return next;
}

OptimizerState vc_step(const OptimizerState& state, const RecipeConfig& config,
                       const StepEvals& evals) {
  check_levels(state, 1);
  const auto& ids = config.levels.at(0);
  const GradientMatrix g1 = evals.first.backbone.select(ids);
  const GradientMatrix g2 = evals.second.backbone.select(ids);
  ParamVector total = combine(g1, state.weights[0].lambda);
  if (unsup_used(config, evals.first)) {
    const double eta = penalty(state, "unsup");
    if (eta != 0.0) axpy_into(total, eta, evals.first.backbone.column(ObjectiveId::unsupervised()));
  }

  OptimizerState next = state;
  next.weights[0] = advance(state.weights[0], g1, g2);
  apply_backbone(next, config.alpha, total);
  head_step(next.params, evals.first, config.beta);
  ++next.iteration;
  return next;
}

OptimizerState vm_step(const OptimizerState& state, const RecipeConfig& config,
                       const StepEvals& evals) {
  const std::size_t levels = config.levels.size();
  if (levels == 0) throw ConfigError("vm: no levels");
  check_levels(state, levels);

  OptimizerState next = state;
  ParamVector total;
  double coefficient = 1.0;
  for (std::size_t p = 0; p < levels; ++p) {
    const GradientMatrix g1 = evals.first.backbone.select(config.levels[p]);
    const GradientMatrix g2 = evals.second.backbone.select(config.levels[p]);
    if (p == 0) {
      total = combine(g1, state.weights[0].lambda);
    } else {
      const double eta = penalty(state, "level_" + std::to_string(p + 1));
      coefficient = config.nested ? coefficient * eta : eta;
      if (coefficient != 0.0) axpy_into(total, coefficient, combine(g1, state.weights[p].lambda));
    }
    next.weights[p] = advance(state.weights[p], g1, g2);
  }
  if (unsup_used(config, evals.first)) {
    const double eta = penalty(state, "unsup");
    const double c = config.nested ? coefficient * eta : eta;
    if (c != 0.0) axpy_into(total, c, evals.first.backbone.column(ObjectiveId::unsupervised()));
  }
  apply_backbone(next, config.alpha, total);
  head_step(next.params, evals.first, config.beta);
  ++next.iteration;
  return next;
}

OptimizerState static_weight_step(const OptimizerState& state, const RecipeConfig& config,
                                  const ObjectiveEval& eval) {
  if (!config.static_weights) throw ConfigError("static_weight: no weights configured");
  const auto& ids = config.levels.at(0);
  if (config.static_weights->size() != ids.size()) {
    throw ConfigError("static_weights length does not match the supervised objectives");
  }
  OptimizerState next = state;
  apply_backbone(next, config.beta, combine(eval.backbone.select(ids), *config.static_weights));
  head_step(next.params, eval, config.beta);
  ++next.iteration;
  return next;
}

OptimizerState joint_step(const OptimizerState& state, const RecipeConfig& config,
                          const ObjectiveEval& eval) {
  const auto& ids = config.levels.at(0);
  ParamVector total = combine(eval.backbone.select(ids), uniform(ids.size()));
  if (unsup_used(config, eval)) {
    const double eta = penalty(state, "unsup");
    if (eta != 0.0) axpy_into(total, eta, eval.backbone.column(ObjectiveId::unsupervised()));
  }
  OptimizerState next = state;
  apply_backbone(next, config.alpha, total);
  head_step(next.params, eval, config.beta);
  ++next.iteration;
  return next;
}

OptimizerState pretrain_step(const OptimizerState& state, const RecipeConfig& config,
                             const ObjectiveEval& eval) {
  if (!eval_has_unsup(eval)) throw ConfigError("pretraining needs an unsupervised objective");
  OptimizerState next = state;
  apply_backbone(next, config.alpha, eval.backbone.column(ObjectiveId::unsupervised()));
  ++next.iteration;
  return next;
}

OptimizerState finetune_step(const OptimizerState& state, const RecipeConfig& config,
                             const ObjectiveEval& eval) {
  const auto& ids = config.levels.at(0);
  const std::vector<double> ones(ids.size(), 1.0);
  OptimizerState next = state;
  apply_backbone(next, config.beta / static_cast<double>(ids.size()),
                 combine(eval.backbone.select(ids), ones));
  head_step(next.params, eval, config.beta);
  ++next.iteration;
  return next;
}

}  // namespace objsoup
