#include <cmath>
#include <ostream>

#include "objsoup/error.hpp"
#include "trace_records.hpp"

namespace objsoup {

void StreamTraceSink::write(const Json& record) {
  out_ << record.dump() << '\n';
  if (!out_) throw IoError("failed to write trace record");
}

namespace detail {

Json losses_json(const std::vector<ObjectiveId>& ids, const std::vector<double>& losses) {
  Json out = Json::object();
  for (std::size_t i = 0; i < ids.size() && i < losses.size(); ++i) out[ids[i].name()] = losses[i];
  return out;
}

Json iteration_record(const RecordContext& ctx, const OptimizerState& state, std::size_t iter,
                      std::size_t epoch, const std::string& phase) {
  const ProblemSpec& spec = ctx.problem.spec();
  const ObjectiveEval full = ctx.problem.evaluate_full(state.params);
  for (double l : full.losses) {
    if (!std::isfinite(l) || l > kDivergenceLoss) {
      throw NumericalError("loss diverged at iteration " + std::to_string(iter));
    }
  }

  Json lambda = Json::object();
  Json lambda_u = nullptr;
  for (std::size_t p = 0; p < state.weights.size(); ++p) {
    auto values = state.weights[p].lambda.vector();
    if (ctx.config.kind == RecipeKind::VS && ctx.unsup_active) {
      lambda_u = values.back();
      values.pop_back();
    }
    lambda["level_" + std::to_string(p + 1)] = values;
  }
  Json eta = Json::object();
  for (std::size_t p = 2; p <= ctx.config.levels.size(); ++p) {
    const auto key = "level_" + std::to_string(p);
    if (auto it = state.penalty_values.find(key); it != state.penalty_values.end()) {
      eta[key] = it->second;
    }
  }
  if (auto it = state.penalty_values.find("unsup"); it != state.penalty_values.end()) {
    eta["unsup"] = it->second;
  }

  const double stationarity =
      stationarity_measure(full.backbone.select(ctx.stationarity_objectives),
                           ctx.options.stationarity_tol, ctx.options.stationarity_max_iter);
  Json gap = nullptr;
  Json feasible = nullptr;
  if (spec.unsup_optimum && spec.has_unsupervised) {
    const double g = full.loss(ObjectiveId::unsupervised()) - *spec.unsup_optimum;
    gap = g;
    if (ctx.config.epsilon) feasible = g <= *ctx.config.epsilon;
  }
  Json pareto = nullptr;
  if (spec.known_pareto) pareto = pareto_distance(spec, state.params);

  Json layers = Json::array();
  bool restricted = false;
  if (!state.weights.empty() && state.weights.front().restriction) {
    restricted = true;
    for (const auto& id : *state.weights.front().restriction) layers.push_back(id.name());
  }

  Json r;
  r["iter"] = iter;
  r["epoch"] = epoch;
  r["recipe"] = to_string(ctx.config.kind);
  r["order"] = ctx.config.order_label;
  r["phase"] = phase;
  r["lambda"] = std::move(lambda);
  r["lambda_u"] = std::move(lambda_u);
  r["eta"] = std::move(eta);
  r["losses"] = losses_json(full.objectives, full.losses);
  r["stationarity"] = stationarity;
  r["pareto_distance"] = std::move(pareto);
  r["feasibility_gap"] = std::move(gap);
  r["feasible"] = std::move(feasible);
  r["conflict_layers"] = std::move(layers);
  r["restricted"] = restricted;
  return r;
}

Json diagnostic_record(const RecordContext& ctx, std::size_t iter, std::size_t epoch,
                       const std::string& message, const std::vector<double>* losses) {
  Json r;
  r["diagnostic"] = "numerical_failure";
  r["iter"] = iter;
  r["epoch"] = epoch;
  r["recipe"] = to_string(ctx.config.kind);
  r["message"] = message;
  // Non-finite values serialize as null.
  r["losses"] = losses ? losses_json(ctx.problem.spec().objectives, *losses) : Json(nullptr);
  return r;
}

}  // namespace detail
}  // namespace objsoup
