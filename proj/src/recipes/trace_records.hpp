#pragma once

#include <optional>
#include <string>

#include "objsoup/recipes.hpp"

namespace objsoup::detail {

struct RecordContext {
  const Problem& problem;
  const RecipeConfig& config;
  const TrainOptions& options;
  bool unsup_active;
  std::vector<ObjectiveId> stationarity_objectives;
};

Json iteration_record(const RecordContext& ctx, const OptimizerState& state, std::size_t iter,
                      std::size_t epoch, const std::string& phase);
Json diagnostic_record(const RecordContext& ctx, std::size_t iter, std::size_t epoch,
                       const std::string& message, const std::vector<double>* losses);
Json losses_json(const std::vector<ObjectiveId>& ids, const std::vector<double>& losses);

}  // namespace objsoup::detail
