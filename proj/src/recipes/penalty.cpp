#include <algorithm>

#include "objsoup/error.hpp"
#include "objsoup/recipes.hpp"

namespace objsoup {

// Computed directly from the epoch rather than accumulated, so the value at a
// given epoch does not depend on how many boundaries were crossed before it.
double PenaltySchedule::value(std::size_t epoch) const {
  return std::min(init + rate_per_epoch * static_cast<double>(epoch), cap);
}

double penalty_value(const PenaltySchedule& schedule, std::size_t epoch) {
  return schedule.value(epoch);
}

std::string to_string(RecipeKind kind) {
  switch (kind) {
    case RecipeKind::VS: return "vs";
    case RecipeKind::VC: return "vc";
    case RecipeKind::VM: return "vm";
    case RecipeKind::TwoStage: return "two_stage";
    case RecipeKind::StaticWeight: return "static_weight";
    case RecipeKind::Joint: return "joint";
  }
  return "?";
}

RecipeKind parse_recipe_kind(const std::string& text) {
  for (auto kind : {RecipeKind::VS, RecipeKind::VC, RecipeKind::VM, RecipeKind::TwoStage,
                    RecipeKind::StaticWeight, RecipeKind::Joint}) {
    if (to_string(kind) == text) return kind;
  }
  throw ConfigError("unknown recipe kind: " + text);
}

}  // namespace objsoup
