#include <cmath>
#include <set>

#include "objsoup/error.hpp"
#include "objsoup/recipes.hpp"

namespace objsoup {
namespace {

void check_rate(double value, const char* name) {
  if (!std::isfinite(value) || value <= 0.0) {
    throw ConfigError(std::string(name) + " must be a positive finite number");
  }
}

void check_schedule(const PenaltySchedule& s, const std::string& name) {
  if (!std::isfinite(s.init) || !std::isfinite(s.rate_per_epoch) || !std::isfinite(s.cap)) {
    throw ConfigError(name + ": penalty values must be finite");
  }
  if (s.init < 0.0 || s.rate_per_epoch < 0.0) {
    throw ConfigError(name + ": penalty init and rate must be >= 0");
  }
  if (s.cap < s.init) throw ConfigError(name + ": penalty cap below init");
}

}  // namespace

RecipeConfig RecipeConfig::resolved(const ProblemSpec& spec) const {
  RecipeConfig out = *this;
  if (out.levels.empty()) out.levels.push_back(spec.supervised());
  if (out.kind == RecipeKind::VM && out.level_penalties.empty()) {
    out.level_penalties.assign(out.levels.size() - 1, PenaltySchedule{});
  }
  out.validate(spec);
  return out;
}

void RecipeConfig::validate(const ProblemSpec& spec) const {
  check_rate(alpha, "alpha");
  check_rate(beta, "beta");
  check_rate(gamma.base, "gamma");
  check_schedule(unsup_penalty, "unsup penalty");
  for (std::size_t p = 0; p < level_penalties.size(); ++p) {
    check_schedule(level_penalties[p], "level_" + std::to_string(p + 2) + " penalty");
  }
  if (epsilon && !(std::isfinite(*epsilon) && *epsilon >= 0.0)) {
    throw ConfigError("epsilon must be finite and >= 0");
  }
  if (spec.num_supervised() == 0) throw ConfigError("problem has no supervised objectives");

  if (levels.empty()) throw ConfigError("no levels configured");
  const auto sup = spec.supervised();
  const std::set<ObjectiveId> known(sup.begin(), sup.end());
  std::set<ObjectiveId> seen;
  for (std::size_t p = 0; p < levels.size(); ++p) {
    if (levels[p].empty()) throw ConfigError("level_" + std::to_string(p + 1) + " is empty");
    for (const auto& id : levels[p]) {
      if (id.is_unsupervised()) {
        throw ConfigError("the unsupervised objective is implicit below the last level");
      }
      if (!known.contains(id)) throw ConfigError("unknown objective in levels: " + id.name());
      if (!seen.insert(id).second) throw ConfigError("objective listed twice: " + id.name());
    }
  }
  if (seen.size() != known.size()) {
    throw ConfigError("every supervised objective must appear in exactly one level");
  }
  if (kind == RecipeKind::VM) {
    if (level_penalties.size() + 1 != levels.size()) {
      throw ConfigError("vm needs one penalty schedule per level below the first");
    }
  } else if (levels.size() != 1) {
    throw ConfigError(to_string(kind) + " takes a single level");
  }
  if (kind == RecipeKind::StaticWeight) {
    if (!static_weights) throw ConfigError("static_weight needs static_weights");
    if (static_weights->size() != sup.size()) {
      throw ConfigError("static_weights length does not match the supervised objectives");
    }
    double sum = 0.0;
    for (double w : *static_weights) {
      if (!std::isfinite(w) || w < 0.0) throw ConfigError("static_weights must be >= 0");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("static_weights must sum to 1");
  } else if (static_weights) {
    throw ConfigError("static_weights only apply to the static_weight recipe");
  }
  if (pretrain_epochs > 0) {
    if (kind != RecipeKind::TwoStage && kind != RecipeKind::StaticWeight) {
      throw ConfigError("pretrain_epochs only apply to two_stage and static_weight");
    }
    if (!unsup_active(spec)) throw ConfigError("pretraining needs an unsupervised objective");
  }
}

}  // namespace objsoup
