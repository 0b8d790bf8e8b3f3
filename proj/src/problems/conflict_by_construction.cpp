#include <algorithm>
#include <set>

#include "objsoup/error.hpp"
#include "objsoup/problems.hpp"
#include "objsoup/rng.hpp"

namespace objsoup {
namespace {

// Planted blocks: ℓ_1 = <a_b, θ_b>, ℓ_2 = −<a_b, θ_b>. Other blocks: both
// objectives share ½‖θ_b − c_b‖².
class ConflictByConstruction final : public Problem {
 public:
  ConflictByConstruction(ProblemSpec spec, std::set<std::size_t> planted,
                         std::vector<std::vector<double>> offsets)
      : Problem(std::move(spec)), planted_(std::move(planted)), offsets_(std::move(offsets)) {}

  ParamVector initial_params(std::uint64_t seed) const override {
    ParamVector p = ParamVector::zeros(spec().layout());
    Rng rng(seed);
    std::normal_distribution<double> normal;
    for (const auto& [id, dim] : spec().backbone_blocks) {
      for (double& x : p.block(id)) x = normal(rng);
    }
    return p;
  }

  ObjectiveEval evaluate(const ParamVector& params, const SampleBatch& labeled,
                         const SampleBatch& unlabeled) const override {
    check_params(params);
    ObjectiveEval eval;
    eval.objectives = spec().objectives;
    eval.labeled = labeled;
    eval.unlabeled = unlabeled;
    ParamVector g1 = params.backbone_part();
    ParamVector g2 = params.backbone_part();
    double loss1 = 0.0;
    double loss2 = 0.0;
    for (std::size_t b = 0; b < offsets_.size(); ++b) {
      const BlockId id = BlockId::backbone(static_cast<std::uint32_t>(b));
      const auto theta = params.block(id);
      auto d1 = g1.block(id);
      auto d2 = g2.block(id);
      const auto& v = offsets_[b];
      if (planted_.contains(b)) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
          loss1 += v[i] * theta[i];
          loss2 -= v[i] * theta[i];
          d1[i] = v[i];
          d2[i] = -v[i];
        }
      } else {
        for (std::size_t i = 0; i < theta.size(); ++i) {
          const double r = theta[i] - v[i];
          loss1 += 0.5 * r * r;
          loss2 += 0.5 * r * r;
          d1[i] = r;
          d2[i] = r;
        }
      }
    }
    eval.losses = {loss1, loss2};
    for (const auto& id : spec().objectives) {
      eval.head_grads.emplace(id, ParamVector(ParamVector::Storage{{id.head_block(), std::vector<double>{}}}));
    }
    eval.backbone = GradientMatrix(eval.objectives, {std::move(g1), std::move(g2)});
    return eval;
  }

  std::vector<double> losses(const ParamVector& params, const SampleBatch& labeled,
                             const SampleBatch& unlabeled) const override {
    return evaluate(params, labeled, unlabeled).losses;
  }

  double default_fd_step() const override { return 0.5; }

 private:
  std::set<std::size_t> planted_;
  std::vector<std::vector<double>> offsets_;
};

}  // namespace

std::unique_ptr<Problem> make_conflict_by_construction(const ConflictConstructionOptions& options) {
  if (options.block_dims.empty()) throw ConfigError("conflict_by_construction: empty block list");
  std::set<std::size_t> planted;
  for (std::size_t b : options.conflict_blocks) {
    if (b >= options.block_dims.size()) {
      throw ConfigError("conflict_by_construction: planted block " + std::to_string(b) +
                        " is not declared");
    }
    planted.insert(b);
  }
  ProblemSpec spec;
  spec.name = "conflict_by_construction";
  Rng rng(derive_seed(options.seed, "offsets"));
  std::normal_distribution<double> normal;
  std::vector<std::vector<double>> offsets;
  for (std::size_t b = 0; b < options.block_dims.size(); ++b) {
    if (options.block_dims[b] == 0) throw ConfigError("conflict_by_construction: zero-size block");
    spec.backbone_blocks.emplace_back(BlockId::backbone(static_cast<std::uint32_t>(b)),
                                      options.block_dims[b]);
    std::vector<double> v(options.block_dims[b]);
    for (double& x : v) x = normal(rng);
    offsets.push_back(std::move(v));
  }
  for (std::uint32_t m = 0; m < 2; ++m) {
    const auto id = ObjectiveId::supervised(m, 0);
    spec.objectives.push_back(id);
    spec.heads.emplace_back(id.head_block(), 0);
  }
  return std::make_unique<ConflictByConstruction>(std::move(spec), std::move(planted),
                                                  std::move(offsets));
}

}  // namespace objsoup
