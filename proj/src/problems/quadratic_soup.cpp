#include <cmath>
#include <set>

#include "objsoup/error.hpp"
#include "objsoup/problems.hpp"
#include "objsoup/rng.hpp"

namespace objsoup {
namespace {

const BlockId kTheta = BlockId::backbone(0);

class QuadraticSoup final : public Problem {
 public:
  QuadraticSoup(ProblemSpec spec, QuadraticSoupOptions options)
      : Problem(std::move(spec)), o_(std::move(options)) {}

  ParamVector initial_params(std::uint64_t seed) const override {
    ParamVector p = ParamVector::zeros(spec().layout());
    auto theta = p.block(kTheta);
    if (o_.init) {
      std::copy(o_.init->begin(), o_.init->end(), theta.begin());
    } else {
      Rng rng(seed);
      std::normal_distribution<double> normal;
      for (double& x : theta) x = o_.init_scale * normal(rng);
    }
    return p;
  }

  ObjectiveEval evaluate(const ParamVector& params, const SampleBatch& labeled,
                         const SampleBatch& unlabeled) const override {
    check_params(params);
    const auto theta = params.block(kTheta);
    const std::size_t dim = theta.size();
    ObjectiveEval eval;
    eval.objectives = spec().objectives;
    eval.labeled = labeled;
    eval.unlabeled = unlabeled;
    std::vector<ParamVector> cols;

    for (std::size_t m = 0; m < o_.centers.size(); ++m) {
      const auto noise = noise_for(labeled, m, dim);
      std::vector<double> g(dim);
      double loss = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double r = theta[i] - o_.centers[m][i];
        loss += 0.5 * scale(m) * r * r + noise[i] * theta[i];
        g[i] = scale(m) * r + noise[i];
      }
      const ObjectiveId id = spec().objectives[m];
      if (o_.head_dim > 0) {
        const auto phi = params.block(id.head_block());
        std::vector<double> gh(o_.head_dim);
        for (std::size_t i = 0; i < o_.head_dim; ++i) {
          const double r = phi[i] - head_target(m, i);
          loss += 0.5 * r * r;
          gh[i] = r;
        }
        eval.head_grads.emplace(id, ParamVector(ParamVector::Storage{{id.head_block(), std::move(gh)}}));
      } else {
        eval.head_grads.emplace(id, ParamVector(ParamVector::Storage{{id.head_block(), std::vector<double>{}}}));
      }
      eval.losses.push_back(loss);
      cols.push_back(ParamVector({{kTheta, std::move(g)}}));
    }
    if (o_.unsup_center) {
      const auto noise = noise_for(unlabeled, o_.centers.size(), dim);
      std::vector<double> g(dim);
      double loss = 0.0;
      for (std::size_t i = 0; i < dim; ++i) {
        const double r = theta[i] - (*o_.unsup_center)[i];
        loss += 0.5 * r * r + noise[i] * theta[i];
        g[i] = r + noise[i];
      }
      eval.losses.push_back(loss);
      cols.push_back(ParamVector({{kTheta, std::move(g)}}));
    }
    eval.backbone = GradientMatrix(eval.objectives, std::move(cols));
    return eval;
  }

  std::vector<double> losses(const ParamVector& params, const SampleBatch& labeled,
                             const SampleBatch& unlabeled) const override {
    return evaluate(params, labeled, unlabeled).losses;
  }

  double default_fd_step() const override { return 0.5; }

 private:
  double scale(std::size_t m) const { return o_.scales.empty() ? 1.0 : o_.scales[m]; }

  double head_target(std::size_t m, std::size_t i) const {
    return o_.head_targets.empty() ? 0.0 : o_.head_targets[m][i];
  }

  std::vector<double> noise_for(const SampleBatch& batch, std::size_t slot, std::size_t dim) const {
    std::vector<double> n(dim, 0.0);
    if (batch.full || o_.noise_scale == 0.0) return n;
    Rng rng(derive_seed(batch.seed, {static_cast<std::uint64_t>(slot)}));
    std::normal_distribution<double> normal;
    const double s = o_.noise_scale / std::sqrt(static_cast<double>(batch.size));
    for (double& x : n) x = s * normal(rng);
    return n;
  }

  QuadraticSoupOptions o_;
};

}  // namespace

std::unique_ptr<Problem> make_quadratic_soup(const QuadraticSoupOptions& options) {
  const std::size_t m = options.centers.size();
  if (m == 0) throw ConfigError("quadratic_soup: need at least one center");
  const std::size_t dim = options.centers.front().size();
  if (dim == 0) throw ConfigError("quadratic_soup: centers must have positive dimension");
  std::set<std::vector<double>> distinct;
  for (const auto& c : options.centers) {
    if (c.size() != dim) throw ConfigError("quadratic_soup: centers differ in dimension");
    for (double x : c) {
      if (!std::isfinite(x)) throw ConfigError("quadratic_soup: non-finite center");
    }
    if (!distinct.insert(c).second) throw ConfigError("quadratic_soup: duplicate centers");
  }
  if (!options.scales.empty()) {
    if (options.scales.size() != m) throw ConfigError("quadratic_soup: one scale per center");
    for (double s : options.scales) {
      if (!(s > 0.0)) throw ConfigError("quadratic_soup: scales must be positive");
    }
  }
  if (options.noise_scale < 0.0) throw ConfigError("quadratic_soup: noise_scale must be >= 0");
  if (!options.head_targets.empty()) {
    if (options.head_targets.size() != m) throw ConfigError("quadratic_soup: one head target per center");
    for (const auto& t : options.head_targets) {
      if (t.size() != options.head_dim) throw ConfigError("quadratic_soup: head target dimension");
    }
  }
  if (options.unsup_center && options.unsup_center->size() != dim) {
    throw ConfigError("quadratic_soup: unsup_center dimension");
  }
  if (options.init && options.init->size() != dim) throw ConfigError("quadratic_soup: init dimension");

  ProblemSpec spec;
  spec.name = "quadratic_soup";
  spec.backbone_blocks = {{kTheta, dim}};
  for (std::size_t i = 0; i < m; ++i) {
    const auto id = ObjectiveId::supervised(static_cast<std::uint32_t>(i), 0);
    spec.objectives.push_back(id);
    spec.heads.emplace_back(id.head_block(), options.head_dim);
  }
  if (options.unsup_center) {
    spec.objectives.push_back(ObjectiveId::unsupervised());
    spec.has_unsupervised = true;
    spec.unsup_optimum = 0.0;
  }
  spec.stochastic = options.noise_scale > 0.0;
  spec.known_pareto = ParetoSet{kTheta, options.centers};
  return std::make_unique<QuadraticSoup>(std::move(spec), options);
}

}  // namespace objsoup
