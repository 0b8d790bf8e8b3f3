#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "objsoup/error.hpp"
#include "objsoup/problems.hpp"
#include "objsoup/rng.hpp"
#include "objsoup/weighting.hpp"

namespace objsoup {

std::vector<ObjectiveId> ProblemSpec::supervised() const {
  std::vector<ObjectiveId> out;
  for (const auto& o : objectives) {
    if (o.is_supervised()) out.push_back(o);
  }
  return out;
}

std::vector<std::pair<BlockId, std::size_t>> ProblemSpec::layout() const {
  auto out = backbone_blocks;
  out.insert(out.end(), heads.begin(), heads.end());
  return out;
}

std::size_t ProblemSpec::num_supervised() const { return supervised().size(); }

std::size_t ProblemSpec::num_languages() const {
  std::set<std::uint32_t> langs;
  for (const auto& o : supervised()) langs.insert(o.language);
  return langs.size();
}

std::size_t ProblemSpec::num_tasks() const {
  std::set<std::uint32_t> tasks;
  for (const auto& o : supervised()) tasks.insert(o.task);
  return tasks.size();
}

double ObjectiveEval::loss(const ObjectiveId& id) const {
  for (std::size_t m = 0; m < objectives.size(); ++m) {
    if (objectives[m] == id) return losses[m];
  }
  throw StructureError("ObjectiveEval: no loss for " + id.name());
}

ObjectiveEval Problem::evaluate_full(const ParamVector& params) const {
  return evaluate(params, SampleBatch::full_batch(SampleBatch::Kind::Labeled),
                  SampleBatch::full_batch(SampleBatch::Kind::Unlabeled));
}

std::vector<double> Problem::losses_full(const ParamVector& params) const {
  return losses(params, SampleBatch::full_batch(SampleBatch::Kind::Labeled),
                SampleBatch::full_batch(SampleBatch::Kind::Unlabeled));
}

void Problem::check_params(const ParamVector& params) const {
  const auto expected = spec_.layout();
  auto sorted = expected;
  std::sort(sorted.begin(), sorted.end());
  if (params.layout() != sorted) {
    throw StructureError(spec_.name + ": parameter layout does not match the problem");
  }
}

BatchDraw sample_batches(const Problem& problem, std::uint64_t sampling_seed,
                         std::size_t iteration, std::size_t batch_size, bool force_full) {
  using Kind = SampleBatch::Kind;
  if (!problem.spec().stochastic || force_full) {
    return {SampleBatch::full_batch(Kind::Labeled), SampleBatch::full_batch(Kind::Labeled),
            SampleBatch::full_batch(Kind::Unlabeled), SampleBatch::full_batch(Kind::Unlabeled)};
  }
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  const auto stream = [&](std::uint64_t slot) {
    return derive_seed(sampling_seed, {static_cast<std::uint64_t>(iteration), slot});
  };
  return {SampleBatch::sampled(Kind::Labeled, stream(1), batch_size),
          SampleBatch::sampled(Kind::Labeled, stream(2), batch_size),
          SampleBatch::sampled(Kind::Unlabeled, stream(3), batch_size),
          SampleBatch::sampled(Kind::Unlabeled, stream(4), batch_size)};
}

FullGradients finite_diff_gradient(const Problem& problem, const ParamVector& params, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite differences need h > 0");
  const auto& objectives = problem.spec().objectives;
  FullGradients out{objectives, {}};
  for (std::size_t m = 0; m < objectives.size(); ++m) {
    out.gradients.push_back(ParamVector::zeros_like(params));
  }
  ParamVector probe = params;
  for (const auto& [id, values] : params.blocks()) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      auto slot = probe.block(id);
      const double original = slot[i];
      slot[i] = original + h;
      const auto plus = problem.losses_full(probe);
      slot[i] = original - h;
      const auto minus = problem.losses_full(probe);
      slot[i] = original;
      for (std::size_t m = 0; m < objectives.size(); ++m) {
        out.gradients[m].block(id)[i] = (plus[m] - minus[m]) / (2.0 * h);
      }
    }
  }
  return out;
}

FullGradients analytic_gradient(const Problem& problem, const ParamVector& params) {
  const ObjectiveEval eval = problem.evaluate_full(params);
  FullGradients out{eval.objectives, {}};
  for (std::size_t m = 0; m < eval.objectives.size(); ++m) {
    ParamVector full = ParamVector::zeros_like(params);
    for (const auto& [id, v] : eval.backbone.column(m).blocks()) {
      std::copy(v.begin(), v.end(), full.block(id).begin());
    }
    if (auto it = eval.head_grads.find(eval.objectives[m]); it != eval.head_grads.end()) {
      for (const auto& [id, v] : it->second.blocks()) {
        std::copy(v.begin(), v.end(), full.block(id).begin());
      }
    }
    out.gradients.push_back(std::move(full));
  }
  return out;
}

std::vector<GradCheckEntry> gradient_check(const Problem& problem, const ParamVector& params,
                                           double h) {
  const FullGradients analytic = analytic_gradient(problem, params);
  const FullGradients numeric = finite_diff_gradient(problem, params, h);
  std::vector<GradCheckEntry> out;
  for (std::size_t m = 0; m < analytic.objectives.size(); ++m) {
    GradCheckEntry e;
    e.objective = analytic.objectives[m];
    double scale = 0.0;
    double worst = -1.0;
    for (const auto& [id, a] : analytic.gradients[m].blocks()) {
      const auto f = numeric.gradients[m].block(id);
      for (std::size_t i = 0; i < a.size(); ++i) {
        scale = std::max({scale, std::abs(a[i]), std::abs(f[i])});
        const double diff = std::abs(a[i] - f[i]);
        if (diff > worst || std::isnan(diff)) {
          worst = std::isnan(diff) ? INFINITY : diff;
          e.worst_block = id;
          e.worst_index = i;
          e.analytic = a[i];
          e.numeric = f[i];
        }
      }
    }
    e.max_rel_error = scale > 0.0 ? std::max(worst, 0.0) / scale : std::max(worst, 0.0);
    out.push_back(e);
  }
  return out;
}

double pareto_distance(const ProblemSpec& spec, const ParamVector& params) {
  if (!spec.known_pareto) {
    throw std::invalid_argument(spec.name + ": no analytic Pareto set");
  }
  const auto& set = *spec.known_pareto;
  const auto theta = params.block(set.block);
  const std::size_t k = set.vertices.size();
  const std::size_t dim = theta.size();

  const auto dist_to = [&](const std::vector<double>& p) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) s += (theta[i] - p[i]) * (theta[i] - p[i]);
    return std::sqrt(s);
  };
  if (k == 1) return dist_to(set.vertices[0]);
  if (k == 2) {
    const auto& a = set.vertices[0];
    const auto& b = set.vertices[1];
    double ab2 = 0.0;
    double t = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
      ab2 += (b[i] - a[i]) * (b[i] - a[i]);
      t += (theta[i] - a[i]) * (b[i] - a[i]);
    }
    t = ab2 > 0.0 ? std::clamp(t / ab2, 0.0, 1.0) : 0.0;
    std::vector<double> p(dim);
    for (std::size_t i = 0; i < dim; ++i) p[i] = a[i] + t * (b[i] - a[i]);
    return dist_to(p);
  }
  // Hull: min over λ ∈ Δ of ‖Σ λ_m (v_m − θ)‖.
  std::vector<ObjectiveId> ids;
  std::vector<ParamVector> cols;
  for (std::size_t m = 0; m < k; ++m) {
    std::vector<double> d(dim);
    for (std::size_t i = 0; i < dim; ++i) d[i] = set.vertices[m][i] - theta[i];
    ids.push_back(ObjectiveId::supervised(static_cast<std::uint32_t>(m), 0));
    cols.push_back(ParamVector({{set.block, std::move(d)}}));
  }
  return stationarity_measure(GradientMatrix(std::move(ids), std::move(cols)), 1e-14, 100000);
}

namespace {

class CorruptedProblem final : public Problem {
 public:
  CorruptedProblem(std::shared_ptr<const Problem> inner, double offset)
      : Problem(inner->spec()), inner_(std::move(inner)), offset_(offset) {}

  ParamVector initial_params(std::uint64_t seed) const override {
    return inner_->initial_params(seed);
  }

  ObjectiveEval evaluate(const ParamVector& params, const SampleBatch& labeled,
                         const SampleBatch& unlabeled) const override {
    ObjectiveEval eval = inner_->evaluate(params, labeled, unlabeled);
    std::vector<ParamVector> cols = eval.backbone.columns();
    for (auto& col : cols) {
      for (const auto& [id, v] : col.blocks()) {
        for (double& x : col.block(id)) x += offset_;
      }
    }
    eval.backbone = GradientMatrix(eval.objectives, std::move(cols));
    return eval;
  }

  std::vector<double> losses(const ParamVector& params, const SampleBatch& labeled,
                             const SampleBatch& unlabeled) const override {
    return inner_->losses(params, labeled, unlabeled);
  }

  double default_fd_step() const override { return inner_->default_fd_step(); }

 private:
  std::shared_ptr<const Problem> inner_;
  double offset_;
};

}  // namespace

std::unique_ptr<Problem> make_corrupted(std::shared_ptr<const Problem> inner, double offset) {
  return std::make_unique<CorruptedProblem>(std::move(inner), offset);
}

}  // namespace objsoup
