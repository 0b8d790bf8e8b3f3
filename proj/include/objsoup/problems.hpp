#pragma once

// Synthetic objective suites with known geometry, plus batch sampling for
// double-sampled λ updates and a finite-difference gradient oracle.

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "objsoup/param_space.hpp"

namespace objsoup {

/// Convex hull of `vertices`, living in backbone block `block`.
struct ParetoSet {
  BlockId block;
  std::vector<std::vector<double>> vertices;
};

struct ProblemSpec {
  std::string name;
  std::vector<std::pair<BlockId, std::size_t>> backbone_blocks;
  std::vector<std::pair<BlockId, std::size_t>> heads;
  // Supervised objectives in (language, task) order, then the unsupervised one.
  std::vector<ObjectiveId> objectives;
  bool has_unsupervised = false;
  bool stochastic = false;
  std::optional<ParetoSet> known_pareto;
  std::optional<double> unsup_optimum;  // ℓ_u* when known in closed form

  std::vector<ObjectiveId> supervised() const;
  std::vector<std::pair<BlockId, std::size_t>> layout() const;
  std::size_t num_supervised() const;
  // Distinct languages / tasks among the supervised objectives.
  std::size_t num_languages() const;
  std::size_t num_tasks() const;
};

struct SampleBatch {
  enum class Kind { Labeled, Unlabeled };
  Kind kind = Kind::Labeled;
  bool full = true;  // full dataset, no sampling noise
  std::uint64_t seed = 0;
  std::size_t size = 0;

  static SampleBatch full_batch(Kind kind) { return {kind, true, 0, 0}; }
  static SampleBatch sampled(Kind kind, std::uint64_t seed, std::size_t size) {
    return {kind, false, seed, size};
  }
  bool operator==(const SampleBatch&) const = default;
};

/// ξ1, ξ2: independent labeled batches; ζ1, ζ2: independent unlabeled batches.
struct BatchDraw {
  SampleBatch xi1;
  SampleBatch xi2;
  SampleBatch zeta1;
  SampleBatch zeta2;
};

struct ObjectiveEval {
  std::vector<ObjectiveId> objectives;
  std::vector<double> losses;  // aligned with objectives
  GradientMatrix backbone;     // one column per objective
  // ∇_φ for each supervised objective's own head (head blocks only).
  std::map<ObjectiveId, ParamVector> head_grads;
  SampleBatch labeled;
  SampleBatch unlabeled;

  double loss(const ObjectiveId& id) const;
};

class Problem {
 public:
  explicit Problem(ProblemSpec spec) : spec_(std::move(spec)) {}
  virtual ~Problem() = default;

  const ProblemSpec& spec() const { return spec_; }

  virtual ParamVector initial_params(std::uint64_t seed) const = 0;
  virtual ObjectiveEval evaluate(const ParamVector& params, const SampleBatch& labeled,
                                 const SampleBatch& unlabeled) const = 0;
  // Loss values only, aligned with spec().objectives.
  virtual std::vector<double> losses(const ParamVector& params, const SampleBatch& labeled,
                                     const SampleBatch& unlabeled) const = 0;
  // Central differences are exact for quadratics, so those use a large dyadic step.
  virtual double default_fd_step() const { return 1e-5; }

  ObjectiveEval evaluate_full(const ParamVector& params) const;
  std::vector<double> losses_full(const ParamVector& params) const;

 protected:
  void check_params(const ParamVector& params) const;

 private:
  ProblemSpec spec_;
};

/// Deterministic problems (and `force_full`) get full batches everywhere.
BatchDraw sample_batches(const Problem& problem, std::uint64_t sampling_seed,
                         std::size_t iteration, std::size_t batch_size, bool force_full = false);

/// Per-objective gradient over the full layout (backbone + own head, zeros
/// on other heads).
struct FullGradients {
  std::vector<ObjectiveId> objectives;
  std::vector<ParamVector> gradients;
};

FullGradients finite_diff_gradient(const Problem& problem, const ParamVector& params, double h);
FullGradients analytic_gradient(const Problem& problem, const ParamVector& params);

struct GradCheckEntry {
  ObjectiveId objective;
  double max_rel_error = 0.0;  // max |a - f| / max(‖a‖∞, ‖f‖∞)
  BlockId worst_block;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

std::vector<GradCheckEntry> gradient_check(const Problem& problem, const ParamVector& params,
                                           double h);

/// Euclidean distance from the backbone block to the analytic Pareto set.
double pareto_distance(const ProblemSpec& spec, const ParamVector& params);

// ---------------------------------------------------------------------------
// Problem families

/// ℓ_m(θ, φ_m) = s_m/2 ‖θ − c_m‖² + <n_m(ξ), θ> + ½‖φ_m − h_m‖², with n_m zero-mean
/// noise of scale noise_scale/√batch when sampled.
struct QuadraticSoupOptions {
  std::vector<std::vector<double>> centers;
  std::vector<double> scales;  // empty: all ones
  double noise_scale = 0.0;
  std::size_t head_dim = 0;
  std::vector<std::vector<double>> head_targets;  // empty: zeros
  std::optional<std::vector<double>> unsup_center;
  std::optional<std::vector<double>> init;  // empty: init_scale · N(0, I)
  double init_scale = 1.0;
};
std::unique_ptr<Problem> make_quadratic_soup(const QuadraticSoupOptions& options);

/// Two objectives whose backbone gradients are exact negatives on the planted
/// blocks and identical elsewhere, for every θ.
struct ConflictConstructionOptions {
  std::vector<std::size_t> block_dims;
  std::vector<std::size_t> conflict_blocks;
  std::uint64_t seed = 0;
};
std::unique_ptr<Problem> make_conflict_by_construction(const ConflictConstructionOptions& options);

/// Shared feed-forward backbone with per-(language, task) linear heads. Task 0
/// is softmax cross-entropy on synthetic classes, task 1 squared-error
/// regression; the unsupervised proxy reconstructs the input through the
/// backbone and a decoder tied to the transposed backbone weights.
struct ToyNetOptions {
  enum class Activation { Tanh, Linear };
  std::size_t languages = 2;
  std::size_t tasks = 2;
  std::vector<std::size_t> widths = {8, 16, 16, 16, 16};
  std::vector<std::size_t> dataset_sizes = {256};  // one entry, or one per language
  std::size_t unlabeled_size = 512;
  std::size_t classes = 3;
  std::size_t regression_dim = 2;
  Activation activation = Activation::Tanh;
  bool has_unsupervised = true;
  bool identical_languages = false;
  double language_shift = 0.5;
  double label_noise = 0.1;
  double init_scale = 1.0;  // multiplies 1/√fan_in
  std::uint64_t data_seed = 0;
};
std::unique_ptr<Problem> make_toy_multitask_net(const ToyNetOptions& options);

/// Adds `offset` to every analytic gradient entry; a negative control for gradcheck.
std::unique_ptr<Problem> make_corrupted(std::shared_ptr<const Problem> inner, double offset);

}  // namespace objsoup
