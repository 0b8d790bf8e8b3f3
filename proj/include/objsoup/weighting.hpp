#pragma once

// Dynamic weighting of objective gradients: the double-sampled λ update on
// the simplex, the conflict-avoidant direction, and the Pareto-stationarity
// measure min_{λ∈Δ} ‖Gλ‖.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>

#include "objsoup/dense_matrix.hpp"
#include "objsoup/param_space.hpp"
#include "objsoup/simplex.hpp"

namespace objsoup {

struct GammaSchedule {
  enum class Kind { Constant, InvSqrt };
  Kind kind = Kind::Constant;
  double base = 0.01;

  // Step size for the (zero-based) iteration: base, or base / sqrt(iteration + 1).
  double at(std::size_t iteration) const;
};

struct WeightState {
  SimplexWeights lambda;
  GammaSchedule gamma;
  std::size_t iteration = 0;
  // Conflicting layers; when set, only these blocks enter the Gram matrix.
  std::optional<std::set<BlockId>> restriction;

  static WeightState initial(std::size_t m, GammaSchedule gamma = {});
};

/// entry (i, j) = <column i of g1, column j of g2> over the restriction.
/// Not symmetric in general: g1 and g2 come from independent samples.
DenseMatrix gram(const GradientMatrix& g1, const GradientMatrix& g2,
                 const std::optional<std::set<BlockId>>& restriction = std::nullopt);

/// λ' = Π_Δ(λ − γ · gram(g1, g2) · λ), iteration advanced by one.
WeightState modo_step(const WeightState& state, const GradientMatrix& g1,
                      const GradientMatrix& g2);

struct Direction {
  ParamVector vector;  // −Σ λ_m g_m over all backbone blocks
  SimplexWeights weights_used;
  std::uint64_t provenance = 0;  // fingerprint of the gradients it was built from
};

std::uint64_t fingerprint(const GradientMatrix& g);
Direction ca_direction(const GradientMatrix& g, const SimplexWeights& lambda);

struct MinNormResult {
  SimplexWeights lambda;
  double norm = 0.0;  // ‖Gλ‖
  std::size_t iterations = 0;
  bool converged = false;
};

/// Projected gradient descent on ½ λᵀQλ over the simplex with step 1/L,
/// L the largest eigenvalue of the PSD matrix Q (power iteration; falls back
/// to trace(Q) when power iteration does not settle). Starts from `start` or
/// uniform weights.
MinNormResult min_norm_weights(const DenseMatrix& q, double tol = 1e-10,
                               std::size_t max_iter = 10000,
                               const std::optional<SimplexWeights>& start = std::nullopt);

/// Closed-form minimiser of ‖w g1 + (1-w) g2‖ over w ∈ [0, 1] given the 2×2 Gram
/// matrix; returns the weight on the first column.
double two_objective_min_norm_weight(const DenseMatrix& q);

/// min_{λ∈Δ} ‖Gλ‖. For two columns the PGD answer is cross-checked against the
/// closed form and the smaller norm is returned.
double stationarity_measure(const GradientMatrix& g, double tol = 1e-10,
                            std::size_t max_iter = 10000);

/// Same, with the minimiser.
MinNormResult pareto_stationarity(const GradientMatrix& g, double tol = 1e-10,
                                  std::size_t max_iter = 10000);

}  // namespace objsoup
