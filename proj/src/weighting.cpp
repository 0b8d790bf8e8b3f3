#include "objsoup/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include <Eigen/Dense>

#include "objsoup/error.hpp"

namespace objsoup {
namespace {

double quad_form(const DenseMatrix& q, std::span<const double> x) {
  const auto qx = q.multiply(x);
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * qx[i];
  return s;
}

double trace(const DenseMatrix& q) {
  double t = 0.0;
  for (std::size_t i = 0; i < q.rows(); ++i) t += q(i, i);
  return t;
}

// Largest eigenvalue of a PSD matrix, or nullopt if power iteration does not settle.
std::optional<double> power_iteration(const DenseMatrix& q) {
  const std::size_t m = q.rows();
  std::vector<double> v(m);
  // Uneven start so symmetric problems do not begin orthogonal to the top eigenvector.
  for (std::size_t i = 0; i < m; ++i) v[i] = 1.0 + 0.5 * static_cast<double>(i) / static_cast<double>(m);
  double prev = -1.0;
  for (int it = 0; it < 2000; ++it) {
    auto w = q.multiply(v);
    double nrm = 0.0;
    for (double x : w) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm == 0.0 || !std::isfinite(nrm)) return std::nullopt;
    for (std::size_t i = 0; i < m; ++i) v[i] = w[i] / nrm;
    const double rayleigh = quad_form(q, v);
    if (std::abs(rayleigh - prev) <= 1e-13 * std::abs(rayleigh)) return rayleigh;
    prev = rayleigh;
  }
  return std::nullopt;
}

}  // namespace

double GammaSchedule::at(std::size_t iteration) const {
  if (kind == Kind::Constant) return base;
  return base / std::sqrt(static_cast<double>(iteration) + 1.0);
}

WeightState WeightState::initial(std::size_t m, GammaSchedule gamma) {
  if (!(gamma.base > 0.0)) throw std::invalid_argument("gamma must be positive");
  return WeightState{uniform_weights(m), gamma, 0, std::nullopt};
}

DenseMatrix gram(const GradientMatrix& g1, const GradientMatrix& g2,
                 const std::optional<std::set<BlockId>>& restriction) {
  if (g1.objectives() != g2.objectives()) {
    throw StructureError("gram: objective ordering differs between samples");
  }
  const std::size_t m = g1.num_objectives();
  DenseMatrix out(m, m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) out(i, j) = inner(g1.column(i), g2.column(j), restriction);
  }
  return out;
}

WeightState modo_step(const WeightState& state, const GradientMatrix& g1, const GradientMatrix& g2) {
  const std::size_t m = state.lambda.size();
  if (g1.num_objectives() != m) {
    throw StructureError("modo_step: lambda has " + std::to_string(m) + " entries for " +
                         std::to_string(g1.num_objectives()) + " objectives");
  }
  const DenseMatrix a = gram(g1, g2, state.restriction);
  const auto a_lambda = a.multiply(state.lambda.values());
  const double gamma = state.gamma.at(state.iteration);
  std::vector<double> moved(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (!std::isfinite(a_lambda[i])) throw NumericalError("modo_step: non-finite Gram entries");
    moved[i] = state.lambda[i] - gamma * a_lambda[i];
  }
  WeightState next = state;
  next.lambda = project_to_simplex(moved);
  next.iteration = state.iteration + 1;
  return next;
}

std::uint64_t fingerprint(const GradientMatrix& g) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& col : g.columns()) {
    for (const auto& [id, v] : col.blocks()) {
      for (double x : v) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        for (int b = 0; b < 8; ++b) {
          h ^= (bits >> (8 * b)) & 0xffU;
          h *= 1099511628211ULL;
        }
      }
    }
  }
  return h;
}

Direction ca_direction(const GradientMatrix& g, const SimplexWeights& lambda) {
  ParamVector v = combine(g, lambda);
  for (const auto& [id, block] : v.blocks()) {
    auto out = v.block(id);
    for (double& x : out) x = -x;
  }
  return Direction{std::move(v), lambda, fingerprint(g)};
}

double two_objective_min_norm_weight(const DenseMatrix& q) {
  if (q.rows() != 2 || q.cols() != 2) throw std::invalid_argument("expected a 2x2 Gram matrix");
  // ‖w g1 + (1-w) g2‖² minimised at w = <g2 - g1, g2> / ‖g1 - g2‖².
  const double denom = q(0, 0) - q(0, 1) - q(1, 0) + q(1, 1);
  if (!(denom > 0.0)) return 0.5;
  const double w = (q(1, 1) - q(0, 1)) / denom;
  return std::clamp(w, 0.0, 1.0);
}

namespace {

constexpr std::size_t kPolishEvery = 50;

// Equality-constrained minimiser of ½ μᵀQμ on the support of `lambda`
// (Σ μ = 1, μ = 0 off the support), returned only if it is feasible and
// satisfies the KKT conditions of the full simplex problem. PGD identifies the
// support quickly but converges slowly on ill-conditioned Q; this finishes it.
std::optional<SimplexWeights> solve_on_support(const DenseMatrix& q, const SimplexWeights& lambda,
                                               double tol) {
  const std::size_t m = q.rows();
  std::vector<std::size_t> support;
  for (std::size_t i = 0; i < m; ++i) {
    if (lambda[i] > 0.0) support.push_back(i);
  }
  const auto k = static_cast<Eigen::Index>(support.size());
  Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(k + 1, k + 1);
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
  for (Eigen::Index a = 0; a < k; ++a) {
    for (Eigen::Index b = 0; b < k; ++b) kkt(a, b) = q(support[a], support[b]);
    kkt(a, k) = 1.0;
    kkt(k, a) = 1.0;
  }
  rhs(k) = 1.0;
  const Eigen::VectorXd sol = kkt.completeOrthogonalDecomposition().solve(rhs);
  std::vector<double> mu(m, 0.0);
  double sum = 0.0;
  for (Eigen::Index a = 0; a < k; ++a) {
    const double v = sol(a);
    if (!std::isfinite(v) || v < -1e-12) return std::nullopt;
    mu[support[a]] = std::max(0.0, v);
    sum += mu[support[a]];
  }
  if (!(sum > 0.0)) return std::nullopt;
  for (double& v : mu) v /= sum;

  const auto grad = q.multiply(mu);
  double value = 0.0;
  for (std::size_t i = 0; i < m; ++i) value += mu[i] * grad[i];
  const double scale = std::max(1.0, trace(q));
  for (std::size_t i = 0; i < m; ++i) {
    if (grad[i] < value - std::max(tol, 1e-12) * scale) return std::nullopt;
  }
  try {
    return SimplexWeights(std::move(mu));
  } catch (const std::invalid_argument&) {
    return std::nullopt;
  }
}

}  // namespace

MinNormResult min_norm_weights(const DenseMatrix& q, double tol, std::size_t max_iter,
                               const std::optional<SimplexWeights>& start) {
  const std::size_t m = q.rows();
  if (m == 0 || q.cols() != m) throw std::invalid_argument("min_norm_weights: need square Q");
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      if (!std::isfinite(q(i, j))) throw NumericalError("min_norm_weights: non-finite Gram");
    }
  }
  SimplexWeights lambda = start ? *start : uniform_weights(m);
  if (lambda.size() != m) throw std::invalid_argument("min_norm_weights: start has wrong size");

  const double tr = trace(q);
  if (m == 1 || tr == 0.0) {
    return {lambda, std::sqrt(std::max(0.0, quad_form(q, lambda.values()))), 0, true};
  }
  double lipschitz = power_iteration(q).value_or(tr);
  if (!(lipschitz > 0.0)) lipschitz = tr;

  double f = 0.5 * quad_form(q, lambda.values());
  std::size_t it = 0;
  bool converged = false;
  std::vector<double> moved(m);
  while (it < max_iter) {
    const auto grad = q.multiply(lambda.values());
    for (std::size_t i = 0; i < m; ++i) moved[i] = lambda[i] - grad[i] / lipschitz;
    SimplexWeights next = project_to_simplex(moved);
    const double f_next = 0.5 * quad_form(q, next.values());
    if (f_next > f + 1e-15 * std::max(1.0, std::abs(f)) && lipschitz < tr) {
      // Power iteration underestimated the curvature; trace(Q) bounds it.
      lipschitz = tr;
      continue;
    }
    double change = 0.0;
    for (std::size_t i = 0; i < m; ++i) change = std::max(change, std::abs(next[i] - lambda[i]));
    lambda = std::move(next);
    f = f_next;
    ++it;
    if (change < tol) {
      converged = true;
      break;
    }
    if (it % kPolishEvery == 0) {
      if (auto exact = solve_on_support(q, lambda, tol)) {
        const double f_exact = 0.5 * quad_form(q, exact->values());
        if (f_exact <= f) {
          lambda = std::move(*exact);
          f = f_exact;
          converged = true;
          break;
        }
      }
    }
  }
  return {lambda, std::sqrt(std::max(0.0, 2.0 * f)), it, converged};
}

MinNormResult pareto_stationarity(const GradientMatrix& g, double tol, std::size_t max_iter) {
  if (g.num_objectives() == 0) throw std::invalid_argument("stationarity: no objectives");
  for (const auto& col : g.columns()) {
    if (!col.all_finite()) throw NumericalError("stationarity: non-finite gradient");
  }
  const DenseMatrix q = gram(g, g);
  MinNormResult result = min_norm_weights(q, tol, max_iter);
  result.norm = norm(combine(g, result.lambda));
  if (g.num_objectives() == 2) {
    const double w = two_objective_min_norm_weight(q);
    SimplexWeights closed({w, 1.0 - w});
    const double closed_norm = norm(combine(g, closed));
    if (closed_norm < result.norm) {
      result.lambda = closed;
      result.norm = closed_norm;
    }
  }
  return result;
}

double stationarity_measure(const GradientMatrix& g, double tol, std::size_t max_iter) {
  return pareto_stationarity(g, tol, max_iter).norm;
}

}  // namespace objsoup
