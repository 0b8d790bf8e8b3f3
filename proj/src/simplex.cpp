#include "objsoup/simplex.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace objsoup {

SimplexWeights::SimplexWeights(std::vector<double> values) : values_(std::move(values)) {
  if (values_.empty()) throw std::invalid_argument("simplex weights must be non-empty");
  double sum = 0.0;
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("simplex weights must be finite and nonnegative");
    }
    sum += v;
  }
  if (std::abs(sum - 1.0) > kSumTolerance) {
    throw std::invalid_argument("simplex weights sum to " + std::to_string(sum) + ", not 1");
  }
}

SimplexWeights project_to_simplex(std::span<const double> v) {
  const std::size_t m = v.size();
  if (m == 0) throw std::invalid_argument("project_to_simplex: empty vector");
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("project_to_simplex: non-finite input");
  }

  std::vector<double> sorted(v.begin(), v.end());
  std::stable_sort(sorted.begin(), sorted.end(), std::greater<>());

  // Largest k with sorted[k-1] - (prefix_k - 1) / k > 0; the shift is taken
  // from that support size.
  double prefix = 0.0;
  double shift = 0.0;
  for (std::size_t k = 1; k <= m; ++k) {
    prefix += sorted[k - 1];
    const double candidate = (prefix - 1.0) / static_cast<double>(k);
    if (sorted[k - 1] - candidate > 0.0) shift = candidate;
  }

  std::vector<double> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = std::max(v[i] - shift, 0.0);
  return SimplexWeights(std::move(out));
}

SimplexWeights uniform_weights(std::size_t m) {
  if (m == 0) throw std::invalid_argument("uniform_weights: M must be at least 1");
  return SimplexWeights(std::vector<double>(m, 1.0 / static_cast<double>(m)));
}

}  // namespace objsoup
