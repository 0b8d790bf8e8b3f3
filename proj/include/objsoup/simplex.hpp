#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace objsoup {

/// A point of the probability simplex: nonnegative entries summing to one.
class SimplexWeights {
 public:
  static constexpr double kSumTolerance = 1e-9;

  // Validates the simplex invariants; throws std::invalid_argument otherwise.
  explicit SimplexWeights(std::vector<double> values);

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  const std::vector<double>& vector() const { return values_; }

  bool operator==(const SimplexWeights&) const = default;

 private:
  std::vector<double> values_;
};

/// Euclidean projection onto the simplex (sort, then threshold).
SimplexWeights project_to_simplex(std::span<const double> v);
SimplexWeights uniform_weights(std::size_t m);

}  // namespace objsoup
