#pragma once

// Gradient-conflict measurement: pairwise cosines of objective gradients,
// globally and per backbone layer, and selection of conflicting layers.

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "objsoup/dense_matrix.hpp"
#include "objsoup/param_space.hpp"

namespace objsoup {

struct Cosine {
  double value = 0.0;
  bool degenerate = false;  // a norm was below 1e-15; value forced to 0
};

inline constexpr double kDegenerateNorm = 1e-15;

Cosine cosine(const ParamVector& a, const ParamVector& b, const BlockFilter& filter = std::nullopt);

/// Symmetric matrix of pairwise cosines with unit diagonal. Needs >= 2 gradients.
DenseMatrix pairwise_matrix(const std::vector<ParamVector>& grads,
                            const BlockFilter& filter = std::nullopt);

/// Running per-objective gradient sums over a warmup window of epochs.
/// Sums are kept per epoch and combined in epoch order, so the result does not
/// depend on the order in which epochs were fed.
class GradientAccumulator {
 public:
  explicit GradientAccumulator(std::size_t window_epochs = 20) : window_(window_epochs) {}

  std::size_t window_epochs() const { return window_; }
  // Ignored (returns false) for epochs outside the window.
  bool add(std::size_t epoch, const GradientMatrix& g);

  bool empty() const { return epochs_.empty(); }
  std::size_t epochs_observed() const {
    return restored_epochs_ > 0 ? restored_epochs_ : epochs_.size();
  }
  std::size_t count() const;
  const std::vector<ObjectiveId>& objectives() const { return objectives_; }

  // Total sums over all observed epochs, one column per objective.
  GradientMatrix total_sums() const;
  GradientMatrix mean_gradients() const;

  // Rebuilds an accumulator from persisted totals (a single synthetic epoch
  // carrying `epochs_observed`).
  static GradientAccumulator from_totals(const GradientMatrix& sums, std::size_t count,
                                         std::size_t epochs_observed, std::size_t window);

 private:
  struct EpochSums {
    std::vector<ParamVector> sums;
    std::size_t count = 0;
  };
  std::size_t window_;
  std::vector<ObjectiveId> objectives_;
  std::map<std::size_t, EpochSums> epochs_;
  std::size_t restored_epochs_ = 0;
};

struct ConflictOptions {
  enum class Mode {
    // mean cosine over the negative pairs P^(l) is negative (P^(l) nonempty)
    NegativePairs,
    // mean cosine over all pairs falls below tau
    AllPairsThreshold,
  };
  Mode mode = Mode::NegativePairs;
  double tau = 0.0;
};

std::string to_string(ConflictOptions::Mode mode);
ConflictOptions::Mode parse_conflict_mode(const std::string& text);

struct ConflictReport {
  std::vector<ObjectiveId> objective_ids;
  DenseMatrix global_cosine;
  std::map<BlockId, DenseMatrix> per_layer_cosine;
  std::map<BlockId, std::set<std::pair<std::size_t, std::size_t>>> conflicting_pairs;
  std::set<BlockId> conflicting_layers;
  std::size_t epochs_observed = 0;
  ConflictOptions options;
};

/// Applies the layer criterion to one cosine matrix; also returns P^(l).
bool is_conflicting_layer(const DenseMatrix& cosines, const ConflictOptions& options,
                          std::set<std::pair<std::size_t, std::size_t>>* negative_pairs = nullptr);

ConflictReport detect_conflicting_layers(const GradientAccumulator& acc,
                                         const ConflictOptions& options = {});
/// Report over a single gradient snapshot.
ConflictReport conflict_report(const GradientMatrix& g, std::size_t epochs_observed,
                               const ConflictOptions& options = {});

/// CSV with header layer,obj_i,obj_j,cosine,conflicting. Rows for every ordered
/// pair i != j; the "global" matrix first, then each layer when per_layer is set.
std::string report_to_csv(const ConflictReport& report, bool per_layer);
std::string report_to_json(const ConflictReport& report);

}  // namespace objsoup
