#include "objsoup/conflict.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "objsoup/error.hpp"
#include "objsoup/kernels.hpp"

namespace objsoup {
namespace {

std::string format_double(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

}  // namespace

Cosine cosine(const ParamVector& a, const ParamVector& b, const BlockFilter& filter) {
  const double ab = inner(a, b, filter);
  const double na = std::sqrt(inner(a, a, filter));
  const double nb = std::sqrt(inner(b, b, filter));
  if (na < kDegenerateNorm || nb < kDegenerateNorm) return {0.0, true};
  return {std::clamp(ab / (na * nb), -1.0, 1.0), false};
}

DenseMatrix pairwise_matrix(const std::vector<ParamVector>& grads, const BlockFilter& filter) {
  const std::size_t m = grads.size();
  if (m < 2) throw std::invalid_argument("pairwise_matrix: need at least two gradients");
  DenseMatrix out = DenseMatrix::identity(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double c = cosine(grads[i], grads[j], filter).value;
      out(i, j) = c;
      out(j, i) = c;
    }
  }
  return out;
}

bool GradientAccumulator::add(std::size_t epoch, const GradientMatrix& g) {
  if (epoch >= window_) return false;
  if (objectives_.empty() && epochs_.empty()) {
    objectives_ = g.objectives();
  } else if (g.objectives() != objectives_) {
    throw StructureError("GradientAccumulator: objective ordering changed");
  }
  auto& slot = epochs_[epoch];
  if (slot.sums.empty()) {
    slot.sums.reserve(g.num_objectives());
    for (const auto& col : g.columns()) slot.sums.push_back(ParamVector::zeros_like(col));
  }
  for (std::size_t m = 0; m < g.num_objectives(); ++m) {
    if (!slot.sums[m].same_structure(g.column(m))) {
      throw StructureError("GradientAccumulator: block structure changed");
    }
    for (const auto& [id, v] : g.column(m).blocks()) kernels::axpy(1.0, v, slot.sums[m].block(id));
  }
  ++slot.count;
  return true;
}

std::size_t GradientAccumulator::count() const {
  std::size_t n = 0;
  for (const auto& [e, s] : epochs_) n += s.count;
  return n;
}

GradientMatrix GradientAccumulator::total_sums() const {
  if (epochs_.empty()) throw std::logic_error("GradientAccumulator: no gradients accumulated");
  std::vector<ParamVector> totals;
  for (const auto& col : epochs_.begin()->second.sums) totals.push_back(ParamVector::zeros_like(col));
  for (const auto& [e, slot] : epochs_) {
    for (std::size_t m = 0; m < totals.size(); ++m) {
      for (const auto& [id, v] : slot.sums[m].blocks()) kernels::axpy(1.0, v, totals[m].block(id));
    }
  }
  return GradientMatrix(objectives_, std::move(totals));
}

GradientMatrix GradientAccumulator::mean_gradients() const {
  GradientMatrix sums = total_sums();
  const double inv = 1.0 / static_cast<double>(count());
  std::vector<ParamVector> means = sums.columns();
  for (auto& col : means) {
    for (const auto& [id, v] : col.blocks()) kernels::scale(inv, col.block(id));
  }
  return GradientMatrix(objectives_, std::move(means));
}

GradientAccumulator GradientAccumulator::from_totals(const GradientMatrix& sums, std::size_t count,
                                                     std::size_t epochs_observed,
                                                     std::size_t window) {
  if (count == 0) throw std::invalid_argument("GradientAccumulator: count must be positive");
  GradientAccumulator acc(window);
  acc.objectives_ = sums.objectives();
  EpochSums slot;
  slot.sums = sums.columns();
  slot.count = count;
  acc.epochs_.emplace(0, std::move(slot));
  acc.restored_epochs_ = epochs_observed;
  return acc;
}

std::string to_string(ConflictOptions::Mode mode) {
  return mode == ConflictOptions::Mode::NegativePairs ? "negative_pairs" : "all_pairs_threshold";
}

ConflictOptions::Mode parse_conflict_mode(const std::string& text) {
  if (text == "negative_pairs") return ConflictOptions::Mode::NegativePairs;
  if (text == "all_pairs_threshold") return ConflictOptions::Mode::AllPairsThreshold;
  throw ConfigError("unknown conflict mode '" + text + "'");
}

bool is_conflicting_layer(const DenseMatrix& cosines, const ConflictOptions& options,
                          std::set<std::pair<std::size_t, std::size_t>>* negative_pairs) {
  const std::size_t m = cosines.rows();
  double negative_sum = 0.0;
  double all_sum = 0.0;
  std::size_t negatives = 0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double c = cosines(i, j);
      all_sum += c;
      ++pairs;
      if (c < 0.0) {
        negative_sum += c;
        ++negatives;
        if (negative_pairs != nullptr) negative_pairs->emplace(i, j);
      }
    }
  }
  if (options.mode == ConflictOptions::Mode::NegativePairs) {
    return negatives > 0 && negative_sum / static_cast<double>(negatives) < 0.0;
  }
  return pairs > 0 && all_sum / static_cast<double>(pairs) < options.tau;
}

ConflictReport conflict_report(const GradientMatrix& g, std::size_t epochs_observed,
                               const ConflictOptions& options) {
  if (g.num_objectives() < 2) {
    throw std::invalid_argument("conflict report needs at least two objectives");
  }
  ConflictReport report;
  report.objective_ids = g.objectives();
  report.options = options;
  report.epochs_observed = epochs_observed;
  report.global_cosine = pairwise_matrix(g.columns());
  for (const auto& [id, dim] : g.layout()) {
    const BlockFilter only = std::set<BlockId>{id};
    DenseMatrix c = pairwise_matrix(g.columns(), only);
    std::set<std::pair<std::size_t, std::size_t>> negatives;
    if (is_conflicting_layer(c, options, &negatives)) report.conflicting_layers.insert(id);
    report.conflicting_pairs.emplace(id, std::move(negatives));
    report.per_layer_cosine.emplace(id, std::move(c));
  }
  return report;
}

ConflictReport detect_conflicting_layers(const GradientAccumulator& acc,
                                         const ConflictOptions& options) {
  if (acc.empty()) throw std::invalid_argument("detect_conflicting_layers: empty accumulator");
  return conflict_report(acc.mean_gradients(), acc.epochs_observed(), options);
}

std::string report_to_csv(const ConflictReport& report, bool per_layer) {
  std::ostringstream os;
  os << "layer,obj_i,obj_j,cosine,conflicting\n";
  const auto emit = [&](const std::string& layer, const DenseMatrix& c) {
    for (std::size_t i = 0; i < c.rows(); ++i) {
      for (std::size_t j = 0; j < c.cols(); ++j) {
        if (i == j) continue;
        os << layer << ',' << report.objective_ids[i].name() << ','
           << report.objective_ids[j].name() << ',' << format_double(c(i, j)) << ','
           << (c(i, j) < 0.0 ? 1 : 0) << '\n';
      }
    }
  };
  emit("global", report.global_cosine);
  if (per_layer) {
    for (const auto& [id, c] : report.per_layer_cosine) emit(id.name(), c);
  }
  return os.str();
}

std::string report_to_json(const ConflictReport& report) {
  using nlohmann::ordered_json;
  const auto matrix = [](const DenseMatrix& c) {
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < c.rows(); ++i) {
      rows.push_back(std::vector<double>(c.row(i).begin(), c.row(i).end()));
    }
    return rows;
  };
  ordered_json j;
  ordered_json ids = ordered_json::array();
  for (const auto& o : report.objective_ids) ids.push_back(o.name());
  j["objective_ids"] = ids;
  j["mode"] = to_string(report.options.mode);
  j["tau"] = report.options.tau;
  j["epochs_observed"] = report.epochs_observed;
  j["global_cosine"] = matrix(report.global_cosine);
  ordered_json layers = ordered_json::object();
  for (const auto& [id, c] : report.per_layer_cosine) layers[id.name()] = matrix(c);
  j["per_layer_cosine"] = layers;
  ordered_json pairs = ordered_json::object();
  for (const auto& [id, set] : report.conflicting_pairs) {
    ordered_json list = ordered_json::array();
    for (const auto& [a, b] : set) list.push_back({a, b});
    pairs[id.name()] = list;
  }
  j["conflicting_pairs"] = pairs;
  ordered_json conflicting = ordered_json::array();
  for (const auto& id : report.conflicting_layers) conflicting.push_back(id.name());
  j["conflicting_layers"] = conflicting;
  return j.dump(2);
}

}  // namespace objsoup
