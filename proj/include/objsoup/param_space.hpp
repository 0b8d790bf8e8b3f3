#pragma once

// Partitioned parameter vectors: backbone blocks ("layers") shared by all
// objectives plus one private head block per supervised (language, task).

#include <compare>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace objsoup {

struct BlockId {
  enum class Kind : std::uint8_t { Backbone = 0, Head = 1 };

  Kind kind = Kind::Backbone;
  std::uint32_t index = 0;     // backbone ordinal
  std::uint32_t language = 0;  // head only
  std::uint32_t task = 0;      // head only

  static BlockId backbone(std::uint32_t index) { return {Kind::Backbone, index, 0, 0}; }
  static BlockId head(std::uint32_t language, std::uint32_t task) {
    return {Kind::Head, 0, language, task};
  }

  bool is_backbone() const { return kind == Kind::Backbone; }
  bool is_head() const { return kind == Kind::Head; }

  // "backbone.3" or "head.t1.n0"
  std::string name() const;
  static BlockId parse(const std::string& text);

  auto operator<=>(const BlockId&) const = default;
};

struct ObjectiveId {
  enum class Kind : std::uint8_t { Supervised = 0, Unsupervised = 1 };

  Kind kind = Kind::Supervised;
  std::uint32_t language = 0;
  std::uint32_t task = 0;

  static ObjectiveId supervised(std::uint32_t language, std::uint32_t task) {
    return {Kind::Supervised, language, task};
  }
  static ObjectiveId unsupervised() { return {Kind::Unsupervised, 0, 0}; }

  bool is_supervised() const { return kind == Kind::Supervised; }
  bool is_unsupervised() const { return kind == Kind::Unsupervised; }
  // Head block owned by a supervised objective.
  BlockId head_block() const { return BlockId::head(language, task); }

  // "t0_n1" or "unsup"
  std::string name() const;
  static ObjectiveId parse(const std::string& text);

  auto operator<=>(const ObjectiveId&) const = default;
};

using BlockFilter = std::optional<std::set<BlockId>>;

/// Dense blocks keyed by BlockId; iteration order is the BlockId order, which
/// fixes the summation order of every reduction.
class ParamVector {
 public:
  using Storage = std::map<BlockId, std::vector<double>>;

  ParamVector() = default;
  explicit ParamVector(Storage blocks) : blocks_(std::move(blocks)) {}

  static ParamVector zeros(const std::vector<std::pair<BlockId, std::size_t>>& layout);
  // Zero vector with the same layout as `like`.
  static ParamVector zeros_like(const ParamVector& like);

  const Storage& blocks() const { return blocks_; }
  bool has_block(const BlockId& id) const { return blocks_.contains(id); }
  std::span<const double> block(const BlockId& id) const;
  std::span<double> block(const BlockId& id);
  void set_block(const BlockId& id, std::vector<double> values);

  std::size_t num_blocks() const { return blocks_.size(); }
  std::size_t size() const;
  std::vector<std::pair<BlockId, std::size_t>> layout() const;
  bool same_structure(const ParamVector& other) const;

  // Blocks satisfying the filter, copied.
  ParamVector restricted_to(const std::set<BlockId>& ids) const;
  ParamVector backbone_part() const;
  ParamVector head_part() const;

  bool all_finite() const;
  // Concatenation in block order; used for hashing and finite differences.
  std::vector<double> flatten() const;
  // FNV-1a over the raw bytes of flatten(), as 16 hex digits.
  std::string hash_hex() const;

  bool operator==(const ParamVector& other) const = default;

 private:
  Storage blocks_;
};

/// target + scale * direction on filtered blocks; other blocks are copied.
/// Requires identical block structure. Throws StructureError on mismatch and
/// NumericalError if the result is not finite.
ParamVector axpy(const ParamVector& target, double scale, const ParamVector& direction,
                 const BlockFilter& filter = std::nullopt);

/// In-place target += scale * direction where direction's blocks are a subset
/// of target's (e.g. a backbone-only update applied to full parameters).
void axpy_into(ParamVector& target, double scale, const ParamVector& direction);

/// Sum over filtered blocks of the blockwise dot products.
double inner(const ParamVector& a, const ParamVector& b, const BlockFilter& filter = std::nullopt);
double norm(const ParamVector& a, const BlockFilter& filter = std::nullopt);

/// Per-objective gradients restricted to backbone blocks, one column per objective.
class GradientMatrix {
 public:
  GradientMatrix() = default;
  GradientMatrix(std::vector<ObjectiveId> objectives, std::vector<ParamVector> columns);

  const std::vector<ObjectiveId>& objectives() const { return objectives_; }
  const std::vector<ParamVector>& columns() const { return columns_; }
  const ParamVector& column(std::size_t m) const { return columns_.at(m); }
  const ParamVector& column(const ObjectiveId& id) const;
  std::size_t num_objectives() const { return objectives_.size(); }
  std::optional<std::size_t> index_of(const ObjectiveId& id) const;

  // Columns for `ids`, in that order. Throws StructureError on unknown ids.
  GradientMatrix select(const std::vector<ObjectiveId>& ids) const;
  std::vector<std::pair<BlockId, std::size_t>> layout() const;

 private:
  std::vector<ObjectiveId> objectives_;
  std::vector<ParamVector> columns_;
};

class SimplexWeights;

/// Σ_m λ_m · column_m.
ParamVector combine(const GradientMatrix& g, const SimplexWeights& weights);
/// Same, with arbitrary real coefficients (static weights, penalties).
ParamVector combine(const GradientMatrix& g, std::span<const double> coefficients);

}  // namespace objsoup
