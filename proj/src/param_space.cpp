#include "objsoup/param_space.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>

#include "objsoup/error.hpp"
#include "objsoup/kernels.hpp"
#include "objsoup/simplex.hpp"

namespace objsoup {
namespace {

std::uint32_t parse_ordinal(const std::string& text, std::size_t pos, std::size_t len,
                            const std::string& whole) {
  if (len == 0) throw std::invalid_argument("malformed id '" + whole + "'");
  std::uint32_t v = 0;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (text[i] < '0' || text[i] > '9') throw std::invalid_argument("malformed id '" + whole + "'");
    v = v * 10 + static_cast<std::uint32_t>(text[i] - '0');
  }
  return v;
}

void require_same_structure(const ParamVector& a, const ParamVector& b, const char* op) {
  if (!a.same_structure(b)) {
    throw StructureError(std::string(op) + ": block structure mismatch");
  }
}

void require_filter_subset(const ParamVector& a, const BlockFilter& filter, const char* op) {
  if (!filter) return;
  for (const auto& id : *filter) {
    if (!a.has_block(id)) {
      throw StructureError(std::string(op) + ": filter names unknown block " + id.name());
    }
  }
}

}  // namespace

std::string BlockId::name() const {
  if (is_backbone()) return "backbone." + std::to_string(index);
  return "head.t" + std::to_string(language) + ".n" + std::to_string(task);
}

BlockId BlockId::parse(const std::string& text) {
  if (text.rfind("backbone.", 0) == 0) {
    return backbone(parse_ordinal(text, 9, text.size() - 9, text));
  }
  if (text.rfind("head.t", 0) == 0) {
    const auto dot = text.find(".n", 6);
    if (dot == std::string::npos) throw std::invalid_argument("malformed block id '" + text + "'");
    return head(parse_ordinal(text, 6, dot - 6, text),
                parse_ordinal(text, dot + 2, text.size() - dot - 2, text));
  }
  throw std::invalid_argument("malformed block id '" + text + "'");
}

std::string ObjectiveId::name() const {
  if (is_unsupervised()) return "unsup";
  return "t" + std::to_string(language) + "_n" + std::to_string(task);
}

ObjectiveId ObjectiveId::parse(const std::string& text) {
  if (text == "unsup") return unsupervised();
  if (text.size() >= 4 && text[0] == 't') {
    const auto sep = text.find("_n");
    if (sep != std::string::npos) {
      return supervised(parse_ordinal(text, 1, sep - 1, text),
                        parse_ordinal(text, sep + 2, text.size() - sep - 2, text));
    }
  }
  throw std::invalid_argument("malformed objective id '" + text + "'");
}

ParamVector ParamVector::zeros(const std::vector<std::pair<BlockId, std::size_t>>& layout) {
  Storage blocks;
  for (const auto& [id, dim] : layout) {
    if (!blocks.emplace(id, std::vector<double>(dim, 0.0)).second) {
      throw StructureError("duplicate block " + id.name());
    }
  }
  return ParamVector(std::move(blocks));
}

ParamVector ParamVector::zeros_like(const ParamVector& like) { return zeros(like.layout()); }

std::span<const double> ParamVector::block(const BlockId& id) const {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw StructureError("no block " + id.name());
  return it->second;
}

std::span<double> ParamVector::block(const BlockId& id) {
  auto it = blocks_.find(id);
  if (it == blocks_.end()) throw StructureError("no block " + id.name());
  return it->second;
}

void ParamVector::set_block(const BlockId& id, std::vector<double> values) {
  blocks_[id] = std::move(values);
}

std::size_t ParamVector::size() const {
  std::size_t n = 0;
  for (const auto& [id, v] : blocks_) n += v.size();
  return n;
}

std::vector<std::pair<BlockId, std::size_t>> ParamVector::layout() const {
  std::vector<std::pair<BlockId, std::size_t>> out;
  out.reserve(blocks_.size());
  for (const auto& [id, v] : blocks_) out.emplace_back(id, v.size());
  return out;
}

bool ParamVector::same_structure(const ParamVector& other) const {
  if (blocks_.size() != other.blocks_.size()) return false;
  auto it = other.blocks_.begin();
  for (const auto& [id, v] : blocks_) {
    if (it->first != id || it->second.size() != v.size()) return false;
    ++it;
  }
  return true;
}

ParamVector ParamVector::restricted_to(const std::set<BlockId>& ids) const {
  Storage out;
  for (const auto& id : ids) {
    auto it = blocks_.find(id);
    if (it == blocks_.end()) throw StructureError("no block " + id.name());
    out.emplace(id, it->second);
  }
  return ParamVector(std::move(out));
}

ParamVector ParamVector::backbone_part() const {
  Storage out;
  for (const auto& [id, v] : blocks_) {
    if (id.is_backbone()) out.emplace(id, v);
  }
  return ParamVector(std::move(out));
}

ParamVector ParamVector::head_part() const {
  Storage out;
  for (const auto& [id, v] : blocks_) {
    if (id.is_head()) out.emplace(id, v);
  }
  return ParamVector(std::move(out));
}

bool ParamVector::all_finite() const {
  for (const auto& [id, v] : blocks_) {
    if (!kernels::all_finite(v)) return false;
  }
  return true;
}

std::vector<double> ParamVector::flatten() const {
  std::vector<double> out;
  out.reserve(size());
  for (const auto& [id, v] : blocks_) out.insert(out.end(), v.begin(), v.end());
  return out;
}

std::string ParamVector::hash_hex() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& [id, v] : blocks_) {
    for (double x : v) {
      unsigned char bytes[sizeof(double)];
      std::memcpy(bytes, &x, sizeof(double));
      for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
      }
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ParamVector axpy(const ParamVector& target, double scale, const ParamVector& direction,
                 const BlockFilter& filter) {
  require_same_structure(target, direction, "axpy");
  require_filter_subset(target, filter, "axpy");
  ParamVector out = target;
  for (const auto& [id, d] : direction.blocks()) {
    if (filter && !filter->contains(id)) continue;
    auto y = out.block(id);
    kernels::axpy(scale, d, y);
    if (!kernels::all_finite(y)) throw NumericalError("axpy: non-finite result in " + id.name());
  }
  return out;
}

void axpy_into(ParamVector& target, double scale, const ParamVector& direction) {
  for (const auto& [id, d] : direction.blocks()) {
    if (!target.has_block(id)) throw StructureError("axpy_into: no block " + id.name());
    auto y = target.block(id);
    if (y.size() != d.size()) throw StructureError("axpy_into: dimension mismatch in " + id.name());
  }
  for (const auto& [id, d] : direction.blocks()) {
    auto y = target.block(id);
    kernels::axpy(scale, d, y);
    if (!kernels::all_finite(y)) {
      throw NumericalError("axpy_into: non-finite result in " + id.name());
    }
  }
}

double inner(const ParamVector& a, const ParamVector& b, const BlockFilter& filter) {
  require_same_structure(a, b, "inner");
  require_filter_subset(a, filter, "inner");
  double sum = 0.0;
  auto it = b.blocks().begin();
  for (const auto& [id, va] : a.blocks()) {
    const auto& vb = it->second;
    ++it;
    if (filter && !filter->contains(id)) continue;
    sum += kernels::dot(va, vb);
  }
  return sum;
}

double norm(const ParamVector& a, const BlockFilter& filter) {
  return std::sqrt(inner(a, a, filter));
}

GradientMatrix::GradientMatrix(std::vector<ObjectiveId> objectives, std::vector<ParamVector> columns)
    : objectives_(std::move(objectives)), columns_(std::move(columns)) {
  if (objectives_.size() != columns_.size()) {
    throw StructureError("GradientMatrix: objective/column count mismatch");
  }
  std::set<ObjectiveId> seen;
  for (std::size_t m = 0; m < columns_.size(); ++m) {
    if (!seen.insert(objectives_[m]).second) {
      throw StructureError("GradientMatrix: duplicate objective " + objectives_[m].name());
    }
    for (const auto& [id, v] : columns_[m].blocks()) {
      if (!id.is_backbone()) {
        throw StructureError("GradientMatrix: head block " + id.name() + " in backbone gradient");
      }
    }
    if (!columns_[m].same_structure(columns_.front())) {
      throw StructureError("GradientMatrix: columns differ in block structure");
    }
  }
}

const ParamVector& GradientMatrix::column(const ObjectiveId& id) const {
  const auto m = index_of(id);
  if (!m) throw StructureError("GradientMatrix: no column for " + id.name());
  return columns_[*m];
}

std::optional<std::size_t> GradientMatrix::index_of(const ObjectiveId& id) const {
  for (std::size_t m = 0; m < objectives_.size(); ++m) {
    if (objectives_[m] == id) return m;
  }
  return std::nullopt;
}

GradientMatrix GradientMatrix::select(const std::vector<ObjectiveId>& ids) const {
  std::vector<ParamVector> cols;
  cols.reserve(ids.size());
  for (const auto& id : ids) cols.push_back(column(id));
  return GradientMatrix(ids, std::move(cols));
}

std::vector<std::pair<BlockId, std::size_t>> GradientMatrix::layout() const {
  if (columns_.empty()) return {};
  return columns_.front().layout();
}

ParamVector combine(const GradientMatrix& g, std::span<const double> coefficients) {
  if (coefficients.size() != g.num_objectives()) {
    throw StructureError("combine: " + std::to_string(coefficients.size()) + " weights for " +
                         std::to_string(g.num_objectives()) + " columns");
  }
  ParamVector out = ParamVector::zeros(g.layout());
  for (std::size_t m = 0; m < g.num_objectives(); ++m) {
    for (const auto& [id, col] : g.column(m).blocks()) {
      kernels::axpy(coefficients[m], col, out.block(id));
    }
  }
  return out;
}

ParamVector combine(const GradientMatrix& g, const SimplexWeights& weights) {
  return combine(g, weights.values());
}

}  // namespace objsoup
