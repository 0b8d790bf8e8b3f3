#include <atomic>
#include <cstdlib>
#include <stdexcept>
#include <string>

#include "objsoup/kernels.hpp"

namespace objsoup::kernels {
namespace {

const KernelTable* table_for(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return &scalar_table();
    case Backend::Avx2:
      return avx2_table();
    case Backend::Neon:
      return neon_table();
  }
  return nullptr;
}

std::atomic<const KernelTable*>& active_slot() {
  static std::atomic<const KernelTable*> slot{table_for(detect_backend())};
  return slot;
}

}  // namespace

bool backend_available(Backend b) { return table_for(b) != nullptr; }

std::string_view backend_name(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return "scalar";
    case Backend::Avx2:
      return "avx2";
    case Backend::Neon:
      return "neon";
  }
  return "unknown";
}

Backend parse_backend(std::string_view name) {
  if (name == "scalar") return Backend::Scalar;
  if (name == "avx2") return Backend::Avx2;
  if (name == "neon") return Backend::Neon;
  throw std::invalid_argument("unknown kernel backend '" + std::string(name) + "'");
}

Backend detect_backend() {
  if (const char* env = std::getenv("OBJSOUP_KERNEL"); env != nullptr && *env != '\0') {
    const std::string_view requested(env);
    if (requested != "auto") {
      const Backend b = parse_backend(requested);
      if (backend_available(b)) return b;
    }
  }
  if (backend_available(Backend::Avx2)) return Backend::Avx2;
  if (backend_available(Backend::Neon)) return Backend::Neon;
  return Backend::Scalar;
}

Backend active_backend() { return active_slot().load()->backend; }

void select_backend(Backend b) {
  const KernelTable* t = table_for(b);
  if (t == nullptr) {
    throw std::invalid_argument("kernel backend '" + std::string(backend_name(b)) +
                                "' is not available on this machine");
  }
  active_slot().store(t);
}

const KernelTable& active() { return *active_slot().load(); }

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw std::invalid_argument("dot: length mismatch");
  return active().dot(a.data(), b.data(), a.size());
}

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  if (x.size() != y.size()) throw std::invalid_argument("axpy: length mismatch");
  active().axpy(alpha, x.data(), y.data(), x.size());
}

void scale(double alpha, std::span<double> y) { active().scale(alpha, y.data(), y.size()); }

bool all_finite(std::span<const double> x) { return active().all_finite(x.data(), x.size()); }

}  // namespace objsoup::kernels
