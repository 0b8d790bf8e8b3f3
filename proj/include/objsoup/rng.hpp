#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace objsoup {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

/// Named sub-stream of a master seed ("data", "init", "modo-sampling", ...).
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);
/// Sub-stream indexed by integers, e.g. (sampling seed, iteration, slot).
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t seed) { return Rng(seed); }

}  // namespace objsoup
