#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace normsim {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix_seed(std::uint64_t x);

/// Derives a child seed from a run seed and a stream path, e.g. (seed, {agent_id, 3}).
/// Streams with different paths are statistically independent, so per-agent or
/// per-run generators can be created in any order without changing results.
std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  return Rng(derive_seed(seed, path));
}

}  // namespace normsim
