#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace deschash {

using Rng = std::mt19937_64;

/// Derives an independent stream seed for a named pipeline stage.
/// Stable across platforms: FNV-1a over the stage name, mixed with the root by splitmix64.
std::uint64_t derive_seed(std::uint64_t root, std::string_view stage);

inline Rng make_rng(std::uint64_t root, std::string_view stage) {
  return Rng{derive_seed(root, stage)};
}

}  // namespace deschash
