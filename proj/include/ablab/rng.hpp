#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "ablab/tensor.hpp"

namespace ablab {

using Rng = std::mt19937_64;

// Stable sub-seed for a named stage: FNV-1a over the name, mixed with the
// master seed through splitmix64.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage);

Tensor randn(Shape shape, Rng& rng, double stddev = 1.0);
double standard_normal(Rng& rng);
double uniform(Rng& rng, double lo, double hi);
std::size_t uniform_index(Rng& rng, std::size_t n);

}  // namespace ablab
