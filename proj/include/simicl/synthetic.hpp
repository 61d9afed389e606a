#pragma once

#include <cstdint>
#include <utility>

#include "simicl/grid.hpp"

namespace simicl {

struct SyntheticSample {
    GridF image;  // grayscale in [0, 1]
    GridU8 mask;  // {0, 1}, exact band pixel set
};

// Deterministic ultrasound-like phantom: speckle background, one bright band
// along a random quadratic arc, acoustic shadow beneath the band. The mask
// marks exactly the band pixels. Identical (seed, index, side) gives a
// bitwise-identical sample.
SyntheticSample generate_synthetic_sample(uint64_t seed, uint32_t index, int side);

} // namespace simicl
