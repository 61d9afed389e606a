#pragma once

#include <cstdint>
#include <string>

#include "simicl/manifest.hpp"

namespace simicl {

struct SplitCounts {
    int train = 0;
    int validation = 0;
    int test = 0;
};

// Writes synthetic images/masks plus a manifest under out_dir. Samples are
// grouped into synthetic "subjects" of 3-10 consecutive frames, one split per
// subject. Fully deterministic in (counts, seed, side).
Manifest build_dataset(const std::string& out_dir, const SplitCounts& counts, uint64_t seed,
                       int side = 112);

} // namespace simicl
