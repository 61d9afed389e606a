#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "simicl/grid.hpp"

namespace simicl {

struct PatchGrid {
    int image_side = 224;
    int patch_side = 16;

    int rows() const { return image_side / patch_side; }
    int cols() const { return rows(); }
    int n_patches() const { return rows() * cols(); }

    void validate() const {
        if (image_side <= 0 || patch_side <= 0 || image_side % patch_side != 0) {
            throw Error(ErrorCode::InvalidDimension, "image side must be a positive multiple of patch side");
        }
    }
};

// Boolean vector over the patch grid, row-major patch indexing.
struct PatchMask {
    std::vector<uint8_t> masked;
    float ratio_requested = 0.0f;

    int count() const {
        int n = 0;
        for (uint8_t m : masked) {
            n += m != 0;
        }
        return n;
    }
    bool is_masked(int patch) const { return masked[static_cast<size_t>(patch)] != 0; }
};

enum class LossRegionVariant { MaskedAreas, AllAreas, SegmentationQuadrants, TargetQuadrant };

const char* loss_variant_name(LossRegionVariant variant);
LossRegionVariant loss_variant_from_name(const std::string& name);

struct LossRegion {
    LossRegionVariant variant = LossRegionVariant::AllAreas;
    GridU8 pixel_set; // image_side x image_side, {0, 1}
    size_t pixel_count = 0;
};

// Exactly round(ratio * n_patches) distinct patches, uniform without
// replacement, deterministic in rng_seed.
PatchMask sample_mask(const PatchGrid& grid, float ratio, uint64_t rng_seed);

// Same exact count, but the target-quadrant patches are always included and
// the remainder is drawn uniformly from the other patches. Requires the count
// to reach the quadrant size (ratio >= 0.25 on the 14x14 grid).
PatchMask sample_mask_covering_target(const PatchGrid& grid, float ratio, uint64_t rng_seed);

// Masks exactly the patches covering the query-target quadrant.
PatchMask inference_mask(const PatchGrid& grid);

// Materializes the pixel set the reconstruction loss averages over.
// MaskedAreas with an empty patch mask raises EmptyLossRegion.
LossRegion loss_pixel_region(LossRegionVariant variant, const PatchMask& patch_mask,
                             const PatchGrid& grid);

// 196-character {0,1} string, row-major, for logs.
std::string mask_to_string(const PatchMask& mask);

} // namespace simicl
