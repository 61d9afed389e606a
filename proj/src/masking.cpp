#include "simicl/masking.hpp"

#include <cmath>
#include <numeric>

#include "simicl/rng.hpp"

namespace simicl {

namespace {

constexpr uint64_t kMaskTag = 0x4d41534bULL; // "MASK"

} // namespace

const char* loss_variant_name(LossRegionVariant variant) {
    switch (variant) {
    case LossRegionVariant::MaskedAreas: return "masked";
    case LossRegionVariant::AllAreas: return "all";
    case LossRegionVariant::SegmentationQuadrants: return "segquads";
    case LossRegionVariant::TargetQuadrant: return "target";
    }
    return "all";
}

LossRegionVariant loss_variant_from_name(const std::string& name) {
    if (name == "masked") return LossRegionVariant::MaskedAreas;
    if (name == "all") return LossRegionVariant::AllAreas;
    if (name == "segquads") return LossRegionVariant::SegmentationQuadrants;
    if (name == "target") return LossRegionVariant::TargetQuadrant;
    throw Error(ErrorCode::ParseError, "unknown loss variant: " + name);
}

PatchMask sample_mask(const PatchGrid& grid, float ratio, uint64_t rng_seed) {
    grid.validate();
    if (!(ratio >= 0.0f && ratio <= 1.0f)) {
        throw Error(ErrorCode::InvalidRatio, "mask ratio must lie in [0, 1]");
    }
    const int n = grid.n_patches();
    const int k = static_cast<int>(std::lround(static_cast<double>(ratio) * n));

    PatchMask mask;
    mask.ratio_requested = ratio;
    mask.masked.assign(static_cast<size_t>(n), 0);

    // Partial Fisher-Yates: the first k entries of a seeded shuffle.
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::stream(rng_seed, kMaskTag);
    for (int i = 0; i < k; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<uint64_t>(n - i)));
        std::swap(order[i], order[j]);
        mask.masked[static_cast<size_t>(order[i])] = 1;
    }
    return mask;
}

PatchMask sample_mask_covering_target(const PatchGrid& grid, float ratio, uint64_t rng_seed) {
    grid.validate();
    if (!(ratio >= 0.0f && ratio <= 1.0f)) {
        throw Error(ErrorCode::InvalidRatio, "mask ratio must lie in [0, 1]");
    }
    const int n = grid.n_patches();
    const int rows = grid.rows();
    if (rows % 2 != 0) {
        throw Error(ErrorCode::InvalidDimension, "target-covering mask needs an even patch grid");
    }
    const int quadrant = (rows / 2) * (rows / 2);
    const int k = static_cast<int>(std::lround(static_cast<double>(ratio) * n));
    if (k < quadrant) {
        throw Error(ErrorCode::InvalidRatio,
                    "mask ratio too small to cover the target quadrant");
    }

    PatchMask mask;
    mask.ratio_requested = ratio;
    mask.masked.assign(static_cast<size_t>(n), 0);
    std::vector<int> rest;
    rest.reserve(static_cast<size_t>(n - quadrant));
    for (int p = 0; p < n; ++p) {
        const int pr = p / rows;
        const int pc = p % rows;
        if (pr >= rows / 2 && pc >= rows / 2) {
            mask.masked[static_cast<size_t>(p)] = 1; // target quadrant
        } else {
            rest.push_back(p);
        }
    }
    Rng rng = Rng::stream(rng_seed, kMaskTag, 1);
    const int extra = k - quadrant;
    for (int i = 0; i < extra; ++i) {
        const int j = i + static_cast<int>(rng.below(rest.size() - static_cast<size_t>(i)));
        std::swap(rest[static_cast<size_t>(i)], rest[static_cast<size_t>(j)]);
        mask.masked[static_cast<size_t>(rest[static_cast<size_t>(i)])] = 1;
    }
    return mask;
}

PatchMask inference_mask(const PatchGrid& grid) {
    grid.validate();
    const int rows = grid.rows();
    if (rows % 2 != 0) {
        throw Error(ErrorCode::InvalidDimension, "inference mask needs an even patch grid");
    }
    PatchMask mask;
    mask.ratio_requested = 0.25f;
    mask.masked.assign(static_cast<size_t>(grid.n_patches()), 0);
    for (int r = rows / 2; r < rows; ++r) {
        for (int c = rows / 2; c < rows; ++c) {
            mask.masked[static_cast<size_t>(r) * rows + c] = 1;
        }
    }
    return mask;
}

LossRegion loss_pixel_region(LossRegionVariant variant, const PatchMask& patch_mask,
                             const PatchGrid& grid) {
    grid.validate();
    if (static_cast<int>(patch_mask.masked.size()) != grid.n_patches()) {
        throw Error(ErrorCode::InvalidDimension, "patch mask does not match patch grid");
    }
    const int side = grid.image_side;
    const int half = side / 2;
    LossRegion region;
    region.variant = variant;
    region.pixel_set = GridU8(side, side, 0);

    switch (variant) {
    case LossRegionVariant::MaskedAreas: {
        if (patch_mask.count() == 0) {
            throw Error(ErrorCode::EmptyLossRegion,
                        "loss over masked areas is undefined for an empty patch mask (mask ratio 0)");
        }
        const int cols = grid.cols();
        for (int p = 0; p < grid.n_patches(); ++p) {
            if (!patch_mask.is_masked(p)) {
                continue;
            }
            const int pr = p / cols;
            const int pc = p % cols;
            for (int r = 0; r < grid.patch_side; ++r) {
                for (int c = 0; c < grid.patch_side; ++c) {
                    region.pixel_set.at(pr * grid.patch_side + r, pc * grid.patch_side + c) = 1;
                }
            }
        }
        break;
    }
    case LossRegionVariant::AllAreas:
        std::fill(region.pixel_set.data.begin(), region.pixel_set.data.end(), uint8_t{1});
        break;
    case LossRegionVariant::SegmentationQuadrants:
        for (int r = 0; r < side; ++r) {
            for (int c = half; c < side; ++c) {
                region.pixel_set.at(r, c) = 1; // TR for r < half, BR otherwise
            }
        }
        break;
    case LossRegionVariant::TargetQuadrant:
        for (int r = half; r < side; ++r) {
            for (int c = half; c < side; ++c) {
                region.pixel_set.at(r, c) = 1;
            }
        }
        break;
    }
    region.pixel_count = count_nonzero(region.pixel_set);
    return region;
}

std::string mask_to_string(const PatchMask& mask) {
    std::string out;
    out.reserve(mask.masked.size());
    for (uint8_t m : mask.masked) {
        out.push_back(m ? '1' : '0');
    }
    return out;
}

} // namespace simicl
