#include <doctest.h>

#include <cmath>

#include "simicl/error.hpp"
#include "simicl/masking.hpp"
#include "simicl/rng.hpp"

using namespace simicl;

namespace {

// Brute-force rasterizer: paints each masked patch rectangle independently.
GridU8 rasterize_mask(const PatchMask& mask, const PatchGrid& grid) {
    GridU8 out(grid.image_side, grid.image_side, 0);
    for (int pr = 0; pr < grid.rows(); ++pr) {
        for (int pc = 0; pc < grid.cols(); ++pc) {
            if (!mask.is_masked(pr * grid.cols() + pc)) {
                continue;
            }
            for (int r = pr * grid.patch_side; r < (pr + 1) * grid.patch_side; ++r) {
                for (int c = pc * grid.patch_side; c < (pc + 1) * grid.patch_side; ++c) {
                    out.at(r, c) = 1;
                }
            }
        }
    }
    return out;
}

} // namespace

TEST_CASE("mask counts follow round(ratio * 196) for the paper ratios") {
    const PatchGrid grid;
    CHECK(sample_mask(grid, 0.0f, 1).count() == 0);
    CHECK(sample_mask(grid, 0.3f, 1).count() == 59);
    CHECK(sample_mask(grid, 0.45f, 1).count() == 88);
    CHECK(sample_mask(grid, 0.6f, 1).count() == 118);
    CHECK(sample_mask(grid, 0.75f, 1).count() == 147);
    CHECK(sample_mask(grid, 1.0f, 1).count() == 196);
}

TEST_CASE("mask count is exact for many random ratio/seed draws") {
    const PatchGrid grid;
    Rng rng(123);
    const float ratios[] = {0.0f, 0.3f, 0.45f, 0.6f, 0.75f};
    for (int i = 0; i < 2000; ++i) {
        const float ratio = ratios[rng.below(5)];
        const PatchMask mask = sample_mask(grid, ratio, rng.next_u64());
        CHECK(mask.count() == static_cast<int>(std::lround(ratio * 196.0)));
    }
}

TEST_CASE("mask sampling is deterministic and roughly uniform") {
    const PatchGrid grid;
    const PatchMask a = sample_mask(grid, 0.45f, 99);
    const PatchMask b = sample_mask(grid, 0.45f, 99);
    CHECK(a.masked == b.masked);

    std::vector<int> freq(196, 0);
    const int draws = 4000;
    Rng rng(7);
    for (int i = 0; i < draws; ++i) {
        const PatchMask m = sample_mask(grid, 0.45f, rng.next_u64());
        for (int p = 0; p < 196; ++p) {
            freq[static_cast<size_t>(p)] += m.is_masked(p);
        }
    }
    for (int p = 0; p < 196; ++p) {
        const double rate = static_cast<double>(freq[static_cast<size_t>(p)]) / draws;
        CHECK(rate > 0.40);
        CHECK(rate < 0.50);
    }
}

TEST_CASE("mask sampling rejects ratios outside [0,1]") {
    const PatchGrid grid;
    CHECK_THROWS_AS(sample_mask(grid, -0.1f, 1), Error);
    CHECK_THROWS_AS(sample_mask(grid, 1.1f, 1), Error);
}

TEST_CASE("inference mask covers exactly the target quadrant patches") {
    const PatchGrid grid;
    const PatchMask mask = inference_mask(grid);
    CHECK(mask.count() == 49);
    CHECK_FALSE(mask.is_masked(0));
    for (int p = 0; p < 196; ++p) {
        const int pr = p / 14;
        const int pc = p % 14;
        const bool in_target = pr >= 7 && pc >= 7;
        CHECK(mask.is_masked(p) == in_target);
        if (mask.is_masked(p)) {
            // Every pixel of a masked patch lies in the bottom-right quadrant.
            CHECK(pr * 16 >= 112);
            CHECK(pc * 16 >= 112);
        }
    }
}

TEST_CASE("loss region cardinalities match the quadrant arithmetic") {
    const PatchGrid grid;
    const PatchMask mask = sample_mask(grid, 0.45f, 5);
    REQUIRE(mask.count() == 88);

    const LossRegion masked = loss_pixel_region(LossRegionVariant::MaskedAreas, mask, grid);
    CHECK(masked.pixel_count == 88u * 256u); // 22528, brute-force verified below
    CHECK(masked.pixel_count == 22528);

    const LossRegion all = loss_pixel_region(LossRegionVariant::AllAreas, mask, grid);
    CHECK(all.pixel_count == 50176);

    const LossRegion segquads = loss_pixel_region(LossRegionVariant::SegmentationQuadrants, mask, grid);
    CHECK(segquads.pixel_count == 25088);

    const LossRegion target = loss_pixel_region(LossRegionVariant::TargetQuadrant, mask, grid);
    CHECK(target.pixel_count == 12544);

    // Region algebra vs an independent double-loop rasterizer.
    const GridU8 oracle = rasterize_mask(mask, grid);
    CHECK(masked.pixel_set == oracle);

    // Segmentation quadrants are exactly the right half of the composite.
    for (int r = 0; r < 224; ++r) {
        for (int c = 0; c < 224; ++c) {
            CHECK(segquads.pixel_set.at(r, c) == (c >= 112 ? 1 : 0));
            CHECK(target.pixel_set.at(r, c) == ((r >= 112 && c >= 112) ? 1 : 0));
        }
    }
}

TEST_CASE("masked-areas region with an empty mask is the Table-2 dash") {
    const PatchGrid grid;
    const PatchMask empty = sample_mask(grid, 0.0f, 3);
    CHECK_THROWS_AS(loss_pixel_region(LossRegionVariant::MaskedAreas, empty, grid), Error);
    try {
        loss_pixel_region(LossRegionVariant::MaskedAreas, empty, grid);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::EmptyLossRegion);
    }
    // The other variants accept an empty patch mask.
    CHECK(loss_pixel_region(LossRegionVariant::AllAreas, empty, grid).pixel_count == 50176);
}

TEST_CASE("target-covering masks keep the exact count and hide the quadrant") {
    const PatchGrid grid;
    for (float ratio : {0.3f, 0.45f, 0.6f, 0.75f}) {
        const PatchMask mask = sample_mask_covering_target(grid, ratio, 71);
        CHECK(mask.count() == static_cast<int>(std::lround(ratio * 196.0)));
        for (int pr = 7; pr < 14; ++pr) {
            for (int pc = 7; pc < 14; ++pc) {
                CHECK(mask.is_masked(pr * 14 + pc));
            }
        }
    }
    const PatchMask a = sample_mask_covering_target(grid, 0.6f, 71);
    const PatchMask b = sample_mask_covering_target(grid, 0.6f, 71);
    CHECK(a.masked == b.masked);
    // 49/196 = 0.25 is the smallest ratio that can cover the quadrant.
    CHECK_THROWS_AS(sample_mask_covering_target(grid, 0.2f, 71), Error);
}

TEST_CASE("mask serializes as a 196-character {0,1} string") {
    const PatchGrid grid;
    const PatchMask mask = sample_mask(grid, 0.3f, 17);
    const std::string s = mask_to_string(mask);
    REQUIRE(s.size() == 196);
    int ones = 0;
    for (size_t i = 0; i < s.size(); ++i) {
        CHECK((s[i] == '0' || s[i] == '1'));
        ones += s[i] == '1';
        CHECK((s[i] == '1') == mask.is_masked(static_cast<int>(i)));
    }
    CHECK(ones == 59);
}
