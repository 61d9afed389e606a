#pragma once

#include <string>

#include "simicl/grid.hpp"

namespace simicl {

// Fixed 2x2 layout of the composite prompt image.
enum class Quadrant { SupportImage, SupportMask, QueryImage, QueryTarget };

struct QuadrantRect {
    int row0 = 0;
    int col0 = 0;
    int side = 0;
};

constexpr int kCompositeSide = 224;
constexpr int kQuadrantSide = kCompositeSide / 2;

QuadrantRect quadrant_rect(Quadrant q, int composite_side = kCompositeSide);

struct Composite {
    GridF pixels; // composite_side x composite_side, values in [0, 1]
    std::string pair_id;
};

// Binary mask rendered as image content: foreground 1.0, background 0.0.
GridF render_mask_image(const GridU8& mask);

// Bilinear resize with half-pixel sampling, output clamped to [0, 1].
GridF resize_image(const GridF& src, int out_rows, int out_cols);

// Resize for binary-valued content: bilinear then re-threshold at 0.5.
GridF resize_mask_image(const GridF& src, int out_rows, int out_cols);

Composite compose_training_composite(const GridF& support_img, const GridU8& support_mask,
                                     const GridF& query_img, const GridU8& query_mask,
                                     const std::string& pair_id = "");

// Query-target quadrant filled with 0; it is token-masked at inference.
Composite compose_inference_composite(const GridF& support_img, const GridU8& support_mask,
                                      const GridF& query_img, const std::string& pair_id = "");

GridF extract_quadrant(const Composite& composite, Quadrant q);

} // namespace simicl
