#include "simicl/composer.hpp"

#include <cmath>

namespace simicl {

namespace {

void paste(GridF& dst, const GridF& src, const QuadrantRect& rect) {
    if (src.rows != rect.side || src.cols != rect.side) {
        throw Error(ErrorCode::InvalidDimension, "quadrant content does not match quadrant size");
    }
    for (int r = 0; r < rect.side; ++r) {
        for (int c = 0; c < rect.side; ++c) {
            dst.at(rect.row0 + r, rect.col0 + c) = src.at(r, c);
        }
    }
}

GridF fit_to_quadrant(const GridF& img) {
    if (img.empty()) {
        throw Error(ErrorCode::InvalidDimension, "empty image cannot fill a quadrant");
    }
    if (img.rows == kQuadrantSide && img.cols == kQuadrantSide) {
        return img;
    }
    return resize_image(img, kQuadrantSide, kQuadrantSide);
}

GridF fit_mask_to_quadrant(const GridU8& mask) {
    const GridF rendered = render_mask_image(mask);
    if (rendered.rows == kQuadrantSide && rendered.cols == kQuadrantSide) {
        return rendered;
    }
    return resize_mask_image(rendered, kQuadrantSide, kQuadrantSide);
}

} // namespace

QuadrantRect quadrant_rect(Quadrant q, int composite_side) {
    const int half = composite_side / 2;
    switch (q) {
    case Quadrant::SupportImage: return {0, 0, half};
    case Quadrant::SupportMask: return {0, half, half};
    case Quadrant::QueryImage: return {half, 0, half};
    case Quadrant::QueryTarget: return {half, half, half};
    }
    return {0, 0, half};
}

GridF render_mask_image(const GridU8& mask) {
    GridF out(mask.rows, mask.cols);
    for (size_t i = 0; i < mask.data.size(); ++i) {
        out.data[i] = mask.data[i] ? 1.0f : 0.0f;
    }
    return out;
}

GridF resize_image(const GridF& src, int out_rows, int out_cols) {
    if (src.empty()) {
        throw Error(ErrorCode::InvalidDimension, "cannot resize an empty image");
    }
    if (out_rows < 1 || out_cols < 1) {
        throw Error(ErrorCode::InvalidDimension, "resize target must be at least 1x1");
    }
    if (out_rows == src.rows && out_cols == src.cols) {
        return src;
    }
    GridF out(out_rows, out_cols);
    const float scale_r = static_cast<float>(src.rows) / static_cast<float>(out_rows);
    const float scale_c = static_cast<float>(src.cols) / static_cast<float>(out_cols);
    for (int r = 0; r < out_rows; ++r) {
        const float sr = (static_cast<float>(r) + 0.5f) * scale_r - 0.5f;
        const int r0 = std::clamp(static_cast<int>(std::floor(sr)), 0, src.rows - 1);
        const int r1 = std::min(r0 + 1, src.rows - 1);
        const float fr = std::clamp(sr - static_cast<float>(r0), 0.0f, 1.0f);
        for (int c = 0; c < out_cols; ++c) {
            const float sc = (static_cast<float>(c) + 0.5f) * scale_c - 0.5f;
            const int c0 = std::clamp(static_cast<int>(std::floor(sc)), 0, src.cols - 1);
            const int c1 = std::min(c0 + 1, src.cols - 1);
            const float fc = std::clamp(sc - static_cast<float>(c0), 0.0f, 1.0f);
            const float top = src.at(r0, c0) * (1.0f - fc) + src.at(r0, c1) * fc;
            const float bottom = src.at(r1, c0) * (1.0f - fc) + src.at(r1, c1) * fc;
            out.at(r, c) = std::clamp(top * (1.0f - fr) + bottom * fr, 0.0f, 1.0f);
        }
    }
    return out;
}

GridF resize_mask_image(const GridF& src, int out_rows, int out_cols) {
    GridF resized = resize_image(src, out_rows, out_cols);
    for (auto& v : resized.data) {
        v = v >= 0.5f ? 1.0f : 0.0f;
    }
    return resized;
}

Composite compose_training_composite(const GridF& support_img, const GridU8& support_mask,
                                     const GridF& query_img, const GridU8& query_mask,
                                     const std::string& pair_id) {
    Composite composite{GridF(kCompositeSide, kCompositeSide, 0.0f), pair_id};
    paste(composite.pixels, fit_to_quadrant(support_img), quadrant_rect(Quadrant::SupportImage));
    paste(composite.pixels, fit_mask_to_quadrant(support_mask), quadrant_rect(Quadrant::SupportMask));
    paste(composite.pixels, fit_to_quadrant(query_img), quadrant_rect(Quadrant::QueryImage));
    paste(composite.pixels, fit_mask_to_quadrant(query_mask), quadrant_rect(Quadrant::QueryTarget));
    return composite;
}

Composite compose_inference_composite(const GridF& support_img, const GridU8& support_mask,
                                      const GridF& query_img, const std::string& pair_id) {
    Composite composite{GridF(kCompositeSide, kCompositeSide, 0.0f), pair_id};
    paste(composite.pixels, fit_to_quadrant(support_img), quadrant_rect(Quadrant::SupportImage));
    paste(composite.pixels, fit_mask_to_quadrant(support_mask), quadrant_rect(Quadrant::SupportMask));
    paste(composite.pixels, fit_to_quadrant(query_img), quadrant_rect(Quadrant::QueryImage));
    return composite;
}

GridF extract_quadrant(const Composite& composite, Quadrant q) {
    if (composite.pixels.rows != kCompositeSide || composite.pixels.cols != kCompositeSide) {
        throw Error(ErrorCode::InvalidDimension, "composite must be 224x224");
    }
    const QuadrantRect rect = quadrant_rect(q);
    GridF out(rect.side, rect.side);
    for (int r = 0; r < rect.side; ++r) {
        for (int c = 0; c < rect.side; ++c) {
            out.at(r, c) = composite.pixels.at(rect.row0 + r, rect.col0 + c);
        }
    }
    return out;
}

} // namespace simicl
