#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "simicl/error.hpp"

namespace simicl {

// Dense row-major single-channel image grid.
template <class T>
struct Grid {
    int rows = 0;
    int cols = 0;
    std::vector<T> data;

    Grid() = default;
    Grid(int r, int c, T fill = T{}) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {
        if (r < 0 || c < 0) {
            throw Error(ErrorCode::InvalidDimension, "negative grid dimensions");
        }
    }

    T& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    const T& at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    size_t size() const { return data.size(); }
    bool empty() const { return data.empty(); }
    bool same_shape(const Grid& other) const { return rows == other.rows && cols == other.cols; }

    bool operator==(const Grid& other) const {
        return rows == other.rows && cols == other.cols && data == other.data;
    }
};

using GridF = Grid<float>;
using GridD = Grid<double>;
using GridU8 = Grid<uint8_t>;

// 8-bit quantization used when images go to disk.
inline GridU8 quantize_u8(const GridF& img) {
    GridU8 out(img.rows, img.cols);
    for (size_t i = 0; i < img.data.size(); ++i) {
        const float v = std::clamp(img.data[i], 0.0f, 1.0f);
        out.data[i] = static_cast<uint8_t>(v * 255.0f + 0.5f);
    }
    return out;
}

inline GridF to_float(const GridU8& img) {
    GridF out(img.rows, img.cols);
    for (size_t i = 0; i < img.data.size(); ++i) {
        out.data[i] = static_cast<float>(img.data[i]) / 255.0f;
    }
    return out;
}

// Binary-valued mask helpers; masks hold {0, 1}.
inline GridU8 binarize_u8(const GridU8& img, uint8_t threshold = 128) {
    GridU8 out(img.rows, img.cols);
    for (size_t i = 0; i < img.data.size(); ++i) {
        out.data[i] = img.data[i] >= threshold ? 1 : 0;
    }
    return out;
}

inline size_t count_nonzero(const GridU8& mask) {
    size_t n = 0;
    for (uint8_t v : mask.data) {
        n += v != 0;
    }
    return n;
}

} // namespace simicl
