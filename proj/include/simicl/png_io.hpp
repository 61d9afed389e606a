#pragma once

#include <string>

#include "simicl/grid.hpp"

namespace simicl {

// Minimal 8-bit grayscale PNG codec (non-interlaced, color type 0).
void write_png_gray8(const std::string& path, const GridU8& img);
GridU8 read_png_gray8(const std::string& path);

} // namespace simicl
