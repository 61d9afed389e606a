#include "simicl/synthetic.hpp"

#include <cmath>

#include "simicl/rng.hpp"

namespace simicl {

namespace {

constexpr uint64_t kSynthTag = 0x53594e5448ULL;   // "SYNTH"


// Separable box blur, edge-clamped.
GridF box_blur(const GridF& src, int radius) {
    GridF tmp(src.rows, src.cols);
    GridF out(src.rows, src.cols);
    const int w = 2 * radius + 1;
    for (int r = 0; r < src.rows; ++r) {
        for (int c = 0; c < src.cols; ++c) {
            float acc = 0.0f;
            for (int k = -radius; k <= radius; ++k) {
                const int cc = std::clamp(c + k, 0, src.cols - 1);
                acc += src.at(r, cc);
            }
            tmp.at(r, c) = acc / static_cast<float>(w);
        }
    }
    for (int r = 0; r < src.rows; ++r) {
        for (int c = 0; c < src.cols; ++c) {
            float acc = 0.0f;
            for (int k = -radius; k <= radius; ++k) {
                const int rr = std::clamp(r + k, 0, src.rows - 1);
                acc += tmp.at(rr, c);
            }
            out.at(r, c) = acc / static_cast<float>(w);
        }
    }
    return out;
}

} // namespace

SyntheticSample generate_synthetic_sample(uint64_t seed, uint32_t index, int side) {
    if (side < 32) {
        throw Error(ErrorCode::InvalidDimension, "synthetic sample side must be >= 32");
    }
    Rng rng = Rng::stream(seed, kSynthTag, index);

    // Wrist anatomy is similar across subjects; the band varies inside a
    // moderate strip, like the cortical surface does across real sweeps.
    const double base_a = rng.uniform_in(0.42 * side, 0.54 * side);
    const double base_b = rng.uniform_in(-0.06, 0.06);
    const double base_c = rng.uniform_in(-0.15, 0.15) / side;
    const int thickness = 9;
    const float base_level = static_cast<float>(rng.uniform_in(0.24, 0.30));
    const float shadow = static_cast<float>(rng.uniform_in(0.48, 0.55));

    // Smoothed multiplicative speckle over the subject's base echo level.
    GridF noise(side, side);
    for (auto& v : noise.data) {
        v = static_cast<float>(rng.uniform());
    }
    const GridF smooth = box_blur(noise, 3);
    const float speckle_amp = static_cast<float>(rng.uniform_in(0.20, 0.30));

    GridF image(side, side);
    for (int r = 0; r < side; ++r) {
        for (int c = 0; c < side; ++c) {
            const float s = smooth.at(r, c) - 0.5f;
            image.at(r, c) = std::clamp(base_level * (1.0f + speckle_amp * 2.0f * s), 0.02f, 1.0f);
        }
    }

    // Cortical band: quadratic arc y(x) = a + b*(x-x0) + c*(x-x0)^2.
    const double half = thickness / 2.0;
    const double x0 = side / 2.0;
    const double a = base_a;
    const double b = base_b;
    const double c = base_c;

    std::vector<double> center(side);
    for (int x = 0; x < side; ++x) {
        const double dx = x - x0;
        double y = a + b * dx + c * dx * dx;
        center[x] = std::clamp(y, half + 1.0, side - half - 2.0);
    }

    GridU8 mask(side, side, 0);
    for (int x = 0; x < side; ++x) {
        // Shadow first: everything below the band loses >= 30% intensity.
        const int band_bottom = static_cast<int>(std::floor(center[x] + half));
        for (int y = band_bottom + 1; y < side; ++y) {
            image.at(y, x) *= shadow;
        }
        for (int y = 0; y < side; ++y) {
            const double d = std::abs((y + 0.5) - center[x]);
            if (d < half) {
                mask.at(y, x) = 1;
                // Bright profile >= 0.8 pre-noise, mild speckle on top.
                const float profile = 0.95f + 0.05f * static_cast<float>(std::cos(3.14159265358979323846 * d / half));
                const float grain = 0.98f + 0.04f * (smooth.at(y, x) - 0.5f);
                image.at(y, x) = std::clamp(profile * grain, 0.0f, 1.0f);
            }
        }
    }

    return SyntheticSample{std::move(image), std::move(mask)};
}

} // namespace simicl
