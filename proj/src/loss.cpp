#include "simicl/loss.hpp"

#include <cmath>

namespace simicl {

namespace {

template <class T>
void check_shapes(const Grid<T>& recon, const Grid<T>& target, const LossRegion& region) {
    if (!recon.same_shape(target) || recon.rows != region.pixel_set.rows ||
        recon.cols != region.pixel_set.cols) {
        throw Error(ErrorCode::InvalidDimension, "loss inputs and region must share dimensions");
    }
    if (region.pixel_count == 0) {
        throw Error(ErrorCode::EmptyLossRegion, "loss region contains no pixels");
    }
}

} // namespace

template <class T>
T mae_loss(const Grid<T>& recon, const Grid<T>& target, const LossRegion& region) {
    check_shapes(recon, target, region);
    double acc = 0.0;
    for (size_t i = 0; i < recon.data.size(); ++i) {
        if (region.pixel_set.data[i]) {
            acc += std::abs(static_cast<double>(recon.data[i]) - static_cast<double>(target.data[i]));
        }
    }
    return static_cast<T>(acc / static_cast<double>(region.pixel_count));
}

template <class T>
Grid<T> mae_loss_gradient(const Grid<T>& recon, const Grid<T>& target, const LossRegion& region) {
    check_shapes(recon, target, region);
    Grid<T> grad(recon.rows, recon.cols, T(0));
    const T inv_count = T(1) / static_cast<T>(region.pixel_count);
    for (size_t i = 0; i < recon.data.size(); ++i) {
        if (!region.pixel_set.data[i]) {
            continue;
        }
        const T diff = recon.data[i] - target.data[i];
        if (diff > T(0)) {
            grad.data[i] = inv_count;
        } else if (diff < T(0)) {
            grad.data[i] = -inv_count;
        }
    }
    return grad;
}

template float mae_loss(const GridF&, const GridF&, const LossRegion&);
template double mae_loss(const GridD&, const GridD&, const LossRegion&);
template GridF mae_loss_gradient(const GridF&, const GridF&, const LossRegion&);
template GridD mae_loss_gradient(const GridD&, const GridD&, const LossRegion&);

} // namespace simicl
