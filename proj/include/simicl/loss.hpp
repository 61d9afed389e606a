#pragma once

#include "simicl/grid.hpp"
#include "simicl/masking.hpp"

namespace simicl {

// Mean absolute error over the region's pixel set.
template <class T>
T mae_loss(const Grid<T>& recon, const Grid<T>& target, const LossRegion& region);

// d(mae_loss)/d(recon): sign(recon - target) / |region| inside the region,
// zero elsewhere; the L1 subgradient at zero is defined as zero.
template <class T>
Grid<T> mae_loss_gradient(const Grid<T>& recon, const Grid<T>& target, const LossRegion& region);

} // namespace simicl
