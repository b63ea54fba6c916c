#pragma once

#include <Eigen/Core>

#include <vector>

#include "sparseview/geometry.hpp"
#include "sparseview/patches.hpp"

namespace sv {

/// Pixel selection for error metrics; one flag per pixel, same layout as Image.
struct RoiMask {
    ImageGrid grid;
    std::vector<char> inside;

    [[nodiscard]] Eigen::Index count() const;
};

RoiMask full_mask(const ImageGrid& grid);
/// Pixels whose center lies within radius (mm) of the isocenter.
RoiMask circular_mask(const ImageGrid& grid, double radius);

/// RMSE in HU over the mask after clipping negative reconstruction values.
double rmse_roi(const Image& recon, const Image& truth, const RoiMask& roi, double mu_water = 0.02);

/// Excess kurtosis m4 / m2^2 - 3 of the entries of Psi~x - z; NaN when m2 = 0.
double excess_kurtosis(const Codes& transformed, const Codes& z);

} // namespace sv
