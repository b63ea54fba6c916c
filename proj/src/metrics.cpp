#include "sparseview/metrics.hpp"

#include <cmath>
#include <limits>

#include "sparseview/errors.hpp"

namespace sv {

Eigen::Index RoiMask::count() const
{
    Eigen::Index c = 0;
    for (char v : inside) c += v ? 1 : 0;
    return c;
}

RoiMask full_mask(const ImageGrid& grid)
{
    return {grid, std::vector<char>(std::size_t(grid.size()), 1)};
}

RoiMask circular_mask(const ImageGrid& grid, double radius)
{
    RoiMask m{grid, std::vector<char>(std::size_t(grid.size()), 0)};
    for (int iy = 0; iy < grid.height; ++iy)
        for (int ix = 0; ix < grid.width; ++ix)
            m.inside[std::size_t(iy) * std::size_t(grid.width) + std::size_t(ix)] =
                std::hypot(grid.x_center(ix), grid.y_center(iy)) <= radius;
    return m;
}

double rmse_roi(const Image& recon, const Image& truth, const RoiMask& roi, double mu_water)
{
    if (!(recon.grid == truth.grid) || !(roi.grid == truth.grid))
        throw ConfigError("rmse: image and mask dimensions differ");
    if (!(mu_water > 0)) throw ConfigError("rmse: mu_water must be > 0");
    double acc = 0;
    Eigen::Index n = 0;
    for (Eigen::Index j = 0; j < truth.values.size(); ++j) {
        if (!roi.inside[std::size_t(j)]) continue;
        const double d = std::max(recon.values[j], 0.0) - truth.values[j];
        acc += d * d;
        ++n;
    }
    if (n == 0) throw ConfigError("rmse: region of interest is empty");
    return std::sqrt(acc / double(n)) * 1000.0 / mu_water;
}

double excess_kurtosis(const Codes& transformed, const Codes& z)
{
    if (transformed.rows() != z.rows() || transformed.cols() != z.cols())
        throw ConfigError("kurtosis: shape mismatch");
    const Eigen::Index n = transformed.size();
    const double* a = transformed.data();
    const double* b = z.data();
    double mean = 0;
    for (Eigen::Index i = 0; i < n; ++i) mean += a[i] - b[i];
    mean /= double(n);
    double m2 = 0, m4 = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const double d = a[i] - b[i] - mean;
        const double d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= double(n);
    m4 /= double(n);
    if (!(m2 > 0)) return std::numeric_limits<double>::quiet_NaN();
    return m4 / (m2 * m2) - 3.0;
}

} // namespace sv
