#pragma once

// Small scan used by solver and analysis tests.

#include <random>

#include "oracles.hpp"
#include "sparseview/geometry.hpp"
#include "sparseview/simulate.hpp"
#include "sparseview/solvers.hpp"

namespace toy {

struct Scan {
    sv::ImageGrid grid;
    sv::Projector a;
    sv::Image truth;
    sv::Sinogram y;
    sv::Weights w;

    [[nodiscard]] sv::ScanProblem problem() const { return {a, y, w}; }
};

inline sv::Phantom phantom()
{
    sv::Phantom p;
    p.ellipses.push_back({0, 0, 6.5, 5.5, 0.2, 0.02, false});
    p.ellipses.push_back({-2, 1, 2.0, 1.5, 0, 0.03, false});
    p.ellipses.push_back({2.5, -1.5, 1.2, 1.2, 0, 0.005, false});
    return p;
}

/// n x n grid of unit pixels, parallel beam, Gaussian noise of std noise_sd
/// on the line integrals, weights drawn from [w_lo, w_hi].
inline Scan make(int n = 16, int views = 24, double noise_sd = 2e-3, std::uint64_t seed = 1, double w_lo = 0.5,
                 double w_hi = 2.0)
{
    const sv::ImageGrid g{n, n, 1.0, 1.0};
    const sv::Geometry geo = sv::Geometry::parallel(views, int(1.5 * n), 1.0);
    sv::Projector a(geo, g);
    sv::Image truth = sv::rasterize(phantom(), g);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> e(0, noise_sd);
    Eigen::VectorXd yv = a.forward(truth.values);
    for (Eigen::Index i = 0; i < yv.size(); ++i) yv[i] += e(rng);
    sv::Weights w{geo, oracle::random_vector(geo.num_rays(), rng, w_lo, w_hi)};
    return Scan{g, std::move(a), std::move(truth), sv::Sinogram(geo, yv), std::move(w)};
}

} // namespace toy
