#pragma once

#include <cstdint>
#include <vector>

#include "sparseview/geometry.hpp"

namespace sv {

struct Ellipse {
    double cx = 0, cy = 0;   // mm
    double a = 1, b = 1;     // semi-axes, mm
    double rotation = 0;     // rad, counter-clockwise
    double mu = 0;           // 1/mm
    bool additive = false;   // add to the underlying value instead of replacing it
};

struct Phantom {
    std::vector<Ellipse> ellipses;
    void validate() const;
};

/// Ellipses are painted in order. Pixels straddling an ellipse boundary are
/// 4x4 supersampled; the covered fraction blends (or adds) the attenuation.
/// The result is clamped below at zero.
Image rasterize(const Phantom& phantom, const ImageGrid& grid);

/// Centered disk.
Phantom disk_phantom(double radius, double mu);

/// Chest-like slice: fat/soft-tissue body, lungs with vessels, heart, aorta,
/// spine, sternum and ribs. The geometry drifts smoothly with the slice index
/// so different indices give distinct but related images.
Phantom chest_phantom(int slice);

/// Diagonal of W: W_l = rho_l^2 / (rho_l + sigma2).
struct Weights {
    Geometry geometry;
    Eigen::VectorXd values;
    void validate() const;
};

inline double count_weight(double rho, double sigma2) { return rho * rho / (rho + sigma2); }

struct ScanData {
    Sinogram prelog;        // noisy counts, after clamping
    Sinogram postlog;       // y = log(rho0 / rho)
    Weights weights;
    long long clamped_rays = 0; // rays whose count was raised to 1
};

/// Poisson(rho0 exp(-[Ax]_l)) + Normal(0, sigma2) per ray, clamped below at 1.
/// Ray l draws from its own counter-based stream, so output depends only on
/// (inputs, seed).
ScanData simulate_scan(const Image& fine, const Geometry& geo, double rho0, double sigma2, std::uint64_t seed);

/// Same noise model on precomputed line integrals.
ScanData simulate_counts(const Sinogram& line_integrals, double rho0, double sigma2, std::uint64_t seed);

inline constexpr double default_mu_water = 0.02; // 1/mm

/// Modified Hounsfield units: air 0, water 1000.
Image to_hu(const Image& img, double mu_water = default_mu_water);

} // namespace sv
