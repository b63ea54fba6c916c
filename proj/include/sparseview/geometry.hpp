#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "sparseview/errors.hpp"

namespace sv {

/// Pixel grid centered on the isocenter. Pixel (ix, iy) has center
/// ((ix - (width-1)/2) dx, (iy - (height-1)/2) dy); storage is row-major,
/// index iy * width + ix.
struct ImageGrid {
    int width = 0;
    int height = 0;
    double dx = 1.0;
    double dy = 1.0;

    [[nodiscard]] Eigen::Index size() const { return Eigen::Index(width) * height; }
    [[nodiscard]] double x_center(int ix) const { return (ix - 0.5 * (width - 1)) * dx; }
    [[nodiscard]] double y_center(int iy) const { return (iy - 0.5 * (height - 1)) * dy; }
    void validate() const;

    friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

/// Linear attenuation map in 1/mm.
struct Image {
    ImageGrid grid;
    Eigen::VectorXd values;

    Image() = default;
    explicit Image(const ImageGrid& g) : grid(g), values(Eigen::VectorXd::Zero(g.size())) {}
    Image(const ImageGrid& g, Eigen::VectorXd v);

    double& at(int ix, int iy) { return values[Eigen::Index(iy) * grid.width + ix]; }
    [[nodiscard]] double at(int ix, int iy) const { return values[Eigen::Index(iy) * grid.width + ix]; }
};

enum class ScanKind { parallel, fan_flat };

/// Scan description. Parallel scans cover [0, pi), fan scans [0, 2 pi), both
/// with uniformly spaced views. Detector channels are centered on the
/// central ray; for fan-flat the detector is a flat line at distance
/// source_to_detector from the source.
struct Geometry {
    ScanKind kind = ScanKind::parallel;
    int num_views = 0;
    int num_channels = 0;
    double channel_spacing = 1.0;   // mm, measured on the detector
    double source_to_iso = 0.0;     // mm, fan only
    double source_to_detector = 0.0;// mm, fan only
    std::vector<double> view_angles;

    static Geometry parallel(int views, int channels, double spacing);
    static Geometry fan_flat(int views, int channels, double spacing, double source_to_iso,
                             double source_to_detector);

    [[nodiscard]] Eigen::Index num_rays() const { return Eigen::Index(num_views) * num_channels; }
    /// Channel position on the detector, relative to the central ray.
    [[nodiscard]] double channel_offset(int c) const { return (c - 0.5 * (num_channels - 1)) * channel_spacing; }
    /// Angular step between consecutive views.
    [[nodiscard]] double view_step() const;
    void validate() const;

    friend bool operator==(const Geometry&, const Geometry&) = default;
};

/// views x channels measurement array, row-major (index view * channels + channel).
struct Sinogram {
    Geometry geometry;
    Eigen::VectorXd values;

    Sinogram() = default;
    explicit Sinogram(const Geometry& g) : geometry(g), values(Eigen::VectorXd::Zero(g.num_rays())) {}
    Sinogram(const Geometry& g, Eigen::VectorXd v);

    double& at(int view, int channel) { return values[Eigen::Index(view) * geometry.num_channels + channel]; }
    [[nodiscard]] double at(int view, int channel) const {
        return values[Eigen::Index(view) * geometry.num_channels + channel];
    }
};

/// Matrix-free system matrix A for one (geometry, grid) pair. Rays are
/// traced with Siddon's exact intersection lengths, so forward() and
/// adjoint() use identical weights and are exact transposes.
class Projector {
public:
    Projector(Geometry geometry, ImageGrid grid);

    [[nodiscard]] const Geometry& geometry() const { return geo_; }
    [[nodiscard]] const ImageGrid& grid() const { return grid_; }

    /// y = A x
    void forward(std::span<const double> x, std::span<double> y) const;
    /// x = A^T y
    void adjoint(std::span<const double> y, std::span<double> x) const;

    [[nodiscard]] Eigen::VectorXd forward(const Eigen::VectorXd& x) const;
    [[nodiscard]] Eigen::VectorXd adjoint(const Eigen::VectorXd& y) const;

    /// Visits every (pixel index, intersection length) pair of one ray.
    template <class Visit>
    void trace(Eigen::Index ray, Visit&& visit) const;

    /// Entry and exit point of a ray (line segment that covers the image).
    struct Segment {
        double x0, y0, x1, y1;
    };
    [[nodiscard]] Segment ray_segment(int view, int channel) const;

private:
    Geometry geo_;
    ImageGrid grid_;
    std::vector<Segment> rays_;
};

Sinogram project(const Image& img, const Geometry& geo);
Image backproject(const Sinogram& sino, const ImageGrid& grid);

struct FbpOptions {
    /// Hanning window cutoff as a fraction of the Nyquist frequency.
    double cutoff = 1.0;
};

/// Filtered backprojection with a Hanning-apodized ramp filter.
/// Parallel: pixel-driven backprojection with weight pi / num_views.
/// Fan-flat: cosine pre-weighting and distance-weighted backprojection.
Image fbp(const Sinogram& sino, const ImageGrid& out, const FbpOptions& opts = {});

// ---------------------------------------------------------------------------

template <class Visit>
void Projector::trace(Eigen::Index ray, Visit&& visit) const
{
    const Segment& s = rays_[std::size_t(ray)];
    const double vx = s.x1 - s.x0;
    const double vy = s.y1 - s.y0;
    const double len = std::sqrt(vx * vx + vy * vy);
    const double xmin = -0.5 * grid_.width * grid_.dx;
    const double ymin = -0.5 * grid_.height * grid_.dy;
    const double xmax = -xmin;
    const double ymax = -ymin;
    constexpr double inf = std::numeric_limits<double>::infinity();

    double a_enter = 0.0, a_exit = 1.0;
    auto clip = [&](double p0, double v, double lo, double hi) {
        if (v == 0.0) {
            if (p0 <= lo || p0 >= hi) a_exit = -1.0;
            return;
        }
        double a1 = (lo - p0) / v, a2 = (hi - p0) / v;
        if (a1 > a2) std::swap(a1, a2);
        a_enter = std::max(a_enter, a1);
        a_exit = std::min(a_exit, a2);
    };
    clip(s.x0, vx, xmin, xmax);
    clip(s.y0, vy, ymin, ymax);
    if (!(a_exit > a_enter)) return;

    const double px = s.x0 + a_enter * vx;
    const double py = s.y0 + a_enter * vy;
    const double fx = (px - xmin) / grid_.dx;
    const double fy = (py - ymin) / grid_.dy;

    int ix, iy, step_x = 0, step_y = 0;
    double ax_next = inf, ay_next = inf, dax = inf, day = inf;
    if (vx > 0) {
        ix = int(std::floor(fx));
        step_x = 1;
    } else if (vx < 0) {
        ix = int(std::ceil(fx)) - 1;
        step_x = -1;
    } else {
        ix = int(std::floor(fx));
    }
    if (vy > 0) {
        iy = int(std::floor(fy));
        step_y = 1;
    } else if (vy < 0) {
        iy = int(std::ceil(fy)) - 1;
        step_y = -1;
    } else {
        iy = int(std::floor(fy));
    }
    ix = std::clamp(ix, 0, grid_.width - 1);
    iy = std::clamp(iy, 0, grid_.height - 1);
    if (step_x != 0) {
        const int plane = step_x > 0 ? ix + 1 : ix;
        ax_next = (xmin + plane * grid_.dx - s.x0) / vx;
        dax = grid_.dx / std::abs(vx);
    }
    if (step_y != 0) {
        const int plane = step_y > 0 ? iy + 1 : iy;
        ay_next = (ymin + plane * grid_.dy - s.y0) / vy;
        day = grid_.dy / std::abs(vy);
    }

    double a = a_enter;
    while (a < a_exit) {
        double a_next;
        const bool x_first = ax_next < ay_next;
        a_next = std::min(x_first ? ax_next : ay_next, a_exit);
        const double w = (a_next - a) * len;
        if (w > 0.0) visit(Eigen::Index(iy) * grid_.width + ix, w);
        a = a_next;
        if (x_first) {
            ix += step_x;
            ax_next += dax;
            if (ix < 0 || ix >= grid_.width) break;
        } else {
            iy += step_y;
            ay_next += day;
            if (iy < 0 || iy >= grid_.height) break;
        }
    }
}

} // namespace sv
