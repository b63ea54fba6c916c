#include "sparseview/simulate.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "sparseview/rng.hpp"

namespace sv {

void Phantom::validate() const
{
    for (std::size_t i = 0; i < ellipses.size(); ++i) {
        const Ellipse& e = ellipses[i];
        if (!(e.a > 0) || !(e.b > 0))
            throw ConfigError("phantom: ellipse " + std::to_string(i) + " needs positive semi-axes");
        if (!std::isfinite(e.mu) || !std::isfinite(e.cx) || !std::isfinite(e.cy) || !std::isfinite(e.rotation))
            throw ConfigError("phantom: ellipse " + std::to_string(i) + " has non-finite parameters");
    }
}

namespace {

struct EllipseTest {
    double cx, cy, c, s, inv_a2, inv_b2;
    explicit EllipseTest(const Ellipse& e)
        : cx(e.cx), cy(e.cy), c(std::cos(e.rotation)), s(std::sin(e.rotation)), inv_a2(1 / (e.a * e.a)),
          inv_b2(1 / (e.b * e.b))
    {
    }
    [[nodiscard]] bool inside(double x, double y) const
    {
        const double px = x - cx, py = y - cy;
        const double u = c * px + s * py;
        const double v = -s * px + c * py;
        return u * u * inv_a2 + v * v * inv_b2 <= 1.0;
    }
};

} // namespace

Image rasterize(const Phantom& phantom, const ImageGrid& grid)
{
    phantom.validate();
    grid.validate();
    Image img(grid);
    constexpr int sub = 4;

    for (const Ellipse& e : phantom.ellipses) {
        const EllipseTest test(e);
        // Axis-aligned bounding box of the rotated ellipse.
        const double c = std::cos(e.rotation), s = std::sin(e.rotation);
        const double hx = std::sqrt(e.a * e.a * c * c + e.b * e.b * s * s);
        const double hy = std::sqrt(e.a * e.a * s * s + e.b * e.b * c * c);
        const int x0 = std::max(0, int(std::floor((e.cx - hx) / grid.dx + 0.5 * (grid.width - 1))));
        const int x1 = std::min(grid.width - 1, int(std::ceil((e.cx + hx) / grid.dx + 0.5 * (grid.width - 1))));
        const int y0 = std::max(0, int(std::floor((e.cy - hy) / grid.dy + 0.5 * (grid.height - 1))));
        const int y1 = std::min(grid.height - 1, int(std::ceil((e.cy + hy) / grid.dy + 0.5 * (grid.height - 1))));
        const bool tiny = e.a < grid.dx || e.b < grid.dy || e.a < grid.dy || e.b < grid.dx;

        for (int iy = y0; iy <= y1; ++iy) {
            const double yc = grid.y_center(iy);
            for (int ix = x0; ix <= x1; ++ix) {
                const double xc = grid.x_center(ix);
                const double hxp = 0.5 * grid.dx, hyp = 0.5 * grid.dy;
                const int corners = int(test.inside(xc - hxp, yc - hyp)) + int(test.inside(xc + hxp, yc - hyp)) +
                                    int(test.inside(xc - hxp, yc + hyp)) + int(test.inside(xc + hxp, yc + hyp)) +
                                    int(test.inside(xc, yc));
                double frac;
                if (!tiny && (corners == 0 || corners == 5)) {
                    frac = corners == 5 ? 1.0 : 0.0;
                } else {
                    int hits = 0;
                    for (int sy = 0; sy < sub; ++sy)
                        for (int sx = 0; sx < sub; ++sx)
                            hits += test.inside(xc + ((sx + 0.5) / sub - 0.5) * grid.dx,
                                                yc + ((sy + 0.5) / sub - 0.5) * grid.dy);
                    frac = double(hits) / (sub * sub);
                }
                if (frac == 0.0) continue;
                double& v = img.at(ix, iy);
                v = e.additive ? v + frac * e.mu : (1 - frac) * v + frac * e.mu;
            }
        }
    }
    img.values = img.values.cwiseMax(0.0);
    return img;
}

Phantom disk_phantom(double radius, double mu)
{
    Phantom p;
    p.ellipses.push_back({0, 0, radius, radius, 0, mu, false});
    return p;
}

Phantom chest_phantom(int slice)
{
    const double t = slice / 12.0;
    Phantom p;
    auto add = [&](double cx, double cy, double a, double b, double rot, double mu) {
        p.ellipses.push_back({cx, cy, a, b, rot, mu, false});
    };
    // Attenuation values (1/mm): water 0.02.
    constexpr double fat = 0.0188, tissue = 0.0204, lung = 0.0052, blood = 0.0214, contrast = 0.0226,
                     bone = 0.036, cortical = 0.031, vessel = 0.0208;

    const double body_a = 86 + 3 * std::sin(t), body_b = 60 + 2.5 * std::cos(0.7 * t);
    add(0, 0, body_a, body_b, 0, fat);
    add(0, 1, body_a - 6, body_b - 5.5, 0, tissue);

    const double lung_a = 24 + 3 * std::sin(t + 0.4), lung_b = 38 + 4 * std::cos(0.8 * t);
    add(-38, 6, lung_a, lung_b, -0.18 + 0.04 * std::sin(t), lung);
    add(38 + 2 * std::sin(0.5 * t), 6, lung_a - 1.5, lung_b + 1, 0.18, lung);

    // Vessels and airways inside the lungs, placed from a slice-seeded stream.
    PhiloxStream rng(0x5eed'c4e5'7000ull, std::uint64_t(std::int64_t(slice) + (1ll << 32)));
    for (int side = -1; side <= 1; side += 2) {
        for (int k = 0; k < 9; ++k) {
            const double ang = 2 * std::numbers::pi * rng.uniform();
            const double rad = 0.75 * std::sqrt(rng.uniform());
            const double cx = side * 38 + rad * (lung_a - 4) * std::cos(ang);
            const double cy = 6 + rad * (lung_b - 6) * std::sin(ang);
            const double r = 1.2 + 2.3 * rng.uniform();
            const bool airway = rng.uniform() < 0.2;
            add(cx, cy, r, r * (0.7 + 0.3 * rng.uniform()), std::numbers::pi * rng.uniform(),
                airway ? 0.0005 : vessel);
        }
    }

    add(-6 + 3 * std::sin(0.6 * t), -10, 25 + 2 * std::cos(t), 20 + 1.5 * std::sin(t), 0.35, blood);
    add(-4 + 2 * std::sin(0.6 * t), -12, 10, 8, 0.35, contrast); // ventricle
    add(14, -30 + std::sin(t), 6.5, 6.5, 0, contrast);             // aorta
    add(-14, -28, 4, 3.5, 0, blood);                               // vena cava

    add(0, -44, 12 + std::sin(t), 10, 0, bone);    // vertebral body
    add(0, -34.5, 4.2, 3.6, 0, tissue);            // spinal canal
    add(0, -30, 3, 5, 0, cortical);                // spinous process
    add(0, 51 + std::cos(t), 9, 3.5, 0, cortical); // sternum

    for (int k = 0; k < 10; ++k) {
        const double ang = -2.5 + 5.0 * k / 9.0 + 0.06 * std::sin(t + k);
        const double rx = (body_a - 10) * std::sin(ang), ry = (body_b - 9) * std::cos(ang);
        if (std::abs(rx) < 10 && ry > 0) continue;
        add(rx, ry, 4.5, 2.2, ang, bone);
    }
    return p;
}

void Weights::validate() const
{
    if (values.size() != geometry.num_rays()) throw ConfigError("weights: shape does not match geometry");
    for (Eigen::Index i = 0; i < values.size(); ++i)
        if (!(values[i] > 0) || !std::isfinite(values[i]))
            throw ConfigError("weights: entries must be positive and finite");
}

ScanData simulate_counts(const Sinogram& line_integrals, double rho0, double sigma2, std::uint64_t seed)
{
    if (!(rho0 > 0)) throw ConfigError("simulate: rho0 must be > 0");
    if (!(sigma2 >= 0)) throw ConfigError("simulate: sigma2 must be >= 0");
    const Geometry& geo = line_integrals.geometry;
    ScanData out{Sinogram(geo), Sinogram(geo), Weights{geo, Eigen::VectorXd(geo.num_rays())}, 0};
    const double sigma = std::sqrt(sigma2);
    for (Eigen::Index l = 0; l < geo.num_rays(); ++l) {
        PhiloxStream rng(seed, std::uint64_t(l));
        const double mean = rho0 * std::exp(-line_integrals.values[l]);
        double rho = double(rng.poisson(mean));
        if (sigma2 > 0) rho += sigma * rng.normal();
        if (rho < 1.0) {
            rho = 1.0;
            ++out.clamped_rays;
        }
        out.prelog.values[l] = rho;
        out.postlog.values[l] = std::log(rho0 / rho);
        out.weights.values[l] = count_weight(rho, sigma2);
    }
    return out;
}

ScanData simulate_scan(const Image& fine, const Geometry& geo, double rho0, double sigma2, std::uint64_t seed)
{
    if (!(rho0 > 0)) throw ConfigError("simulate: rho0 must be > 0");
    return simulate_counts(project(fine, geo), rho0, sigma2, seed);
}

Image to_hu(const Image& img, double mu_water)
{
    if (!(mu_water > 0)) throw ConfigError("to_hu: mu_water must be > 0");
    return Image(img.grid, img.values * (1000.0 / mu_water));
}

} // namespace sv
