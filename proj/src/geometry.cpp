#include "sparseview/geometry.hpp"

#include <numbers>
#include <string>

#include "sparseview/fft.hpp"

namespace sv {

void ImageGrid::validate() const
{
    if (width < 1 || height < 1) throw ConfigError("image grid: width and height must be positive");
    if (!(dx > 0) || !(dy > 0)) throw ConfigError("image grid: pixel spacing must be positive");
}

Image::Image(const ImageGrid& g, Eigen::VectorXd v) : grid(g), values(std::move(v))
{
    g.validate();
    if (values.size() != g.size()) throw ConfigError("image: value count does not match grid");
}

Sinogram::Sinogram(const Geometry& g, Eigen::VectorXd v) : geometry(g), values(std::move(v))
{
    if (values.size() != g.num_rays()) throw ConfigError("sinogram: value count does not match geometry");
}

namespace {

std::vector<double> uniform_angles(int views, double span)
{
    std::vector<double> a(std::size_t(std::max(views, 0)));
    for (int i = 0; i < views; ++i) a[std::size_t(i)] = span * i / views;
    return a;
}

} // namespace

Geometry Geometry::parallel(int views, int channels, double spacing)
{
    Geometry g;
    g.kind = ScanKind::parallel;
    g.num_views = views;
    g.num_channels = channels;
    g.channel_spacing = spacing;
    g.view_angles = uniform_angles(views, std::numbers::pi);
    g.validate();
    return g;
}

Geometry Geometry::fan_flat(int views, int channels, double spacing, double source_to_iso,
                            double source_to_detector)
{
    Geometry g;
    g.kind = ScanKind::fan_flat;
    g.num_views = views;
    g.num_channels = channels;
    g.channel_spacing = spacing;
    g.source_to_iso = source_to_iso;
    g.source_to_detector = source_to_detector;
    g.view_angles = uniform_angles(views, 2 * std::numbers::pi);
    g.validate();
    return g;
}

double Geometry::view_step() const
{
    return (kind == ScanKind::parallel ? std::numbers::pi : 2 * std::numbers::pi) / num_views;
}

void Geometry::validate() const
{
    if (num_views < 1) throw ConfigError("geometry: num_views must be >= 1");
    if (num_channels < 1) throw ConfigError("geometry: num_channels must be >= 1");
    if (!(channel_spacing > 0)) throw ConfigError("geometry: channel_spacing must be > 0");
    if (kind == ScanKind::fan_flat) {
        if (!(source_to_iso > 0)) throw ConfigError("geometry: source_to_iso must be > 0");
        if (!(source_to_detector > source_to_iso))
            throw ConfigError("geometry: source_to_detector must exceed source_to_iso");
    }
    if (view_angles.size() != std::size_t(num_views))
        throw ConfigError("geometry: view_angles has " + std::to_string(view_angles.size()) +
                          " entries, expected " + std::to_string(num_views));
    const double step = view_step();
    for (int i = 0; i < num_views; ++i) {
        const double expected = view_angles[0] + step * i;
        if (std::abs(view_angles[std::size_t(i)] - expected) > 1e-9)
            throw ConfigError("geometry: view_angles must be uniformly spaced and increasing");
    }
}

// --- projector -------------------------------------------------------------

Projector::Projector(Geometry geometry, ImageGrid grid) : geo_(std::move(geometry)), grid_(grid)
{
    geo_.validate();
    grid_.validate();
    const double half_diag = 0.5 * std::hypot(grid_.width * grid_.dx, grid_.height * grid_.dy);
    if (geo_.kind == ScanKind::fan_flat && geo_.source_to_iso <= half_diag)
        throw ConfigError("projector: source lies inside the image support");

    rays_.resize(static_cast<std::size_t>(geo_.num_rays()));
    for (int v = 0; v < geo_.num_views; ++v)
        for (int c = 0; c < geo_.num_channels; ++c)
            rays_[std::size_t(v) * std::size_t(geo_.num_channels) + std::size_t(c)] = ray_segment(v, c);
}

Projector::Segment Projector::ray_segment(int view, int channel) const
{
    const double beta = geo_.view_angles[std::size_t(view)];
    const double ex = std::cos(beta), ey = std::sin(beta);
    const double ux = -ey, uy = ex;
    const double off = geo_.channel_offset(channel);
    if (geo_.kind == ScanKind::parallel) {
        const double reach = std::hypot(grid_.width * grid_.dx, grid_.height * grid_.dy) + 1.0;
        const double cx = off * ex, cy = off * ey;
        return {cx - reach * ux, cy - reach * uy, cx + reach * ux, cy + reach * uy};
    }
    const double r = geo_.source_to_iso;
    const double back = geo_.source_to_detector - r;
    return {r * ex, r * ey, -back * ex + off * ux, -back * ey + off * uy};
}

void Projector::forward(std::span<const double> x, std::span<double> y) const
{
    if (x.size() != std::size_t(grid_.size()) || y.size() != std::size_t(geo_.num_rays()))
        throw ConfigError("project: image/geometry size mismatch");
    for (Eigen::Index r = 0; r < geo_.num_rays(); ++r) {
        double acc = 0.0;
        trace(r, [&](Eigen::Index j, double w) { acc += w * x[std::size_t(j)]; });
        y[std::size_t(r)] = acc;
    }
}

void Projector::adjoint(std::span<const double> y, std::span<double> x) const
{
    if (x.size() != std::size_t(grid_.size()) || y.size() != std::size_t(geo_.num_rays()))
        throw ConfigError("backproject: image/geometry size mismatch");
    std::fill(x.begin(), x.end(), 0.0);
    for (Eigen::Index r = 0; r < geo_.num_rays(); ++r) {
        const double v = y[std::size_t(r)];
        if (v == 0.0) continue;
        trace(r, [&](Eigen::Index j, double w) { x[std::size_t(j)] += w * v; });
    }
}

Eigen::VectorXd Projector::forward(const Eigen::VectorXd& x) const
{
    Eigen::VectorXd y(geo_.num_rays());
    forward(std::span<const double>(x.data(), std::size_t(x.size())), std::span<double>(y.data(), std::size_t(y.size())));
    return y;
}

Eigen::VectorXd Projector::adjoint(const Eigen::VectorXd& y) const
{
    Eigen::VectorXd x(grid_.size());
    adjoint(std::span<const double>(y.data(), std::size_t(y.size())), std::span<double>(x.data(), std::size_t(x.size())));
    return x;
}

Sinogram project(const Image& img, const Geometry& geo)
{
    Projector p(geo, img.grid);
    return Sinogram(geo, p.forward(img.values));
}

Image backproject(const Sinogram& sino, const ImageGrid& grid)
{
    Projector p(sino.geometry, grid);
    return Image(grid, p.adjoint(sino.values));
}

// --- FBP ---------------------------------------------------------------------

namespace {

/// Frequency response of the band-limited ramp (spatial Ram-Lak kernel with
/// sample spacing tau) apodized by a Hann window, on an n-point DFT grid.
std::vector<double> hann_ramp_response(int nc, int n, double tau, double cutoff)
{
    std::vector<std::complex<double>> h(std::size_t(n), 0.0);
    h[0] = 1.0 / (4 * tau * tau);
    for (int k = 1; k < nc; ++k) {
        if (k % 2 == 0) continue;
        const double v = -1.0 / (k * k * std::numbers::pi * std::numbers::pi * tau * tau);
        h[std::size_t(k)] = v;
        h[std::size_t(n - k)] = v;
    }
    Fft1d fft(n);
    fft.forward(h);
    std::vector<double> resp(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double f = double(std::min(k, n - k)) / n; // cycles per sample, in [0, 0.5]
        const double fc = 0.5 * cutoff;
        const double window = f <= fc ? 0.5 * (1 + std::cos(std::numbers::pi * f / fc)) : 0.0;
        resp[std::size_t(k)] = h[std::size_t(k)].real() * window * tau;
    }
    return resp;
}

void filter_rows(Eigen::VectorXd& rows, int nv, int nc, const std::vector<double>& resp)
{
    const int n = int(resp.size());
    Fft1d fft(n);
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(n));
    for (int v = 0; v < nv; ++v) {
        std::fill(buf.begin(), buf.end(), 0.0);
        for (int c = 0; c < nc; ++c) buf[std::size_t(c)] = rows[Eigen::Index(v) * nc + c];
        fft.forward(buf);
        for (int k = 0; k < n; ++k) buf[std::size_t(k)] *= resp[std::size_t(k)];
        fft.inverse(buf);
        for (int c = 0; c < nc; ++c) rows[Eigen::Index(v) * nc + c] = buf[std::size_t(c)].real() / n;
    }
}

double interp(const Eigen::VectorXd& rows, int v, int nc, double pos)
{
    if (pos < 0.0 || pos > nc - 1) return 0.0;
    if (nc == 1) return rows[v];
    const int i0 = std::min(int(pos), nc - 2);
    const double t = pos - i0;
    return (1 - t) * rows[Eigen::Index(v) * nc + i0] + t * rows[Eigen::Index(v) * nc + i0 + 1];
}

} // namespace

Image fbp(const Sinogram& sino, const ImageGrid& out, const FbpOptions& opts)
{
    const Geometry& g = sino.geometry;
    g.validate();
    out.validate();
    if (g.num_views < 2) throw ConfigError("fbp: at least 2 views are required");
    if (!(opts.cutoff > 0 && opts.cutoff <= 1)) throw ConfigError("fbp: cutoff must be in (0, 1]");
    if (sino.values.size() != g.num_rays()) throw ConfigError("fbp: sinogram shape mismatch");

    const int nv = g.num_views, nc = g.num_channels;
    int n = 1;
    while (n < 2 * nc) n *= 2;

    Image img(out);
    Eigen::VectorXd q = sino.values;

    if (g.kind == ScanKind::parallel) {
        filter_rows(q, nv, nc, hann_ramp_response(nc, n, g.channel_spacing, opts.cutoff));
        const double weight = std::numbers::pi / nv;
        for (int v = 0; v < nv; ++v) {
            const double c = std::cos(g.view_angles[std::size_t(v)]), s = std::sin(g.view_angles[std::size_t(v)]);
            for (int iy = 0; iy < out.height; ++iy) {
                const double y = out.y_center(iy);
                for (int ix = 0; ix < out.width; ++ix) {
                    const double t = out.x_center(ix) * c + y * s;
                    img.at(ix, iy) += weight * interp(q, v, nc, t / g.channel_spacing + 0.5 * (nc - 1));
                }
            }
        }
        return img;
    }

    // Fan-flat: rebin the detector coordinate onto the plane through the isocenter.
    const double r = g.source_to_iso;
    const double tau = g.channel_spacing * r / g.source_to_detector;
    for (int v = 0; v < nv; ++v)
        for (int c = 0; c < nc; ++c) {
            const double u = (c - 0.5 * (nc - 1)) * tau;
            q[Eigen::Index(v) * nc + c] *= r / std::sqrt(r * r + u * u);
        }
    filter_rows(q, nv, nc, hann_ramp_response(nc, n, tau, opts.cutoff));
    const double weight = 0.5 * g.view_step();
    for (int v = 0; v < nv; ++v) {
        const double ex = std::cos(g.view_angles[std::size_t(v)]), ey = std::sin(g.view_angles[std::size_t(v)]);
        for (int iy = 0; iy < out.height; ++iy) {
            const double y = out.y_center(iy);
            for (int ix = 0; ix < out.width; ++ix) {
                const double x = out.x_center(ix);
                const double along = r - (x * ex + y * ey);
                const double u = r * (-x * ey + y * ex) / along;
                const double mag = r / along;
                img.at(ix, iy) += weight * mag * mag * interp(q, v, nc, u / tau + 0.5 * (nc - 1));
            }
        }
    }
    return img;
}

} // namespace sv
