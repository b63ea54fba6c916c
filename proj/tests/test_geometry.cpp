#include <doctest.h>

#include <numbers>

#include "oracles.hpp"
#include "sparseview/geometry.hpp"
#include "sparseview/simulate.hpp"

using namespace sv;

namespace {

Geometry small_fan(int views = 24, int channels = 40) { return Geometry::fan_flat(views, channels, 1.3, 60, 110); }

double adjoint_gap(const Projector& p, std::mt19937_64& rng)
{
    const Eigen::VectorXd x = oracle::random_vector(p.grid().size(), rng);
    const Eigen::VectorXd u = oracle::random_vector(p.geometry().num_rays(), rng);
    const Eigen::VectorXd ax = p.forward(x), atu = p.adjoint(u);
    return std::abs(ax.dot(u) - x.dot(atu)) / (ax.norm() * u.norm() + x.norm() * atu.norm());
}

} // namespace

TEST_CASE("projector matches dense naive-Siddon assembly")
{
    const ImageGrid grid{16, 16, 1.0, 1.0};
    for (const Geometry& geo : {Geometry::parallel(18, 30, 0.7), small_fan()}) {
        const Projector p(geo, grid);
        const Eigen::MatrixXd dense = oracle::dense_system_matrix(p);
        Eigen::MatrixXd fwd(geo.num_rays(), grid.size());
        for (Eigen::Index j = 0; j < grid.size(); ++j) fwd.col(j) = p.forward(Eigen::VectorXd(Eigen::VectorXd::Unit(grid.size(), j)));
        CHECK((fwd - dense).cwiseAbs().maxCoeff() <= 1e-12 * dense.cwiseAbs().maxCoeff());

        std::mt19937_64 rng(7);
        const Eigen::VectorXd x = oracle::random_vector(grid.size(), rng);
        const Eigen::VectorXd u = oracle::random_vector(geo.num_rays(), rng);
        CHECK((p.forward(x) - dense * x).norm() <= 1e-12 * (dense * x).norm());
        CHECK((p.adjoint(u) - dense.transpose() * u).norm() <= 1e-12 * (dense.transpose() * u).norm());
    }
}

TEST_CASE("adjoint identity on random pairs")
{
    std::mt19937_64 rng(11);
    const ImageGrid grid{32, 24, 0.9, 1.1};
    for (const Geometry& geo : {Geometry::parallel(30, 50, 0.8), Geometry::fan_flat(36, 60, 1.1, 120, 200)}) {
        const Projector p(geo, grid);
        for (int t = 0; t < 10; ++t) CHECK(adjoint_gap(p, rng) <= 1e-10);
    }
}

TEST_CASE("axis-aligned ray through a uniform image")
{
    const ImageGrid grid{10, 8, 0.5, 0.5};
    // View 0 of a parallel scan: rays run along +y, i.e. down a pixel column.
    const Geometry geo = Geometry::parallel(4, 1, 1.0);
    const Image img(grid, Eigen::VectorXd::Constant(grid.size(), 0.02));
    // The single channel sits at offset 0, which is a column boundary for an
    // even width; shift it onto a column center with a 2-channel detector instead.
    const Geometry geo2 = Geometry::parallel(2, 2, 0.5);
    const Sinogram s = project(img, geo2);
    CHECK(s.at(0, 0) == doctest::Approx(0.02 * 8 * 0.5).epsilon(1e-12));
    CHECK(s.at(0, 1) == doctest::Approx(0.02 * 8 * 0.5).epsilon(1e-12));
    // View pi/2: rays run along -x across a row of 10 pixels.
    CHECK(s.at(1, 0) == doctest::Approx(0.02 * 10 * 0.5).epsilon(1e-12));
    (void)geo;
}

TEST_CASE("zero inputs and basis vectors")
{
    const ImageGrid grid{12, 12, 1, 1};
    const Projector p(small_fan(), grid);
    CHECK(p.forward(Eigen::VectorXd::Zero(grid.size())).cwiseAbs().maxCoeff() == 0.0);
    CHECK(p.adjoint(Eigen::VectorXd::Zero(p.geometry().num_rays())).cwiseAbs().maxCoeff() == 0.0);

    const Eigen::MatrixXd dense = oracle::dense_system_matrix(p);
    const Eigen::Index ray = 5 * 40 + 17;
    const Eigen::VectorXd bp = p.adjoint(Eigen::VectorXd(Eigen::VectorXd::Unit(p.geometry().num_rays(), ray)));
    CHECK((bp - dense.row(ray).transpose()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("projection of a nonnegative image is nonnegative")
{
    std::mt19937_64 rng(3);
    const ImageGrid grid{20, 20, 1, 1};
    const Projector p(small_fan(30, 50), grid);
    const Eigen::VectorXd x = oracle::random_vector(grid.size(), rng, 0, 1);
    CHECK(p.forward(x).minCoeff() >= 0.0);
}

TEST_CASE("rotating the image by a quarter turn shifts the views")
{
    std::mt19937_64 rng(5);
    const int w = 24;
    const ImageGrid grid{w, w, 1, 1};
    const int nv = 40;
    const Projector p(Geometry::fan_flat(nv, 48, 1.2, 80, 150), grid);
    const Eigen::VectorXd x = oracle::random_vector(grid.size(), rng, 0, 1);
    Eigen::VectorXd xr(grid.size());
    for (int iy = 0; iy < w; ++iy)
        for (int ix = 0; ix < w; ++ix) xr[Eigen::Index(ix) * w + (w - 1 - iy)] = x[Eigen::Index(iy) * w + ix];
    const Eigen::VectorXd s = p.forward(x), sr = p.forward(xr);
    double worst = 0;
    for (int v = 0; v < nv; ++v)
        for (int c = 0; c < 48; ++c)
            worst = std::max(worst, std::abs(sr[Eigen::Index(v) * 48 + c] - s[Eigen::Index((v - nv / 4 + nv) % nv) * 48 + c]));
    CHECK(worst <= 1e-6);
}

TEST_CASE("shape mismatches are configuration errors")
{
    const Projector p(Geometry::parallel(4, 5, 1), ImageGrid{6, 6, 1, 1});
    CHECK_THROWS_AS((void)p.forward(Eigen::VectorXd::Zero(35)), ConfigError);
    CHECK_THROWS_AS((void)p.adjoint(Eigen::VectorXd::Zero(19)), ConfigError);
    CHECK_THROWS_AS(Geometry::parallel(0, 5, 1), ConfigError);
    CHECK_THROWS_AS(Geometry::fan_flat(4, 5, 1, 10, 5), ConfigError);
    CHECK_THROWS_AS(Projector(Geometry::fan_flat(4, 5, 1, 3, 8), ImageGrid{10, 10, 1, 1}), ConfigError);
}

TEST_CASE("fbp basics")
{
    const ImageGrid grid{32, 32, 1, 1};
    const Geometry geo = Geometry::parallel(60, 48, 1.0);
    Sinogram zero(geo);
    CHECK(fbp(zero, grid).values.cwiseAbs().maxCoeff() == 0.0);

    std::mt19937_64 rng(9);
    const Sinogram s(geo, oracle::random_vector(geo.num_rays(), rng));
    const Image a = fbp(s, grid), b = fbp(Sinogram(geo, 3.5 * s.values), grid);
    CHECK((b.values - 3.5 * a.values).cwiseAbs().maxCoeff() <= 1e-12 * b.values.cwiseAbs().maxCoeff());

    CHECK_THROWS_AS(fbp(Sinogram(Geometry::parallel(1, 8, 1)), grid), ConfigError);
    CHECK_THROWS_AS(fbp(zero, grid, {0.0}), ConfigError);
}

namespace {

/// Sinogram of a centered disk from its analytic chord lengths.
Sinogram analytic_disk(const Geometry& geo, double r, double mu)
{
    Sinogram s(geo);
    for (int v = 0; v < geo.num_views; ++v)
        for (int c = 0; c < geo.num_channels; ++c) {
            double dist;
            const double off = geo.channel_offset(c);
            if (geo.kind == ScanKind::parallel) {
                dist = std::abs(off);
            } else {
                // Distance from the isocenter to the line source -> detector point.
                const double d = geo.source_to_detector;
                dist = geo.source_to_iso * std::abs(off) / std::hypot(d, off);
            }
            s.at(v, c) = dist < r ? 2 * mu * std::sqrt(r * r - dist * dist) : 0.0;
        }
    return s;
}

double region_mean(const Image& img, double rmax)
{
    double acc = 0;
    int n = 0;
    for (int iy = 0; iy < img.grid.height; ++iy)
        for (int ix = 0; ix < img.grid.width; ++ix)
            if (std::hypot(img.grid.x_center(ix), img.grid.y_center(iy)) < rmax) {
                acc += img.at(ix, iy);
                ++n;
            }
    return acc / n;
}

} // namespace

TEST_CASE("fbp of an analytic disk recovers its attenuation")
{
    const ImageGrid grid{128, 128, 1, 1};
    const double r = 40, mu = 0.02;
    const Image par = fbp(analytic_disk(Geometry::parallel(360, 192, 1.0), r, mu), grid);
    CHECK(region_mean(par, 0.7 * r) == doctest::Approx(mu).epsilon(0.05));
    const Image fan = fbp(analytic_disk(Geometry::fan_flat(360, 256, 1.5, 300, 500), r, mu), grid);
    CHECK(region_mean(fan, 0.7 * r) == doctest::Approx(mu).epsilon(0.05));
    // Outside the disk the image is near zero.
    double outside = 0;
    int n = 0;
    for (int iy = 0; iy < 128; ++iy)
        for (int ix = 0; ix < 128; ++ix) {
            const double rr = std::hypot(grid.x_center(ix), grid.y_center(iy));
            if (rr > 1.3 * r && rr < 60) {
                outside += std::abs(par.at(ix, iy));
                ++n;
            }
        }
    CHECK(outside / n < 0.05 * mu);
}
