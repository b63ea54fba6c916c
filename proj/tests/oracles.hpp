#pragma once

// Reference implementations used only by tests. They share no code with the
// library routines they check.

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "sparseview/geometry.hpp"
#include "sparseview/patches.hpp"

namespace oracle {

/// Dense system matrix by a naive Siddon variant: collect every parametric
/// crossing with the grid lines, sort, and charge each sub-segment to the
/// pixel containing its midpoint.
inline Eigen::MatrixXd dense_system_matrix(const sv::Projector& p)
{
    const sv::Geometry& g = p.geometry();
    const sv::ImageGrid& grid = p.grid();
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(g.num_rays(), grid.size());
    const double xmin = -0.5 * grid.width * grid.dx, ymin = -0.5 * grid.height * grid.dy;
    for (int v = 0; v < g.num_views; ++v)
        for (int c = 0; c < g.num_channels; ++c) {
            const auto s = p.ray_segment(v, c);
            const double vx = s.x1 - s.x0, vy = s.y1 - s.y0, len = std::hypot(vx, vy);
            std::vector<double> al{0.0, 1.0};
            if (vx != 0)
                for (int i = 0; i <= grid.width; ++i) {
                    const double t = (xmin + i * grid.dx - s.x0) / vx;
                    if (t > 0 && t < 1) al.push_back(t);
                }
            if (vy != 0)
                for (int i = 0; i <= grid.height; ++i) {
                    const double t = (ymin + i * grid.dy - s.y0) / vy;
                    if (t > 0 && t < 1) al.push_back(t);
                }
            std::sort(al.begin(), al.end());
            for (std::size_t k = 0; k + 1 < al.size(); ++k) {
                const double dl = (al[k + 1] - al[k]) * len;
                if (dl <= 0) continue;
                const double am = 0.5 * (al[k] + al[k + 1]);
                const double mx = s.x0 + am * vx, my = s.y0 + am * vy;
                const int ix = int(std::floor((mx - xmin) / grid.dx));
                const int iy = int(std::floor((my - ymin) / grid.dy));
                if (ix < 0 || iy < 0 || ix >= grid.width || iy >= grid.height) continue;
                a(Eigen::Index(v) * g.num_channels + c, Eigen::Index(iy) * grid.width + ix) += dl;
            }
        }
    return a;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::mt19937_64& rng, double lo = -1, double hi = 1)
{
    std::uniform_real_distribution<double> u(lo, hi);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v[i] = u(rng);
    return v;
}

/// Dense P (stacked P_j) built straight from the wrap-around definition.
inline Eigen::MatrixXd dense_patch_matrix(const sv::ImageGrid& g, const sv::PatchSpec& s)
{
    const int jw = g.width / s.stride_x, jh = g.height / s.stride_y;
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(Eigen::Index(jw) * jh * s.n(), g.size());
    for (int jy = 0; jy < jh; ++jy)
        for (int jx = 0; jx < jw; ++jx) {
            const Eigen::Index j = Eigen::Index(jy) * jw + jx;
            for (int col = 0; col < s.patch_w; ++col)
                for (int row = 0; row < s.patch_h; ++row) {
                    const int x = (jx * s.stride_x + col) % g.width, y = (jy * s.stride_y + row) % g.height;
                    p(j * s.n() + Eigen::Index(col) * s.patch_h + row, Eigen::Index(y) * g.width + x) = 1;
                }
        }
    return p;
}

/// Dense Psi~ = (I kron Psi) P, rows ordered patch-major like Codes storage.
inline Eigen::MatrixXd dense_psi_tilde(const sv::ImageGrid& g, const sv::PatchSpec& s, const Eigen::MatrixXd& psi)
{
    const Eigen::MatrixXd p = dense_patch_matrix(g, s);
    const Eigen::Index j = p.rows() / s.n();
    Eigen::MatrixXd out(p.rows(), p.cols());
    for (Eigen::Index k = 0; k < j; ++k) out.middleRows(k * s.n(), s.n()) = psi * p.middleRows(k * s.n(), s.n());
    return out;
}

} // namespace oracle
