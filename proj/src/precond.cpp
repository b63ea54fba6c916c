#include "sparseview/precond.hpp"

#include <cmath>
#include <complex>
#include <sstream>
#include <vector>

#include "sparseview/errors.hpp"

namespace sv {

Circulant2d::Circulant2d(const ImageGrid& grid, Eigen::VectorXd spectrum)
    : grid_(grid), spectrum_(std::move(spectrum)), fft_(std::make_shared<const Fft2d>(grid.width, grid.height))
{
    grid_.validate();
    if (spectrum_.size() != grid_.size()) throw ConfigError("circulant: spectrum length does not match grid");
}

Eigen::VectorXd Circulant2d::filter(const Eigen::VectorXd& x, bool invert) const
{
    if (x.size() != grid_.size()) throw ConfigError("circulant: image size mismatch");
    const std::size_t n = std::size_t(x.size());
    std::vector<std::complex<double>> buf(n);
    for (std::size_t i = 0; i < n; ++i) buf[i] = x[Eigen::Index(i)];
    fft_->forward(buf);
    for (std::size_t i = 0; i < n; ++i) {
        const double s = spectrum_[Eigen::Index(i)];
        buf[i] = invert ? buf[i] / s : buf[i] * s;
    }
    fft_->inverse(buf);
    Eigen::VectorXd out(x.size());
    const double scale = 1.0 / double(n);
    for (std::size_t i = 0; i < n; ++i) out[Eigen::Index(i)] = buf[i].real() * scale;
    return out;
}

Eigen::VectorXd Circulant2d::multiply(const Eigen::VectorXd& x) const { return filter(x, false); }
Eigen::VectorXd Circulant2d::solve(const Eigen::VectorXd& x) const { return filter(x, true); }

Eigen::Index center_pixel(const ImageGrid& grid)
{
    return Eigen::Index(grid.height / 2) * grid.width + grid.width / 2;
}

SpectrumEstimate operator_spectrum(const ApplyFn& op, const ImageGrid& grid)
{
    grid.validate();
    const Eigen::Index n = grid.size();
    Eigen::VectorXd delta = Eigen::VectorXd::Zero(n), response(n);
    delta[center_pixel(grid)] = 1.0;
    op(delta, response);
    if (response.size() != n) throw ConfigError("spectrum: operator returned the wrong size");

    const int cx = grid.width / 2, cy = grid.height / 2;
    std::vector<std::complex<double>> buf(static_cast<std::size_t>(n));
    for (int y = 0; y < grid.height; ++y)
        for (int x = 0; x < grid.width; ++x) {
            const int sx = (x - cx + grid.width) % grid.width;
            const int sy = (y - cy + grid.height) % grid.height;
            buf[std::size_t(sy) * std::size_t(grid.width) + std::size_t(sx)] =
                response[Eigen::Index(y) * grid.width + x];
        }
    Fft2d(grid.width, grid.height).forward(buf);

    SpectrumEstimate est;
    est.values.resize(n);
    double max_re = 0, max_im = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        est.values[i] = buf[std::size_t(i)].real();
        max_re = std::max(max_re, std::abs(buf[std::size_t(i)].real()));
        max_im = std::max(max_im, std::abs(buf[std::size_t(i)].imag()));
    }
    if (!est.values.allFinite()) throw NumericalError("spectrum: non-finite eigenvalue estimate");
    est.imag_residue = max_re > 0 ? max_im / max_re : 0.0;
    return est;
}

Spectra estimate_spectra(const ApplyFn& data_normal, const ApplyFn& psi_normal, const ImageGrid& grid)
{
    const SpectrumEstimate a = operator_spectrum(data_normal, grid);
    const SpectrumEstimate p = operator_spectrum(psi_normal, grid);
    Spectra s;
    const double amax = a.values.maxCoeff();
    if (!(amax > 0)) throw NumericalError("spectrum: data-term spectrum has no positive entry");
    s.lambda_a = a.values.cwiseMax(spectrum_floor * amax);
    s.lambda_psi = p.values.cwiseMax(0.0);
    s.imag_residue = std::max(a.imag_residue, p.imag_residue);
    return s;
}

CirculantPrecond::CirculantPrecond(const ImageGrid& grid, Eigen::VectorXd la, Eigen::VectorXd lp, double nu_)
    : lambda_a(std::move(la)), lambda_psi(std::move(lp)), nu(nu_), op_(grid, lambda_a + nu_ * lambda_psi)
{
    if (lambda_a.size() != grid.size() || lambda_psi.size() != grid.size())
        throw ConfigError("preconditioner: spectrum length does not match grid");
    if (!(nu >= 0)) throw ConfigError("preconditioner: nu must be >= 0");
    if (!(op_.spectrum().minCoeff() > 0))
        throw NumericalError("preconditioner: combined spectrum is not positive");
}

Eigen::VectorXd apply_precond(const Eigen::VectorXd& residual, const CirculantPrecond& m) { return m.apply(residual); }

double spectrum_condition(const Eigen::VectorXd& s)
{
    const double lo = s.minCoeff(), hi = s.maxCoeff();
    if (!(lo > 0)) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

double select_nu(const Eigen::VectorXd& lambda_a, const Eigen::VectorXd& lambda_psi, double kappa)
{
    const double amax = lambda_a.maxCoeff(), amin = lambda_a.minCoeff();
    const double pmax = lambda_psi.maxCoeff(), pmin = lambda_psi.minCoeff();
    const double num = amax - kappa * amin;
    const double den = kappa * pmin - pmax;
    if (!(num > 0) || !(den > 0)) {
        std::ostringstream msg;
        msg << "kappa_nu = " << kappa << " is infeasible; it must lie in (" << (pmin > 0 ? pmax / pmin : INFINITY)
            << ", " << (amin > 0 ? amax / amin : INFINITY) << ")";
        throw ConfigError(msg.str());
    }
    return num / den;
}

double select_mu(const Eigen::VectorXd& weights, double kappa)
{
    const double wmax = weights.maxCoeff(), wmin = weights.minCoeff();
    const double kw = wmax / wmin;
    if (!(kappa > 1) || !(wmax - kappa * wmin > 0)) {
        std::ostringstream msg;
        msg << "kappa_mu = " << kappa << " is infeasible; it must lie in (1, " << kw << ")";
        throw ConfigError(msg.str());
    }
    return (wmax - kappa * wmin) / (kappa - 1);
}

} // namespace sv
