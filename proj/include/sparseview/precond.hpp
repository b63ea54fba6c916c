#pragma once

#include <Eigen/Core>

#include <memory>

#include "sparseview/fft.hpp"
#include "sparseview/geometry.hpp"
#include "sparseview/linalg.hpp"

namespace sv {

/// Convolution-type operator on an image grid, diagonalized by the 2D DFT.
class Circulant2d {
public:
    Circulant2d(const ImageGrid& grid, Eigen::VectorXd spectrum);

    [[nodiscard]] const ImageGrid& grid() const { return grid_; }
    [[nodiscard]] const Eigen::VectorXd& spectrum() const { return spectrum_; }
    /// Q^H diag(spectrum) Q x
    [[nodiscard]] Eigen::VectorXd multiply(const Eigen::VectorXd& x) const;
    /// Q^H diag(spectrum)^-1 Q x
    [[nodiscard]] Eigen::VectorXd solve(const Eigen::VectorXd& x) const;

private:
    Eigen::VectorXd filter(const Eigen::VectorXd& x, bool invert) const;

    ImageGrid grid_;
    Eigen::VectorXd spectrum_;
    std::shared_ptr<const Fft2d> fft_;
};

/// Pixel used for the delta response: (floor(W/2), floor(H/2)).
Eigen::Index center_pixel(const ImageGrid& grid);

struct SpectrumEstimate {
    Eigen::VectorXd values;
    double imag_residue = 0; // max |Im| / max |Re| of the discarded imaginary part
};

/// Real part of the DFT of op(e_c), circularly shifted so the delta sits at
/// index 0. Exact eigenvalues when op is BCCB.
SpectrumEstimate operator_spectrum(const ApplyFn& op, const ImageGrid& grid);

struct Spectra {
    Eigen::VectorXd lambda_a;   // floored at 1e-8 max
    Eigen::VectorXd lambda_psi; // floored at 0
    double imag_residue = 0;
};

/// Eigenvalue estimates for A^T A (any normal operator of the data term)
/// and Psi~^T Psi~.
Spectra estimate_spectra(const ApplyFn& data_normal, const ApplyFn& psi_normal, const ImageGrid& grid);

/// Relative floor applied to data-term spectra.
inline constexpr double spectrum_floor = 1e-8;

/// M = Q^H (Lambda_A + nu Lambda_Psi)^-1 Q.
struct CirculantPrecond {
    Eigen::VectorXd lambda_a;
    Eigen::VectorXd lambda_psi;
    double nu = 0;

    CirculantPrecond(const ImageGrid& grid, Eigen::VectorXd lambda_a, Eigen::VectorXd lambda_psi, double nu);

    [[nodiscard]] Eigen::VectorXd apply(const Eigen::VectorXd& residual) const { return op_.solve(residual); }
    [[nodiscard]] const Circulant2d& combined() const { return op_; }

private:
    Circulant2d op_;
};

Eigen::VectorXd apply_precond(const Eigen::VectorXd& residual, const CirculantPrecond& m);

/// nu such that the Weyl bound on kappa(Lambda_A + nu Lambda_Psi) equals kappa_des.
double select_nu(const Eigen::VectorXd& lambda_a, const Eigen::VectorXd& lambda_psi, double kappa_des);

/// mu such that kappa(W + mu I) equals kappa_des.
double select_mu(const Eigen::VectorXd& weights, double kappa_des);

/// max / min of a positive spectrum.
double spectrum_condition(const Eigen::VectorXd& s);

} // namespace sv
