#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <vector>

#include "sparseview/linalg.hpp"
#include "sparseview/metrics.hpp"
#include "sparseview/patches.hpp"
#include "sparseview/simulate.hpp"
#include "sparseview/solvers.hpp"

namespace sv {

/// Spectra of A^H A and Psi~^H Psi~ in a shared orthogonal basis, with the
/// noise variance of y and the error variance of z.
struct Prop1Model {
    Eigen::VectorXd a_spectrum;
    Eigen::VectorXd psi_spectrum;
    double sigma_eps2 = 1;
    double sigma_e2 = 1;
    void validate() const;
};

/// sum_j 1 / (lambda_A(j) / sigma_eps2 + lambda_Psi(j) / sigma_e2)
double mmse_closed_form(const Prop1Model& m);

struct MvueResult {
    Eigen::VectorXd estimate;
    int iterations = 0;
    double relative_residual = 0;
};

/// Solves ((1/se) A^H A + (1/sz) Psi~^H Psi~) x = (1/se) A^H y + (1/sz) Psi~^H z by CG
/// to a relative residual of 1e-10. A second CG solve on a random probe
/// detects a singular normal operator.
MvueResult mvue(const Eigen::VectorXd& y, const Eigen::VectorXd& z, const LinearOperator& a,
                const LinearOperator& psi, double sigma_eps2, double sigma_e2);

/// Periodic 1D convolution x -> kernel (*) x on length n.
LinearOperator circulant_operator(const Eigen::VectorXd& kernel, Eigen::Index n);
/// Eigenvalues of C^T C for the periodic convolution with this kernel: |DFT(kernel)|^2.
Eigen::VectorXd circulant_normal_spectrum(const Eigen::VectorXd& kernel, Eigen::Index n);

struct Prop1Study {
    double closed_form = 0;
    double empirical = 0; // mean over trials of ||x_hat - x_true||^2
    int trials = 0;
};

/// Monte-Carlo check of the closed form on a co-circulant 1D model.
Prop1Study prop1_monte_carlo(const Eigen::VectorXd& a_kernel, const Eigen::VectorXd& psi_kernel, Eigen::Index n,
                             double sigma_eps2, double sigma_e2, int trials, std::uint64_t seed);

struct Histogram {
    std::vector<double> edges;      // bins + 1
    std::vector<long long> counts;  // bins
    long long samples = 0;
    double mean = 0;
    double variance = 0;
    double excess_kurtosis = 0;     // NaN when degenerate
    bool degenerate = false;        // all errors identical
    double laplace_scale = 0;       // mean |e|
    double gaussian_sigma = 0;      // sqrt(mean e^2)
    double loglik_laplace = 0;
    double loglik_gaussian = 0;
};

/// Histogram and distribution fits of the entries of Psi~x - z. The bins span
/// [-range, range]; range <= 0 uses the largest |entry|.
Histogram sparsification_histogram(const Codes& transformed, const Codes& z, int bins = 101, double range = 0);
Histogram sample_histogram(const Eigen::VectorXd& e, int bins = 101, double range = 0);

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h);
/// Two-column "center density" text for plotting, with fit summary comments.
void write_histogram_dat(const std::filesystem::path& path, const Histogram& h);

/// Row-sum majorizer of A^T W A: A^T (W (A 1)).
Eigen::VectorXd majorizer_diagonal(const Projector& a, const Weights& w);

/// lambda_ref scaled by the ratio of ROI means of the new and reference majorizers.
double lambda_transfer(const Weights& w_ref, const Weights& w_new, const Projector& a, const RoiMask& roi,
                       double lambda_ref);

struct CodeSnrResult {
    double snr_db = 0;
    double mse_hu2 = 0; // mean over trials of ||x_hat - x_true||^2 in HU^2
};

/// Corrupts Psi~x_true with white Gaussian noise at each SNR and solves the
/// fixed-code image subproblem for every realization.
std::vector<CodeSnrResult> code_snr_study(const ScanProblem& prob, const TransformOperator& psi_op,
                                          const Image& truth, const Image& init, const std::vector<double>& snr_db,
                                          const FixedCodeOptions& opts, int trials, std::uint64_t seed,
                                          double mu_water = default_mu_water);

} // namespace sv
