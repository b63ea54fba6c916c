#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "sparseview/errors.hpp"
#include "sparseview/geometry.hpp"
#include "sparseview/metrics.hpp"
#include "sparseview/patches.hpp"
#include "sparseview/simulate.hpp"
#include "sparseview/translearn.hpp"

namespace sv {

struct ReconParams {
    double lambda = 0;
    double gamma_over_lambda = 0;
    double kappa_nu = 30;
    double kappa_mu = 30;
    int outer_iters = 100;
    int admm_iters = 2;
    int pcg_iters = 2;
    double pcg_tol = 0;       // relative residual; 0 runs all pcg_iters steps
    double early_stop = 0;    // stop when ||x_k - x_{k-1}|| / ||x_k|| falls below this; 0 disables

    void validate() const;
};

struct IterationRecord {
    int iteration = 0;
    double objective = 0;
    double rmse_hu = 0;       // NaN without a reference image
    double sparsity_pct = 0;  // nonzero codes, percent; 0 for methods without codes
    int pcg_iterations = 0;   // PCG steps taken during this outer iteration
};

struct Telemetry {
    std::string method;
    std::vector<IterationRecord> records;
    double nu = 0;
    double mu = 0;
    int sparse_coding_increases = 0; // sparse-coding steps that raised the objective
    int objective_increases = 0;     // outer iterations whose objective exceeded the previous one
    int stopped_early_at = 0;        // 0: ran all iterations
    long long clamped_rays = 0;

    void write_csv(const std::filesystem::path& path) const;
};

/// Optional ground truth for RMSE telemetry.
struct Reference {
    const Image* truth = nullptr;
    RoiMask roi;
    double mu_water = default_mu_water;
};

/// ADMM primal, auxiliary and dual variables plus telemetry.
struct SolverState {
    Image x;
    Codes z;
    Eigen::VectorXd d_a, b_a;
    Codes d_psi, b_psi;
    Telemetry telemetry;
};

/// Raised when an iterate or objective becomes non-finite; carries the last state.
class SolverFailure : public NumericalError {
public:
    SolverFailure(const std::string& what, SolverState s) : NumericalError(what), state(std::move(s)) {}
    SolverState state;
};

/// Called after every outer iteration with the current image, Psi~x and z.
using IterationHook = std::function<void(int iteration, const Image& x, const Codes& transformed, const Codes& z)>;

/// Measurements and statistical weights of one scan, with the system matrix.
struct ScanProblem {
    const Projector& a;
    const Sinogram& y;
    const Weights& w;
};

/// PWLS with an l1 sparsification penalty and l0 code penalty, by ADMM with
/// circulant-preconditioned CG image updates.
SolverState pwls_st_l1(const ScanProblem& prob, const Transform& psi, const PatchSpec& spec, const ReconParams& p,
                       const Image& init, const Reference& ref = {}, const IterationHook& hook = {});

/// The image subproblem of pwls_st_l1 for fixed z: min 1/2||y - Ax||_W^2 + lambda ||Psi~x - z||_1,
/// solved by one uninterrupted ADMM run with explicit nu and mu.
struct FixedCodeOptions {
    double lambda = 0;
    double nu = 0;
    double mu = 0;
    int iterations = 1000;
    int pcg_iters = 50;
    double pcg_tol = 1e-12;
};
Image admm_fixed_codes(const ScanProblem& prob, const TransformOperator& psi_op, const Codes& z,
                       const FixedCodeOptions& opts, const Image& init);

struct L2Params {
    double lambda = 0;
    double gamma = 0;
    int outer_iters = 100;
    int pcg_iters = 5;
    double pcg_tol = 0;
    void validate() const;
};

/// PWLS with a quadratic sparsification penalty and l0 code penalty.
SolverState pwls_st_l2(const ScanProblem& prob, const Transform& psi, const PatchSpec& spec, const L2Params& p,
                       const Image& init, const Reference& ref = {}, const IterationHook& hook = {});

struct EpParams {
    double beta = 0;
    double delta = 2e-4;     // 1/mm; 10 HU at mu_water = 0.02
    int iters = 100;
    int line_search_iters = 5;
    void validate() const;
};

/// Hyperbola potential delta^2 (sqrt(1 + (t/delta)^2) - 1).
double ep_potential(double t, double delta);

/// sum_j sum_{k in N_j} phi(x_j - x_k) over 8-neighborhoods with unit weights.
double ep_regularizer(const Image& x, double delta);
Eigen::VectorXd ep_gradient(const Image& x, double delta);

/// PWLS with an edge-preserving neighborhood penalty, by nonlinear CG.
SolverState pwls_ep(const ScanProblem& prob, const EpParams& p, const Image& init, const Reference& ref = {});

/// 1/2 ||y - Ax||_W^2
double data_term(const ScanProblem& prob, const Eigen::VectorXd& x);

} // namespace sv
