#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <vector>

#include "sparseview/patches.hpp"

namespace sv {

/// Learned square sparsifying transform with its training metadata.
struct Transform {
    Eigen::MatrixXd psi;
    int patch_w = 0;
    int patch_h = 0;
    double tau = 0;
    double gamma_prime = 0;
    double xi = 0;
    int iterations = 0;
    double condition_number = 0;

    [[nodiscard]] int n() const { return int(psi.rows()); }
};

/// Orthonormal separable 2D DCT-II acting on column-major vectorized patches.
Eigen::MatrixXd dct_matrix(int patch_w, int patch_h);

struct LearnOptions {
    double tau = 0;          // absolute weight; if <= 0, tau_scale * ||X||_F^2 is used
    double tau_scale = 1.0;
    double gamma_prime = 0;  // l0 weight; codes are hard-thresholded at sqrt(gamma_prime)
    double xi = 1.0;
    int iterations = 100;
    Eigen::MatrixXd init;    // empty: DCT
    bool subtract_mean = false;
};

struct LearnTrace {
    /// Objective after each half-step: [initial, after coding 1, after update 1, ...].
    std::vector<double> objective;
    int monotonicity_violations = 0;
    double best_objective = 0;
};

/// Objective pieces of the transform-learning problem for X (n x J') and codes Z.
struct LearnObjective {
    double sparsification = 0; // ||Psi X - Z||_F^2
    double sparsity = 0;       // gamma' ||Z||_0
    double regularizer = 0;    // tau (xi ||Psi||_F^2 - log|det Psi|)
    [[nodiscard]] double total() const { return sparsification + sparsity + regularizer; }
};

LearnObjective learn_objective(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                               double gamma_prime, double tau, double xi);

/// Closed-form minimizer over Psi of ||Psi X - Z||^2 + tau (xi ||Psi||^2 - log|det Psi|).
Eigen::MatrixXd transform_update(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, double tau, double xi);

/// Alternating minimization. train_patches is J' x n (one patch per row).
/// Returns the iterate with the lowest objective.
Transform learn_transform(const Codes& train_patches, int patch_w, int patch_h, const LearnOptions& opts,
                          LearnTrace* trace = nullptr);

/// Patches of several images stacked into one training matrix.
Codes training_patches(const std::vector<Image>& images, const PatchSpec& spec);

double condition_number(const Eigen::MatrixXd& m);

void write_transform(const std::filesystem::path& path, const Transform& t);
Transform read_transform(const std::filesystem::path& path);

} // namespace sv
