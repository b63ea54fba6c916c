#pragma once

#include <Eigen/Core>

#include <functional>

namespace sv {

/// y = Op x, written into a caller-sized output.
using ApplyFn = std::function<void(const Eigen::VectorXd&, Eigen::VectorXd&)>;

/// A linear map given by its action and the action of its adjoint.
struct LinearOperator {
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    ApplyFn apply;
    ApplyFn adjoint;

    [[nodiscard]] Eigen::VectorXd operator()(const Eigen::VectorXd& x) const;
    [[nodiscard]] Eigen::VectorXd transpose_times(const Eigen::VectorXd& y) const;
};

LinearOperator identity_operator(Eigen::Index n);

struct CgResult {
    int iterations = 0;
    double relative_residual = 0;
    bool converged = false;
};

/// (Preconditioned) conjugate gradient for a symmetric positive definite
/// operator, warm-started at x. Stops after max_iter iterations or when
/// ||b - G x|| <= rel_tol ||b||. Throws NumericalError on a nonpositive
/// curvature direction.
CgResult conjugate_gradient(const ApplyFn& g, const Eigen::VectorXd& b, Eigen::VectorXd& x, int max_iter,
                            double rel_tol, const ApplyFn& precond = {});

} // namespace sv
