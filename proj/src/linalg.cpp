#include "sparseview/linalg.hpp"

#include <cmath>

#include "sparseview/errors.hpp"

namespace sv {

Eigen::VectorXd LinearOperator::operator()(const Eigen::VectorXd& x) const
{
    Eigen::VectorXd y(rows);
    apply(x, y);
    return y;
}

Eigen::VectorXd LinearOperator::transpose_times(const Eigen::VectorXd& y) const
{
    Eigen::VectorXd x(cols);
    adjoint(y, x);
    return x;
}

LinearOperator identity_operator(Eigen::Index n)
{
    auto id = [](const Eigen::VectorXd& in, Eigen::VectorXd& out) { out = in; };
    return {n, n, id, id};
}

CgResult conjugate_gradient(const ApplyFn& g, const Eigen::VectorXd& b, Eigen::VectorXd& x, int max_iter,
                            double rel_tol, const ApplyFn& precond)
{
    CgResult res;
    const double bnorm = b.norm();
    if (bnorm == 0.0) {
        x.setZero(b.size());
        res.converged = true;
        return res;
    }
    if (x.size() != b.size()) x.setZero(b.size());

    Eigen::VectorXd r(b.size()), q(b.size()), s(b.size());
    g(x, q);
    r = b - q;
    auto precondition = [&](const Eigen::VectorXd& in, Eigen::VectorXd& out) {
        if (precond)
            precond(in, out);
        else
            out = in;
    };
    precondition(r, s);
    Eigen::VectorXd p = s;
    double rs = r.dot(s);
    res.relative_residual = r.norm() / bnorm;
    if (res.relative_residual <= rel_tol) {
        res.converged = true;
        return res;
    }
    for (int k = 0; k < max_iter; ++k) {
        g(p, q);
        const double curv = p.dot(q);
        if (!(curv > 0)) {
            if (r.norm() == 0.0) break;
            throw NumericalError("conjugate gradient: operator is not positive definite");
        }
        const double alpha = rs / curv;
        x += alpha * p;
        r -= alpha * q;
        ++res.iterations;
        res.relative_residual = r.norm() / bnorm;
        if (res.relative_residual <= rel_tol) {
            res.converged = true;
            break;
        }
        precondition(r, s);
        const double rs_new = r.dot(s);
        p = s + (rs_new / rs) * p;
        rs = rs_new;
    }
    if (!std::isfinite(res.relative_residual)) throw NumericalError("conjugate gradient: residual is not finite");
    return res;
}

} // namespace sv
