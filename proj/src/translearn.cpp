#include "sparseview/translearn.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/SVD>

#include <cmath>
#include <numbers>

#include "sparseview/io.hpp"
#include "sparseview/shrinkage.hpp"

namespace sv {

namespace {

Eigen::MatrixXd dct_1d(int n)
{
    Eigen::MatrixXd c(n, n);
    for (int k = 0; k < n; ++k) {
        const double scale = k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
        for (int i = 0; i < n; ++i) c(k, i) = scale * std::cos(std::numbers::pi * (2 * i + 1) * k / (2.0 * n));
    }
    return c;
}

double log_abs_det(const Eigen::MatrixXd& m)
{
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(m);
    const Eigen::MatrixXd& u = lu.matrixLU();
    double s = 0;
    for (Eigen::Index i = 0; i < u.rows(); ++i) s += std::log(std::abs(u(i, i)));
    return s;
}

} // namespace

Eigen::MatrixXd dct_matrix(int patch_w, int patch_h)
{
    if (patch_w < 1 || patch_h < 1) throw ConfigError("dct_matrix: patch dimensions must be positive");
    const Eigen::MatrixXd cw = dct_1d(patch_w), ch = dct_1d(patch_h);
    // Column-major vectorization: vec(Ch P Cw^T) = (Cw kron Ch) vec(P).
    const int n = patch_w * patch_h;
    Eigen::MatrixXd d(n, n);
    for (int a = 0; a < patch_w; ++a)
        for (int b = 0; b < patch_w; ++b) d.block(a * patch_h, b * patch_h, patch_h, patch_h) = cw(a, b) * ch;
    return d;
}

double condition_number(const Eigen::MatrixXd& m)
{
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m);
    const auto& s = svd.singularValues();
    return s(s.size() - 1) > 0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
}

LearnObjective learn_objective(const Eigen::MatrixXd& psi, const Eigen::MatrixXd& x, const Eigen::MatrixXd& z,
                               double gamma_prime, double tau, double xi)
{
    LearnObjective o;
    o.sparsification = (psi * x - z).squaredNorm();
    Eigen::Index nnz = (z.array() != 0.0).count();
    o.sparsity = gamma_prime * double(nnz);
    o.regularizer = tau * (xi * psi.squaredNorm() - log_abs_det(psi));
    return o;
}

namespace {

struct UpdateFactor {
    Eigen::MatrixXd l_inv;
};

UpdateFactor factor(const Eigen::MatrixXd& xxt, double tau, double xi)
{
    const Eigen::Index n = xxt.rows();
    Eigen::MatrixXd g = xxt;
    g.diagonal().array() += tau * xi;
    Eigen::LLT<Eigen::MatrixXd> llt(g);
    if (llt.info() != Eigen::Success) throw NumericalError("transform update: X X^T + tau xi I is not positive definite");
    Eigen::MatrixXd l_inv = Eigen::MatrixXd::Identity(n, n);
    llt.matrixL().solveInPlace(l_inv);
    return {std::move(l_inv)};
}

Eigen::MatrixXd closed_form(const UpdateFactor& f, const Eigen::MatrixXd& xzt, double tau)
{
    const Eigen::MatrixXd m = f.l_inv * xzt;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Eigen::MatrixXd u = svd.matrixU(), v = svd.matrixV();
    const Eigen::VectorXd s = svd.singularValues();
    // Fix the SVD sign ambiguity: largest-magnitude entry of each U column positive.
    for (Eigen::Index k = 0; k < u.cols(); ++k) {
        Eigen::Index imax;
        u.col(k).cwiseAbs().maxCoeff(&imax);
        if (u(imax, k) < 0) {
            u.col(k) *= -1;
            v.col(k) *= -1;
        }
    }
    const Eigen::VectorXd d = 0.5 * (s.array() + (s.array().square() + 2 * tau).sqrt()).matrix();
    return v * d.asDiagonal() * u.transpose() * f.l_inv;
}

} // namespace

Eigen::MatrixXd transform_update(const Eigen::MatrixXd& x, const Eigen::MatrixXd& z, double tau, double xi)
{
    if (!(tau > 0) || !(xi > 0)) throw ConfigError("transform update: tau and xi must be > 0");
    return closed_form(factor(x * x.transpose(), tau, xi), x * z.transpose(), tau);
}

Codes training_patches(const std::vector<Image>& images, const PatchSpec& spec)
{
    Eigen::Index total = 0;
    std::vector<Codes> parts;
    for (const Image& img : images) {
        parts.push_back(PatchOperator(img.grid, spec).extract(img.values));
        total += parts.back().rows();
    }
    Codes out(total, spec.n());
    Eigen::Index row = 0;
    for (const Codes& p : parts) {
        out.middleRows(row, p.rows()) = p;
        row += p.rows();
    }
    return out;
}

Transform learn_transform(const Codes& train_patches, int patch_w, int patch_h, const LearnOptions& opts,
                          LearnTrace* trace)
{
    const int n = patch_w * patch_h;
    if (train_patches.cols() != n) throw ConfigError("learn_transform: patch length does not match patch size");
    if (train_patches.rows() < 1) throw ConfigError("learn_transform: no training patches");
    if (!(opts.gamma_prime > 0) || !(opts.xi > 0)) throw ConfigError("learn_transform: gamma_prime and xi must be > 0");
    if (opts.iterations < 0) throw ConfigError("learn_transform: iterations must be >= 0");

    Eigen::MatrixXd x = train_patches.transpose(); // n x J'
    if (opts.subtract_mean) x.rowwise() -= x.colwise().mean();

    const double tau = opts.tau > 0 ? opts.tau : opts.tau_scale * x.squaredNorm();
    if (!(tau > 0)) throw ConfigError("learn_transform: tau must be > 0 (training data is all zero?)");
    const double threshold = std::sqrt(opts.gamma_prime);

    Eigen::MatrixXd psi = opts.init.size() ? opts.init : dct_matrix(patch_w, patch_h);
    if (psi.rows() != n || psi.cols() != n) throw ConfigError("learn_transform: init has the wrong size");

    const UpdateFactor f = factor(x * x.transpose(), tau, opts.xi);

    LearnTrace local;
    LearnTrace& tr = trace ? *trace : local;
    tr = {};

    Eigen::MatrixXd z(n, x.cols());
    Eigen::MatrixXd best = psi;
    double best_obj = std::numeric_limits<double>::infinity();
    double prev = std::numeric_limits<double>::infinity();
    auto record = [&](double obj) {
        if (!std::isfinite(obj)) throw NumericalError("learn_transform: objective became non-finite");
        if (obj > prev + 1e-11 * std::abs(prev)) ++tr.monotonicity_violations;
        prev = obj;
        tr.objective.push_back(obj);
        if (obj < best_obj) {
            best_obj = obj;
            best = psi;
        }
    };

    auto code = [&] {
        z.noalias() = psi * x;
        z = z.unaryExpr([threshold](double a) { return hard(a, threshold); });
    };

    code();
    record(learn_objective(psi, x, z, opts.gamma_prime, tau, opts.xi).total());
    for (int it = 0; it < opts.iterations; ++it) {
        psi = closed_form(f, x * z.transpose(), tau);
        record(learn_objective(psi, x, z, opts.gamma_prime, tau, opts.xi).total());
        code();
        record(learn_objective(psi, x, z, opts.gamma_prime, tau, opts.xi).total());
    }
    tr.best_objective = best_obj;

    Transform t;
    t.psi = best;
    t.patch_w = patch_w;
    t.patch_h = patch_h;
    t.tau = tau;
    t.gamma_prime = opts.gamma_prime;
    t.xi = opts.xi;
    t.iterations = opts.iterations;
    t.condition_number = condition_number(best);
    if (!std::isfinite(t.condition_number)) throw NumericalError("learn_transform: learned transform is singular");
    return t;
}

void write_transform(const std::filesystem::path& path, const Transform& t)
{
    io::Header h;
    h.set("kind", std::string("transform"));
    h.set("n", t.n());
    h.set("patch_w", t.patch_w);
    h.set("patch_h", t.patch_h);
    h.set("tau", t.tau);
    h.set("gamma_prime", t.gamma_prime);
    h.set("xi", t.xi);
    h.set("iterations", t.iterations);
    h.set("condition_number", t.condition_number);
    h.set("layout", std::string("row-major psi, rows act on column-major vectorized patches"));
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = t.psi;
    io::write_raw(path, rm.data(), std::size_t(rm.size()));
    io::write_header(io::header_path(path), h);
}

Transform read_transform(const std::filesystem::path& path)
{
    const io::Header h = io::read_header(io::header_path(path));
    if (h.get("kind") != "transform") throw ConfigError(path.string() + ": not a transform file");
    Transform t;
    const int n = int(h.get_int("n"));
    t.patch_w = int(h.get_int("patch_w"));
    t.patch_h = int(h.get_int("patch_h"));
    if (n < 1 || t.patch_w * t.patch_h != n) throw ConfigError(path.string() + ": inconsistent transform size");
    t.tau = h.get_double("tau");
    t.gamma_prime = h.get_double("gamma_prime");
    t.xi = h.get_double("xi");
    t.iterations = int(h.get_int("iterations"));
    t.condition_number = h.get_double("condition_number");
    const Eigen::VectorXd raw = io::read_raw(path, std::size_t(n) * std::size_t(n));
    t.psi = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(raw.data(), n, n);
    return t;
}

} // namespace sv
