#include "sparseview/solvers.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>

#include "sparseview/linalg.hpp"
#include "sparseview/precond.hpp"
#include "sparseview/shrinkage.hpp"

namespace sv {

namespace {

constexpr double nan = std::numeric_limits<double>::quiet_NaN();

void check_problem(const ScanProblem& prob)
{
    if (!(prob.y.geometry == prob.a.geometry()) || !(prob.w.geometry == prob.a.geometry()))
        throw ConfigError("solver: sinogram, weights and projector geometries differ");
    prob.w.validate();
    if (!prob.y.values.allFinite()) throw ConfigError("solver: measurements contain non-finite values");
}

void check_init(const ScanProblem& prob, const Image& init)
{
    if (!(init.grid == prob.a.grid())) throw ConfigError("solver: initial image grid differs from projector grid");
    if (!init.values.allFinite()) throw ConfigError("solver: initial image contains non-finite values");
}

double rmse_or_nan(const Reference& ref, const ImageGrid& grid, const Eigen::VectorXd& x)
{
    if (!ref.truth) return nan;
    return rmse_roi(Image(grid, x), *ref.truth, ref.roi, ref.mu_water);
}

double weighted_data_term(const Eigen::VectorXd& w, const Eigen::VectorXd& y, const Eigen::VectorXd& ax)
{
    return 0.5 * (w.array() * (y - ax).array().square()).sum();
}

Eigen::Index count_nonzero(const Codes& z) { return (z.array() != 0.0).count(); }

// Increases below this relative size are rounding noise near convergence.
constexpr double increase_tol = 1e-13;

void record_increase(Telemetry& t, double obj)
{
    if (!t.records.empty()) {
        const double prev = t.records.back().objective;
        if (obj > prev + increase_tol * std::abs(prev)) ++t.objective_increases;
    }
}

TransformOperator make_transform_operator(const ImageGrid& grid, const Transform& psi, const PatchSpec& spec)
{
    if (psi.patch_w != spec.patch_w || psi.patch_h != spec.patch_h || psi.n() != spec.n())
        throw ConfigError("solver: transform patch size does not match the patch spec");
    return TransformOperator(grid, spec, psi.psi);
}

/// Psi~^T Psi~, through its exact DFT diagonalization when patches are
/// extracted at every pixel.
class PsiNormal {
public:
    PsiNormal(const TransformOperator& op, const Eigen::VectorXd& spectrum) : op_(op)
    {
        const PatchSpec& s = op.patches().spec();
        if (s.stride_x == 1 && s.stride_y == 1) circ_.emplace(op.patches().grid(), spectrum);
    }
    void apply(const Eigen::VectorXd& x, Eigen::VectorXd& out) const
    {
        if (circ_)
            out = circ_->multiply(x);
        else
            out = op_.normal(x);
    }

private:
    const TransformOperator& op_;
    std::optional<Circulant2d> circ_;
};

Spectra spectra_for(const Projector& a, const TransformOperator& op)
{
    const ApplyFn ata = [&a](const Eigen::VectorXd& x, Eigen::VectorXd& out) { out = a.adjoint(a.forward(x)); };
    const ApplyFn ptp = [&op](const Eigen::VectorXd& x, Eigen::VectorXd& out) { out = op.normal(x); };
    return estimate_spectra(ata, ptp, a.grid());
}

/// ADMM variables and updates for the PWLS-ST-l1 image subproblem.
class AdmmEngine {
public:
    AdmmEngine(const ScanProblem& prob, const TransformOperator& op, const Spectra& spectra, double lambda, double nu,
               double mu)
        : prob_(prob), op_(op), psi_normal_(op, spectra.lambda_psi),
          precond_(prob.a.grid(), spectra.lambda_a, spectra.lambda_psi, nu), lambda_(lambda), nu_(nu), mu_(mu)
    {
        if (!(nu > 0) || !(mu > 0)) throw ConfigError("admm: nu and mu must be > 0");
        wy_ = prob.w.values.cwiseProduct(prob.y.values);
        w_plus_mu_ = prob.w.values.array() + mu;
    }

    void set_image(const Eigen::VectorXd& x)
    {
        x_ = x;
        refresh_projection();
        op_.apply(x_, tx_, scratch_);
    }
    void refresh_projection() { ax_ = prob_.a.forward(x_); }
    void set_codes(Codes z) { z_ = std::move(z); }

    /// Auxiliaries from their own updates with zero duals.
    void reset_auxiliaries()
    {
        b_a_.setZero(ax_.size());
        b_psi_.setZero(tx_.rows(), tx_.cols());
        update_auxiliaries();
    }

    /// One x-update, auxiliary update and dual ascent. Returns PCG steps.
    int round(int pcg_iters, double pcg_tol)
    {
        const int steps = update_image(pcg_iters, pcg_tol);
        update_auxiliaries();
        b_a_ -= d_a_ - ax_;
        b_psi_ -= d_psi_ - (tx_ - z_);
        return steps;
    }

    [[nodiscard]] double objective(double gamma) const
    {
        return weighted_data_term(prob_.w.values, prob_.y.values, ax_) + lambda_ * (tx_ - z_).cwiseAbs().sum() +
               gamma * double(count_nonzero(z_));
    }

    [[nodiscard]] const Eigen::VectorXd& x() const { return x_; }
    [[nodiscard]] const Codes& transformed() const { return tx_; }
    [[nodiscard]] const Codes& z() const { return z_; }

    void export_state(SolverState& s) const
    {
        s.x = Image(prob_.a.grid(), x_);
        s.z = z_;
        s.d_a = d_a_;
        s.b_a = b_a_;
        s.d_psi = d_psi_;
        s.b_psi = b_psi_;
    }

private:
    void update_auxiliaries()
    {
        d_a_ = (wy_.array() + mu_ * (ax_ + b_a_).array()) / w_plus_mu_.array();
        const double t = lambda_ / (mu_ * nu_);
        d_psi_ = tx_ - z_ + b_psi_;
        soft_inplace(d_psi_, t);
    }

    int update_image(int pcg_iters, double pcg_tol)
    {
        const Projector& a = prob_.a;
        // Residual of G x = A^T(d_a - b_a) + nu Psi~^T(d_psi - b_psi + z) at the current x.
        Eigen::VectorXd r = a.adjoint(Eigen::VectorXd(d_a_ - b_a_ - ax_));
        codes_tmp_ = d_psi_ - b_psi_ + z_ - tx_;
        op_.adjoint(codes_tmp_, img_tmp_, scratch_);
        r += nu_ * img_tmp_;

        const double r0 = r.norm();
        int steps = 0;
        if (r0 == 0.0) {
            op_.apply(x_, tx_, scratch_);
            return 0;
        }
        Eigen::VectorXd s = precond_.apply(r);
        Eigen::VectorXd p = s;
        double rs = r.dot(s);
        Eigen::VectorXd q;
        for (int k = 0; k < pcg_iters; ++k) {
            const Eigen::VectorXd ap = a.forward(p);
            psi_normal_.apply(p, q);
            q = a.adjoint(ap) + nu_ * q;
            const double curv = p.dot(q);
            if (!(curv > 0)) throw NumericalError("admm: PCG met a nonpositive curvature direction");
            const double alpha = rs / curv;
            x_ += alpha * p;
            ax_ += alpha * ap;
            r -= alpha * q;
            ++steps;
            if (pcg_tol > 0 && r.norm() <= pcg_tol * r0) break;
            s = precond_.apply(r);
            const double rs_new = r.dot(s);
            p = s + (rs_new / rs) * p;
            rs = rs_new;
        }
        op_.apply(x_, tx_, scratch_);
        return steps;
    }

    const ScanProblem& prob_;
    const TransformOperator& op_;
    PsiNormal psi_normal_;
    CirculantPrecond precond_;
    double lambda_, nu_, mu_;
    Eigen::VectorXd wy_, w_plus_mu_;

    Eigen::VectorXd x_, ax_, d_a_, b_a_, img_tmp_;
    Codes tx_, z_, d_psi_, b_psi_, codes_tmp_, scratch_;
};

} // namespace

void ReconParams::validate() const
{
    if (!(lambda > 0)) throw ConfigError("solver.lambda must be > 0");
    if (!(gamma_over_lambda >= 0)) throw ConfigError("solver.gamma_over_lambda must be >= 0");
    if (!(kappa_nu > 1)) throw ConfigError("solver.kappa_nu must be > 1");
    if (!(kappa_mu > 1)) throw ConfigError("solver.kappa_mu must be > 1");
    if (outer_iters < 1) throw ConfigError("solver.outer_iters must be >= 1");
    if (admm_iters < 1) throw ConfigError("solver.admm_iters must be >= 1");
    if (pcg_iters < 1) throw ConfigError("solver.pcg_iters must be >= 1");
    if (!(pcg_tol >= 0)) throw ConfigError("solver.pcg_tol must be >= 0");
    if (!(early_stop >= 0)) throw ConfigError("solver.early_stop must be >= 0");
}

void L2Params::validate() const
{
    if (!(lambda > 0)) throw ConfigError("solver.lambda must be > 0");
    if (!(gamma >= 0)) throw ConfigError("solver.gamma must be >= 0");
    if (outer_iters < 1) throw ConfigError("solver.outer_iters must be >= 1");
    if (pcg_iters < 1) throw ConfigError("solver.pcg_iters must be >= 1");
    if (!(pcg_tol >= 0)) throw ConfigError("solver.pcg_tol must be >= 0");
}

void EpParams::validate() const
{
    if (!(beta >= 0)) throw ConfigError("solver.beta must be >= 0");
    if (!(delta > 0)) throw ConfigError("solver.delta must be > 0");
    if (iters < 1) throw ConfigError("solver.iters must be >= 1");
    if (line_search_iters < 1) throw ConfigError("solver.line_search_iters must be >= 1");
}

void Telemetry::write_csv(const std::filesystem::path& path) const
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    f << "iteration,objective,rmse_hu,sparsity_pct,pcg_iters\n";
    char line[256];
    for (const IterationRecord& r : records) {
        std::snprintf(line, sizeof line, "%d,%.17g,%.17g,%.17g,%d\n", r.iteration, r.objective, r.rmse_hu,
                      r.sparsity_pct, r.pcg_iterations);
        f << line;
    }
    if (!f) throw ConfigError("failed writing " + path.string());
}

double data_term(const ScanProblem& prob, const Eigen::VectorXd& x)
{
    return weighted_data_term(prob.w.values, prob.y.values, prob.a.forward(x));
}

// --- PWLS-ST-l1 --------------------------------------------------------------

SolverState pwls_st_l1(const ScanProblem& prob, const Transform& psi, const PatchSpec& spec, const ReconParams& p,
                       const Image& init, const Reference& ref, const IterationHook& hook)
{
    p.validate();
    check_problem(prob);
    check_init(prob, init);
    const ImageGrid& grid = prob.a.grid();
    const TransformOperator op = make_transform_operator(grid, psi, spec);

    const Spectra spectra = spectra_for(prob.a, op);
    const double nu = select_nu(spectra.lambda_a, spectra.lambda_psi, p.kappa_nu);
    const double mu = select_mu(prob.w.values, p.kappa_mu);
    const double gamma = p.lambda * p.gamma_over_lambda;

    AdmmEngine eng(prob, op, spectra, p.lambda, nu, mu);
    eng.set_image(init.values);
    eng.set_codes(sparse_code(eng.transformed(), p.lambda, gamma));

    SolverState state;
    Telemetry& tel = state.telemetry;
    tel.method = "st-l1";
    tel.nu = nu;
    tel.mu = mu;

    auto fail = [&](const std::string& what) {
        eng.export_state(state);
        throw SolverFailure(what, std::move(state));
    };

    Eigen::VectorXd x_prev = eng.x();
    for (int it = 1; it <= p.outer_iters; ++it) {
        eng.reset_auxiliaries();
        int steps = 0;
        for (int k = 0; k < p.admm_iters; ++k) steps += eng.round(p.pcg_iters, p.pcg_tol);
        eng.refresh_projection();

        const double before = eng.objective(gamma);
        eng.set_codes(sparse_code(eng.transformed(), p.lambda, gamma));
        const double obj = eng.objective(gamma);
        if (!std::isfinite(obj) || !eng.x().allFinite())
            fail("pwls-st-l1: non-finite objective at outer iteration " + std::to_string(it));
        if (obj > before + increase_tol * std::abs(before)) ++tel.sparse_coding_increases;
        record_increase(tel, obj);

        IterationRecord rec;
        rec.iteration = it;
        rec.objective = obj;
        rec.rmse_hu = rmse_or_nan(ref, grid, eng.x());
        rec.sparsity_pct = 100.0 * double(count_nonzero(eng.z())) / double(eng.z().size());
        rec.pcg_iterations = steps;
        tel.records.push_back(rec);
        if (hook) hook(it, Image(grid, eng.x()), eng.transformed(), eng.z());

        if (p.early_stop > 0) {
            const double xn = eng.x().norm();
            if (xn > 0 && (eng.x() - x_prev).norm() / xn < p.early_stop) {
                tel.stopped_early_at = it;
                break;
            }
            x_prev = eng.x();
        }
    }
    eng.export_state(state);
    return state;
}

Image admm_fixed_codes(const ScanProblem& prob, const TransformOperator& psi_op, const Codes& z,
                       const FixedCodeOptions& opts, const Image& init)
{
    check_problem(prob);
    check_init(prob, init);
    if (!(opts.lambda > 0)) throw ConfigError("admm: lambda must be > 0");
    if (z.rows() != psi_op.num_patches() || z.cols() != psi_op.patch_size())
        throw ConfigError("admm: code shape does not match the transform operator");
    const Spectra spectra = spectra_for(prob.a, psi_op);
    AdmmEngine eng(prob, psi_op, spectra, opts.lambda, opts.nu, opts.mu);
    eng.set_image(init.values);
    eng.set_codes(z);
    eng.reset_auxiliaries();
    for (int k = 0; k < opts.iterations; ++k) eng.round(opts.pcg_iters, opts.pcg_tol);
    return Image(prob.a.grid(), eng.x());
}

// --- PWLS-ST-l2 --------------------------------------------------------------

SolverState pwls_st_l2(const ScanProblem& prob, const Transform& psi, const PatchSpec& spec, const L2Params& p,
                       const Image& init, const Reference& ref, const IterationHook& hook)
{
    p.validate();
    check_problem(prob);
    check_init(prob, init);
    const Projector& a = prob.a;
    const ImageGrid& grid = a.grid();
    const TransformOperator op = make_transform_operator(grid, psi, spec);
    const Eigen::VectorXd& w = prob.w.values;

    const ApplyFn awa = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        out = a.adjoint(Eigen::VectorXd(w.cwiseProduct(a.forward(x))));
    };
    const ApplyFn ptp = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) { out = op.normal(x); };
    const Spectra spectra = estimate_spectra(awa, ptp, grid);
    const double reg = 2 * p.lambda;
    const CirculantPrecond m(grid, spectra.lambda_a, spectra.lambda_psi, reg);
    const PsiNormal psi_normal(op, spectra.lambda_psi);

    const ApplyFn hess = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        Eigen::VectorXd t;
        psi_normal.apply(x, t);
        awa(x, out);
        out += reg * t;
    };
    const ApplyFn pre = [&](const Eigen::VectorXd& r, Eigen::VectorXd& out) { out = m.apply(r); };
    const Eigen::VectorXd awy = a.adjoint(Eigen::VectorXd(w.cwiseProduct(prob.y.values)));
    const double threshold = std::sqrt(p.gamma / p.lambda);

    Eigen::VectorXd x = init.values;
    Codes tx = op.apply(x), z = tx;
    hard_inplace(z, threshold);

    auto objective = [&](const Eigen::VectorXd& ax) {
        return weighted_data_term(w, prob.y.values, ax) + p.lambda * (tx - z).squaredNorm() +
               p.gamma * double(count_nonzero(z));
    };

    SolverState state;
    Telemetry& tel = state.telemetry;
    tel.method = "st-l2";
    tel.nu = reg;
    for (int it = 1; it <= p.outer_iters; ++it) {
        const Eigen::VectorXd b = awy + reg * op.adjoint(z);
        const CgResult cg = conjugate_gradient(hess, b, x, p.pcg_iters, p.pcg_tol, pre);
        tx = op.apply(x);
        const Eigen::VectorXd ax = a.forward(x);
        const double before = objective(ax);
        z = tx;
        hard_inplace(z, threshold);
        const double obj = objective(ax);
        if (!std::isfinite(obj) || !x.allFinite()) {
            state.x = Image(grid, x);
            state.z = z;
            throw SolverFailure("pwls-st-l2: non-finite objective at outer iteration " + std::to_string(it),
                                std::move(state));
        }
        if (obj > before + increase_tol * std::abs(before)) ++tel.sparse_coding_increases;
        record_increase(tel, obj);
        IterationRecord rec;
        rec.iteration = it;
        rec.objective = obj;
        rec.rmse_hu = rmse_or_nan(ref, grid, x);
        rec.sparsity_pct = 100.0 * double(count_nonzero(z)) / double(z.size());
        rec.pcg_iterations = cg.iterations;
        tel.records.push_back(rec);
        if (hook) hook(it, Image(grid, x), tx, z);
    }
    state.x = Image(grid, x);
    state.z = z;
    return state;
}

// --- PWLS-EP -----------------------------------------------------------------

double ep_potential(double t, double delta)
{
    const double r = t / delta;
    return delta * delta * (std::sqrt(1 + r * r) - 1);
}

namespace {

double ep_derivative(double t, double delta) { return t / std::sqrt(1 + (t / delta) * (t / delta)); }
double ep_curvature(double t, double delta) { return 1 / std::sqrt(1 + (t / delta) * (t / delta)); }

/// Visits each unordered 8-neighbor pair (j, k) once; the regularizer counts
/// every pair twice (once from each side).
template <class F>
void for_each_pair(const ImageGrid& g, F&& f)
{
    static constexpr int off[4][2] = {{1, 0}, {0, 1}, {1, 1}, {-1, 1}};
    for (int iy = 0; iy < g.height; ++iy)
        for (int ix = 0; ix < g.width; ++ix) {
            const Eigen::Index j = Eigen::Index(iy) * g.width + ix;
            for (const auto& o : off) {
                const int kx = ix + o[0], ky = iy + o[1];
                if (kx < 0 || kx >= g.width || ky >= g.height) continue;
                f(j, Eigen::Index(ky) * g.width + kx);
            }
        }
}

double ep_regularizer_values(const ImageGrid& g, const Eigen::VectorXd& x, double delta)
{
    double s = 0;
    for_each_pair(g, [&](Eigen::Index j, Eigen::Index k) { s += ep_potential(x[j] - x[k], delta); });
    return 2 * s;
}

void ep_gradient_values(const ImageGrid& g, const Eigen::VectorXd& x, double delta, Eigen::VectorXd& out)
{
    out.setZero(x.size());
    for_each_pair(g, [&](Eigen::Index j, Eigen::Index k) {
        const double d = 2 * ep_derivative(x[j] - x[k], delta);
        out[j] += d;
        out[k] -= d;
    });
}

/// Hessian of the regularizer at a constant image (all curvatures 1).
void ep_hessian_flat(const ImageGrid& g, const Eigen::VectorXd& x, Eigen::VectorXd& out)
{
    out.setZero(x.size());
    for_each_pair(g, [&](Eigen::Index j, Eigen::Index k) {
        const double d = 2 * (x[j] - x[k]);
        out[j] += d;
        out[k] -= d;
    });
}

} // namespace

double ep_regularizer(const Image& x, double delta) { return ep_regularizer_values(x.grid, x.values, delta); }

Eigen::VectorXd ep_gradient(const Image& x, double delta)
{
    Eigen::VectorXd g;
    ep_gradient_values(x.grid, x.values, delta, g);
    return g;
}

SolverState pwls_ep(const ScanProblem& prob, const EpParams& p, const Image& init, const Reference& ref)
{
    p.validate();
    check_problem(prob);
    check_init(prob, init);
    const Projector& a = prob.a;
    const ImageGrid& grid = a.grid();
    const Eigen::VectorXd& w = prob.w.values;
    const Eigen::VectorXd& y = prob.y.values;

    const ApplyFn awa = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        out = a.adjoint(Eigen::VectorXd(w.cwiseProduct(a.forward(x))));
    };
    const ApplyFn rh = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) { ep_hessian_flat(grid, x, out); };
    const Spectra spectra = estimate_spectra(awa, rh, grid);
    const CirculantPrecond m(grid, spectra.lambda_a, spectra.lambda_psi, p.beta);

    Eigen::VectorXd x = init.values;
    Eigen::VectorXd ax = a.forward(x);
    auto objective = [&] {
        return weighted_data_term(w, y, ax) + (p.beta > 0 ? p.beta * ep_regularizer_values(grid, x, p.delta) : 0.0);
    };
    auto gradient = [&] {
        Eigen::VectorXd g = a.adjoint(Eigen::VectorXd(w.cwiseProduct(ax - y)));
        if (p.beta > 0) {
            Eigen::VectorXd gr;
            ep_gradient_values(grid, x, p.delta, gr);
            g += p.beta * gr;
        }
        return g;
    };

    SolverState state;
    Telemetry& tel = state.telemetry;
    tel.method = "ep";

    Eigen::VectorXd g = gradient();
    Eigen::VectorXd s = m.apply(g);
    Eigen::VectorXd d = -s;
    double gs = g.dot(s);
    for (int it = 1; it <= p.iters; ++it) {
        if (g.dot(d) >= 0) d = -s;
        const Eigen::VectorXd ad = a.forward(d);
        const Eigen::VectorXd wad = w.cwiseProduct(ad);
        const double dad = ad.dot(wad);
        const double r_ad = wad.dot(ax - y);

        // Majorize-minimize on the step length.
        double alpha = 0;
        for (int ls = 0; ls < p.line_search_iters && (dad > 0 || p.beta > 0); ++ls) {
            double deriv = r_ad + alpha * dad, curv = dad;
            if (p.beta > 0) {
                double rd = 0, rc = 0;
                for_each_pair(grid, [&](Eigen::Index j, Eigen::Index k) {
                    const double sd = d[j] - d[k];
                    if (sd == 0.0) return;
                    const double t = x[j] - x[k] + alpha * sd;
                    rd += ep_derivative(t, p.delta) * sd;
                    rc += ep_curvature(t, p.delta) * sd * sd;
                });
                deriv += 2 * p.beta * rd;
                curv += 2 * p.beta * rc;
            }
            if (!(curv > 0)) break;
            alpha -= deriv / curv;
        }
        x += alpha * d;
        ax += alpha * ad;

        const double obj = objective();
        if (!std::isfinite(obj) || !x.allFinite()) {
            state.x = Image(grid, x);
            throw SolverFailure("pwls-ep: non-finite objective at iteration " + std::to_string(it), std::move(state));
        }
        record_increase(tel, obj);
        IterationRecord rec;
        rec.iteration = it;
        rec.objective = obj;
        rec.rmse_hu = rmse_or_nan(ref, grid, x);
        tel.records.push_back(rec);

        const Eigen::VectorXd g_new = gradient();
        const Eigen::VectorXd s_new = m.apply(g_new);
        const double gs_new = g_new.dot(s_new);
        const double beta_pr = gs > 0 ? std::max(0.0, (gs_new - g_new.dot(s)) / gs) : 0.0;
        d = -s_new + beta_pr * d;
        g = g_new;
        s = s_new;
        gs = gs_new;
        if (gs == 0.0) break;
    }
    state.x = Image(grid, x);
    return state;
}

} // namespace sv
