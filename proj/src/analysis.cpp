#include "sparseview/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>

#include "sparseview/errors.hpp"
#include "sparseview/fft.hpp"
#include "sparseview/rng.hpp"

namespace sv {

void Prop1Model::validate() const
{
    if (a_spectrum.size() != psi_spectrum.size() || a_spectrum.size() == 0)
        throw ConfigError("prop1: spectra must be non-empty and of equal length");
    if (!(sigma_eps2 > 0) || !(sigma_e2 > 0)) throw ConfigError("prop1: variances must be > 0");
    for (Eigen::Index j = 0; j < a_spectrum.size(); ++j) {
        if (a_spectrum[j] < 0 || psi_spectrum[j] < 0) throw ConfigError("prop1: spectra must be nonnegative");
        if (!(a_spectrum[j] + psi_spectrum[j] > 0))
            throw ConfigError("prop1: spectra vanish together at index " + std::to_string(j));
    }
}

double mmse_closed_form(const Prop1Model& m)
{
    m.validate();
    double s = 0;
    for (Eigen::Index j = 0; j < m.a_spectrum.size(); ++j)
        s += 1.0 / (m.a_spectrum[j] / m.sigma_eps2 + m.psi_spectrum[j] / m.sigma_e2);
    return s;
}

MvueResult mvue(const Eigen::VectorXd& y, const Eigen::VectorXd& z, const LinearOperator& a,
                const LinearOperator& psi, double sigma_eps2, double sigma_e2)
{
    if (!(sigma_eps2 > 0) || !(sigma_e2 > 0)) throw ConfigError("mvue: variances must be > 0");
    if (a.cols != psi.cols || y.size() != a.rows || z.size() != psi.rows)
        throw ConfigError("mvue: operator and data dimensions differ");
    const double ia = 1 / sigma_eps2, ip = 1 / sigma_e2;
    const ApplyFn g = [&](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        out = ia * a.transpose_times(a(x)) + ip * psi.transpose_times(psi(x));
    };
    const Eigen::VectorXd b = ia * a.transpose_times(y) + ip * psi.transpose_times(z);
    MvueResult r;
    r.estimate = Eigen::VectorXd::Zero(a.cols);
    CgResult cg;
    try {
        cg = conjugate_gradient(g, b, r.estimate, int(std::max<Eigen::Index>(10 * a.cols, 100)), 1e-10);
    } catch (const NumericalError&) {
        throw NumericalError("mvue: normal operator is singular");
    }
    if (!cg.converged) throw NumericalError("mvue: normal equations did not converge (singular system?)");
    r.iterations = cg.iterations;
    r.relative_residual = cg.relative_residual;

    // CG started at 0 on G v = G p returns the range component of p; a
    // random p keeps a visible null-space component when G is singular.
    PhiloxStream rng(0x6d767565, std::uint64_t(a.cols));
    Eigen::VectorXd probe(a.cols), gp(a.cols);
    for (Eigen::Index i = 0; i < a.cols; ++i) probe[i] = rng.normal();
    g(probe, gp);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(a.cols);
    try {
        conjugate_gradient(g, gp, v, int(std::max<Eigen::Index>(10 * a.cols, 100)), 1e-10);
    } catch (const NumericalError&) {
        throw NumericalError("mvue: normal operator is singular");
    }
    if ((v - probe).norm() > 1e-2 * probe.norm()) throw NumericalError("mvue: normal operator is singular");
    return r;
}

LinearOperator circulant_operator(const Eigen::VectorXd& kernel, Eigen::Index n)
{
    if (n < 1 || kernel.size() < 1 || kernel.size() > n) throw ConfigError("circulant: kernel longer than signal");
    const Eigen::VectorXd k = kernel;
    ApplyFn fwd = [k, n](const Eigen::VectorXd& x, Eigen::VectorXd& out) {
        out.setZero(n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index t = 0; t < k.size(); ++t) out[i] += k[t] * x[(i - t + n) % n];
    };
    ApplyFn adj = [k, n](const Eigen::VectorXd& y, Eigen::VectorXd& out) {
        out.setZero(n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index t = 0; t < k.size(); ++t) out[(i - t + n) % n] += k[t] * y[i];
    };
    return {n, n, fwd, adj};
}

Eigen::VectorXd circulant_normal_spectrum(const Eigen::VectorXd& kernel, Eigen::Index n)
{
    if (kernel.size() > n) throw ConfigError("circulant: kernel longer than signal");
    std::vector<std::complex<double>> buf(std::size_t(n), 0.0);
    for (Eigen::Index t = 0; t < kernel.size(); ++t) buf[std::size_t(t)] = kernel[t];
    Fft1d(int(n)).forward(buf);
    Eigen::VectorXd s(n);
    for (Eigen::Index i = 0; i < n; ++i) s[i] = std::norm(buf[std::size_t(i)]);
    return s;
}

Prop1Study prop1_monte_carlo(const Eigen::VectorXd& a_kernel, const Eigen::VectorXd& psi_kernel, Eigen::Index n,
                             double sigma_eps2, double sigma_e2, int trials, std::uint64_t seed)
{
    if (trials < 1) throw ConfigError("prop1: trials must be >= 1");
    const LinearOperator a = circulant_operator(a_kernel, n), psi = circulant_operator(psi_kernel, n);
    Prop1Study st;
    st.closed_form = mmse_closed_form(
        {circulant_normal_spectrum(a_kernel, n), circulant_normal_spectrum(psi_kernel, n), sigma_eps2, sigma_e2});
    PhiloxStream truth_rng(seed, 0);
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) x[i] = truth_rng.normal();
    const Eigen::VectorXd ax = a(x), px = psi(x);
    const double se = std::sqrt(sigma_eps2), sz = std::sqrt(sigma_e2);
    double acc = 0;
    for (int t = 0; t < trials; ++t) {
        PhiloxStream rng(seed, std::uint64_t(t) + 1);
        Eigen::VectorXd y = ax, z = px;
        for (Eigen::Index i = 0; i < n; ++i) y[i] += se * rng.normal();
        for (Eigen::Index i = 0; i < n; ++i) z[i] += sz * rng.normal();
        acc += (mvue(y, z, a, psi, sigma_eps2, sigma_e2).estimate - x).squaredNorm();
    }
    st.empirical = acc / trials;
    st.trials = trials;
    return st;
}

Histogram sample_histogram(const Eigen::VectorXd& e, int bins, double range)
{
    if (e.size() < 100) throw ConfigError("histogram: at least 100 samples are required");
    if (bins < 1) throw ConfigError("histogram: bins must be >= 1");
    Histogram h;
    const double n = double(e.size());
    h.samples = e.size();
    h.mean = e.mean();
    double m2 = 0, m4 = 0, abs_sum = 0, sq_sum = 0;
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        const double d = e[i] - h.mean, d2 = d * d;
        m2 += d2;
        m4 += d2 * d2;
        abs_sum += std::abs(e[i]);
        sq_sum += e[i] * e[i];
    }
    m2 /= n;
    m4 /= n;
    h.variance = m2;
    h.degenerate = !(m2 > 0);
    h.excess_kurtosis = h.degenerate ? std::numeric_limits<double>::quiet_NaN() : m4 / (m2 * m2) - 3.0;
    h.laplace_scale = abs_sum / n;
    h.gaussian_sigma = std::sqrt(sq_sum / n);
    if (h.laplace_scale > 0) {
        h.loglik_laplace = -n * std::log(2 * h.laplace_scale) - n;
        h.loglik_gaussian = -0.5 * n * (std::log(2 * std::numbers::pi * h.gaussian_sigma * h.gaussian_sigma) + 1);
    } else {
        h.loglik_laplace = h.loglik_gaussian = std::numeric_limits<double>::infinity();
    }

    double r = range > 0 ? range : e.cwiseAbs().maxCoeff();
    if (!(r > 0)) r = 1;
    h.edges.resize(std::size_t(bins) + 1);
    for (int b = 0; b <= bins; ++b) h.edges[std::size_t(b)] = -r + 2 * r * b / bins;
    h.counts.assign(std::size_t(bins), 0);
    for (Eigen::Index i = 0; i < e.size(); ++i) {
        int b = int(std::floor((e[i] + r) / (2 * r) * bins));
        b = std::clamp(b, 0, bins - 1); // outliers go to the end bins
        ++h.counts[std::size_t(b)];
    }
    return h;
}

Histogram sparsification_histogram(const Codes& transformed, const Codes& z, int bins, double range)
{
    if (transformed.rows() != z.rows() || transformed.cols() != z.cols())
        throw ConfigError("histogram: code shapes differ");
    const Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(transformed.data(), transformed.size()) -
                              Eigen::Map<const Eigen::VectorXd>(z.data(), z.size());
    return sample_histogram(e, bins, range);
}

void write_histogram_csv(const std::filesystem::path& path, const Histogram& h)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    char line[256];
    f << "bin_lo,bin_hi,count\n";
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        std::snprintf(line, sizeof line, "%.17g,%.17g,%lld\n", h.edges[b], h.edges[b + 1], h.counts[b]);
        f << line;
    }
}

void write_histogram_dat(const std::filesystem::path& path, const Histogram& h)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    char line[256];
    std::snprintf(line, sizeof line,
                  "# samples %lld\n# excess_kurtosis %.9g\n# laplace_scale %.9g loglik %.9g\n"
                  "# gaussian_sigma %.9g loglik %.9g\n# center density\n",
                  h.samples, h.excess_kurtosis, h.laplace_scale, h.loglik_laplace, h.gaussian_sigma,
                  h.loglik_gaussian);
    f << line;
    for (std::size_t b = 0; b < h.counts.size(); ++b) {
        const double w = h.edges[b + 1] - h.edges[b];
        std::snprintf(line, sizeof line, "%.9g %.9g\n", 0.5 * (h.edges[b] + h.edges[b + 1]),
                      double(h.counts[b]) / (double(h.samples) * w));
        f << line;
    }
}

Eigen::VectorXd majorizer_diagonal(const Projector& a, const Weights& w)
{
    if (!(w.geometry == a.geometry())) throw ConfigError("majorizer: weights geometry differs from projector");
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(a.grid().size());
    return a.adjoint(Eigen::VectorXd(w.values.cwiseProduct(a.forward(ones))));
}

double lambda_transfer(const Weights& w_ref, const Weights& w_new, const Projector& a, const RoiMask& roi,
                       double lambda_ref)
{
    if (!(roi.grid == a.grid())) throw ConfigError("lambda transfer: mask grid differs from projector grid");
    auto roi_mean = [&](const Eigen::VectorXd& d) {
        double s = 0;
        Eigen::Index n = 0;
        for (Eigen::Index j = 0; j < d.size(); ++j)
            if (roi.inside[std::size_t(j)]) {
                s += d[j];
                ++n;
            }
        if (n == 0) throw ConfigError("lambda transfer: region of interest is empty");
        return s / double(n);
    };
    const double ref = roi_mean(majorizer_diagonal(a, w_ref));
    const double cur = roi_mean(majorizer_diagonal(a, w_new));
    if (!(ref > 0) || !(cur > 0)) throw NumericalError("lambda transfer: majorizer mean is zero");
    return lambda_ref * cur / ref;
}

std::vector<CodeSnrResult> code_snr_study(const ScanProblem& prob, const TransformOperator& psi_op,
                                          const Image& truth, const Image& init, const std::vector<double>& snr_db,
                                          const FixedCodeOptions& opts, int trials, std::uint64_t seed,
                                          double mu_water)
{
    if (trials < 1) throw ConfigError("snr study: trials must be >= 1");
    const Codes clean = psi_op.apply(truth.values);
    const double power = clean.squaredNorm() / double(clean.size());
    const double to_hu2 = (1000 / mu_water) * (1000 / mu_water);
    std::vector<CodeSnrResult> out;
    for (std::size_t s = 0; s < snr_db.size(); ++s) {
        const double sigma = std::sqrt(power / std::pow(10.0, snr_db[s] / 10));
        double acc = 0;
        for (int t = 0; t < trials; ++t) {
            PhiloxStream rng(seed, (std::uint64_t(s) << 32) + std::uint64_t(t));
            Codes z = clean;
            for (Eigen::Index i = 0; i < z.size(); ++i) z.data()[i] += sigma * rng.normal();
            const Image x = admm_fixed_codes(prob, psi_op, z, opts, init);
            acc += (x.values - truth.values).squaredNorm();
        }
        out.push_back({snr_db[s], acc / trials * to_hu2});
    }
    return out;
}

} // namespace sv
