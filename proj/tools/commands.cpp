#include "commands.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "sparseview/analysis.hpp"
#include "sparseview/io.hpp"
#include "sparseview/precond.hpp"
#include "sparseview/shrinkage.hpp"
#include "sparseview/simulate.hpp"
#include "sparseview/solvers.hpp"
#include "sparseview/translearn.hpp"

namespace fs = std::filesystem;

namespace svct {

namespace {

fs::path out_dir(const RunConfig& cfg, const Options& opt)
{
    const fs::path d = opt.out.empty() ? fs::path(cfg.str("io.dir")) : opt.out;
    if (d.empty()) throw sv::ConfigError("io.dir: must not be empty");
    std::error_code ec;
    fs::create_directories(d, ec);
    if (ec) throw sv::ConfigError("io.dir: cannot create " + d.string() + ": " + ec.message());
    return d;
}

fs::path resolve(const RunConfig& cfg, const fs::path& dir, const std::string& key)
{
    const fs::path p = cfg.str(key);
    if (p.empty()) throw sv::ConfigError(key + ": no file given");
    return p.is_absolute() ? p : dir / p;
}

fs::path existing(const RunConfig& cfg, const fs::path& dir, const std::string& key)
{
    const fs::path p = resolve(cfg, dir, key);
    if (!fs::exists(p)) throw sv::ConfigError(key + ": file not found: " + p.string());
    return p;
}

void note(const std::string& msg) { std::cerr << "svct: " << msg << "\n"; }

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw sv::ConfigError("cannot write " + path.string());
}

void write_manifest(const RunConfig& cfg, const fs::path& dir, const std::string& command)
{
    std::string name = command;
    for (char& c : name)
        if (c == ' ') c = '_';
    write_text(dir / ("manifest_" + name + ".ini"), cfg.manifest(command));
}

sv::ImageGrid image_grid(const RunConfig& cfg)
{
    const double px = cfg.positive("geometry.pixel");
    sv::ImageGrid g{cfg.int_in("geometry.nx", 1, 1 << 14), cfg.int_in("geometry.ny", 1, 1 << 14), px, px};
    return g;
}

sv::Geometry scan_geometry(const RunConfig& cfg)
{
    const std::string kind = cfg.str("geometry.kind");
    const int views = cfg.int_in("geometry.views", 1, 1 << 16);
    const int channels = cfg.int_in("geometry.channels", 1, 1 << 16);
    const double spacing = cfg.positive("geometry.channel_spacing");
    if (kind == "parallel") return sv::Geometry::parallel(views, channels, spacing);
    if (kind == "fan_flat") {
        const double iso = cfg.positive("geometry.source_to_iso");
        const double det = cfg.positive("geometry.source_to_detector");
        if (!(det > iso)) throw sv::ConfigError("geometry.source_to_detector: must exceed geometry.source_to_iso");
        return sv::Geometry::fan_flat(views, channels, spacing, iso, det);
    }
    throw sv::ConfigError("geometry.kind: expected fan_flat or parallel, got '" + kind + "'");
}

sv::Phantom phantom(const RunConfig& cfg, int slice)
{
    const std::string kind = cfg.str("phantom.kind");
    if (kind == "chest") return sv::chest_phantom(slice);
    if (kind == "disk") return sv::disk_phantom(cfg.positive("phantom.disk_radius"), cfg.num_in("phantom.disk_mu", 0));
    throw sv::ConfigError("phantom.kind: expected chest or disk, got '" + kind + "'");
}

sv::PatchSpec patch_spec(const RunConfig& cfg, const sv::ImageGrid& g)
{
    sv::PatchSpec s{cfg.int_in("patches.width", 1, 64), cfg.int_in("patches.height", 1, 64),
                    cfg.int_in("patches.stride_x", 1, 64), cfg.int_in("patches.stride_y", 1, 64)};
    try {
        s.validate(g);
    } catch (const sv::ConfigError& e) {
        throw sv::ConfigError(std::string("patches: ") + e.what());
    }
    return s;
}

sv::RoiMask roi(const RunConfig& cfg, const sv::ImageGrid& g)
{
    const double r = cfg.num_in("analysis.roi_radius", 0);
    return r > 0 ? sv::circular_mask(g, r) : sv::full_mask(g);
}

sv::Weights read_weights(const fs::path& p)
{
    sv::Sinogram s = sv::io::read_sinogram(p);
    return {s.geometry, std::move(s.values)};
}

std::string method_of(const RunConfig& cfg, const Options& opt)
{
    const std::string m = opt.method.empty() ? cfg.str("solver.method") : opt.method;
    if (m != "fbp" && m != "ep" && m != "st-l2" && m != "st-l1")
        throw sv::ConfigError("solver.method: expected fbp, ep, st-l2 or st-l1, got '" + m + "'");
    return m;
}

sv::Transform load_transform(const RunConfig& cfg, const fs::path& dir, const sv::PatchSpec& spec)
{
    sv::Transform t = sv::read_transform(existing(cfg, dir, "io.transform"));
    if (t.patch_w != spec.patch_w || t.patch_h != spec.patch_h)
        throw sv::ConfigError("io.transform: patch size " + std::to_string(t.patch_w) + "x" +
                              std::to_string(t.patch_h) + " differs from patches.width x patches.height");
    return t;
}

sv::EpParams ep_params(const RunConfig& cfg)
{
    sv::EpParams p;
    p.beta = cfg.num_in("solver.ep_beta", 0);
    p.delta = cfg.positive("solver.ep_delta");
    p.iters = cfg.int_in("solver.ep_iters", 1);
    return p;
}

sv::Image fbp_image(const RunConfig& cfg, const sv::Sinogram& y, const sv::ImageGrid& g)
{
    return sv::fbp(y, g, {cfg.num_in("solver.fbp_cutoff", 1e-6, 1)});
}

sv::Image initial_image(const RunConfig& cfg, const sv::ScanProblem& prob, const sv::ImageGrid& g,
                        const sv::Reference& ref)
{
    const std::string init = cfg.str("solver.init");
    if (init == "fbp") return fbp_image(cfg, prob.y, g);
    if (init == "ep") {
        note("initializing with PWLS-EP");
        return sv::pwls_ep(prob, ep_params(cfg), fbp_image(cfg, prob.y, g), ref).x;
    }
    if (init == "constant") return sv::Image(g, Eigen::VectorXd::Constant(g.size(), cfg.num("solver.init_value")));
    if (init == "given") {
        const fs::path p = cfg.str("solver.init_image");
        if (p.empty() || !fs::exists(p)) throw sv::ConfigError("solver.init_image: file not found: " + p.string());
        sv::Image img = sv::io::read_image(p);
        if (!(img.grid == g)) throw sv::ConfigError("solver.init_image: grid differs from geometry.nx/ny/pixel");
        return img;
    }
    throw sv::ConfigError("solver.init: expected fbp, ep, constant or given, got '" + init + "'");
}

void dump_spectra(const fs::path& path, const sv::Spectra& s)
{
    std::ofstream f(path, std::ios::binary);
    if (!f) throw sv::ConfigError("cannot write " + path.string());
    f << "index,lambda_a,lambda_psi\n";
    char line[128];
    for (Eigen::Index i = 0; i < s.lambda_a.size(); ++i) {
        std::snprintf(line, sizeof line, "%lld,%.17g,%.17g\n", static_cast<long long>(i), s.lambda_a[i],
                      s.lambda_psi[i]);
        f << line;
    }
}

} // namespace

void cmd_simulate(const RunConfig& cfg, const Options& opt)
{
    const fs::path dir = out_dir(cfg, opt);
    const sv::ImageGrid g = image_grid(cfg);
    const int f = cfg.int_in("geometry.fine_factor", 1, 8);
    const sv::ImageGrid fine{g.width * f, g.height * f, g.dx / f, g.dy / f};
    const sv::Geometry geo = scan_geometry(cfg);
    const sv::Phantom ph = phantom(cfg, cfg.int_in("phantom.slice", -1000, 1000));
    const double rho0 = cfg.positive("noise.rho0");
    const double sigma2 = cfg.num_in("noise.sigma2", 0);

    const sv::Image truth = sv::rasterize(ph, g);
    const sv::Image truth_fine = sv::rasterize(ph, fine);
    const sv::ScanData sd = sv::simulate_scan(truth_fine, geo, rho0, sigma2, cfg.seed());

    sv::io::write_image(resolve(cfg, dir, "io.truth"), truth);
    sv::io::write_image(dir / "truth_fine.raw", truth_fine);
    sv::io::write_sinogram(resolve(cfg, dir, "io.sinogram"), sd.postlog, "sinogram");
    sv::io::write_sinogram(dir / "prelog.raw", sd.prelog, "prelog");
    sv::io::write_sinogram(resolve(cfg, dir, "io.weights"), sv::Sinogram(geo, sd.weights.values), "weights");
    write_manifest(cfg, dir, "simulate");
    note("simulated " + std::to_string(geo.num_views) + " views, " + std::to_string(sd.clamped_rays) +
         " clamped rays, wrote " + dir.string());
}

void cmd_learn(const RunConfig& cfg, const Options& opt)
{
    const fs::path dir = out_dir(cfg, opt);
    const sv::ImageGrid g = image_grid(cfg);
    const sv::PatchSpec spec = patch_spec(cfg, g);

    std::vector<sv::Image> train;
    for (double s : cfg.list("phantom.training_slices")) {
        if (s != std::floor(s)) throw sv::ConfigError("phantom.training_slices: slices must be integers");
        train.push_back(sv::rasterize(phantom(cfg, int(s)), g));
    }
    sv::Codes x = sv::training_patches(train, spec);
    const long long keep = cfg.int_in("transform.max_patches", 0);
    if (keep > 0 && keep < x.rows()) {
        sv::Codes sub(keep, x.cols());
        for (long long i = 0; i < keep; ++i) sub.row(i) = x.row(Eigen::Index(i * x.rows() / keep));
        x = std::move(sub);
    }

    sv::LearnOptions lo;
    lo.gamma_prime = cfg.num_in("transform.gamma_prime", 0);
    lo.tau_scale = cfg.positive("transform.tau_scale");
    lo.xi = cfg.positive("transform.xi");
    lo.iterations = cfg.int_in("transform.iterations", 1);
    sv::LearnTrace trace;
    const sv::Transform t = sv::learn_transform(x, spec.patch_w, spec.patch_h, lo, &trace);

    sv::write_transform(resolve(cfg, dir, "io.transform"), t);
    std::ofstream f(dir / "learn_trace.csv", std::ios::binary);
    f << "half_step,objective\n";
    char line[64];
    for (std::size_t i = 0; i < trace.objective.size(); ++i) {
        std::snprintf(line, sizeof line, "%zu,%.17g\n", i, trace.objective[i]);
        f << line;
    }
    if (!f) throw sv::ConfigError("cannot write learn_trace.csv");
    write_manifest(cfg, dir, "learn");
    char msg[160];
    std::snprintf(msg, sizeof msg, "learned %dx%d transform from %lld patches, condition number %.3g",
                  t.n(), t.n(), static_cast<long long>(x.rows()), t.condition_number);
    note(msg);
}

void cmd_reconstruct(const RunConfig& cfg, const Options& opt)
{
    const fs::path dir = out_dir(cfg, opt);
    const std::string method = method_of(cfg, opt);
    const sv::ImageGrid g = image_grid(cfg);
    const sv::Sinogram y = sv::io::read_sinogram(existing(cfg, dir, "io.sinogram"));

    sv::Image truth;
    sv::Reference ref;
    const fs::path truth_path = resolve(cfg, dir, "io.truth");
    if (fs::exists(truth_path)) {
        truth = sv::io::read_image(truth_path);
        if (!(truth.grid == g)) throw sv::ConfigError("io.truth: grid differs from geometry.nx/ny/pixel");
        ref = {&truth, roi(cfg, g), cfg.positive("analysis.mu_water")};
    }

    sv::Image x;
    sv::Telemetry tel;
    if (method == "fbp") {
        x = fbp_image(cfg, y, g);
        tel.method = "fbp";
        const double r = ref.truth ? sv::rmse_roi(x, truth, ref.roi, ref.mu_water) : std::nan("");
        tel.records.push_back({0, 0, r, 0, 0});
    } else {
        const sv::Weights w = read_weights(existing(cfg, dir, "io.weights"));
        const sv::Projector a(y.geometry, g);
        const sv::ScanProblem prob{a, y, w};
        try {
            if (method == "ep") {
                sv::SolverState s = sv::pwls_ep(prob, ep_params(cfg), fbp_image(cfg, y, g), ref);
                x = std::move(s.x);
                tel = std::move(s.telemetry);
            } else {
                const sv::PatchSpec spec = patch_spec(cfg, g);
                const sv::Transform t = load_transform(cfg, dir, spec);
                const sv::Image init = initial_image(cfg, prob, g, ref);
                if (opt.dump_spectra) {
                    const sv::TransformOperator op(g, spec, t.psi);
                    const sv::ApplyFn ptp = [&](const Eigen::VectorXd& v, Eigen::VectorXd& o) { o = op.normal(v); };
                    const sv::ApplyFn ata = [&](const Eigen::VectorXd& v, Eigen::VectorXd& o) {
                        o = method == "st-l1" ? a.adjoint(a.forward(v))
                                              : a.adjoint(Eigen::VectorXd(w.values.cwiseProduct(a.forward(v))));
                    };
                    dump_spectra(dir / ("spectra_" + method + ".csv"), sv::estimate_spectra(ata, ptp, g));
                }
                sv::SolverState s;
                if (method == "st-l1") {
                    sv::ReconParams p;
                    p.lambda = cfg.positive("solver.lambda");
                    p.gamma_over_lambda = cfg.num_in("solver.gamma_over_lambda", 0);
                    p.kappa_nu = cfg.num_in("solver.kappa_nu", 1);
                    p.kappa_mu = cfg.num_in("solver.kappa_mu", 1);
                    p.outer_iters = cfg.int_in("solver.outer_iters", 1);
                    p.admm_iters = cfg.int_in("solver.admm_iters", 1);
                    p.pcg_iters = cfg.int_in("solver.pcg_iters", 1);
                    p.pcg_tol = cfg.num_in("solver.pcg_tol", 0);
                    p.early_stop = cfg.num_in("solver.early_stop", 0);
                    s = sv::pwls_st_l1(prob, t, spec, p, init, ref);
                } else {
                    sv::L2Params p;
                    p.lambda = cfg.positive("solver.l2_lambda");
                    const double thr = cfg.num_in("solver.l2_threshold", 0);
                    p.gamma = p.lambda * thr * thr;
                    p.outer_iters = cfg.int_in("solver.l2_outer_iters", 1);
                    p.pcg_iters = cfg.int_in("solver.l2_pcg_iters", 1);
                    s = sv::pwls_st_l2(prob, t, spec, p, init, ref);
                }
                x = std::move(s.x);
                tel = std::move(s.telemetry);
                if (method == "st-l1") {
                    char buf[96];
                    std::snprintf(buf, sizeof buf, "nu %.6g, mu %.6g", tel.nu, tel.mu);
                    note(buf);
                }
            }
        } catch (const sv::SolverFailure& e) {
            sv::io::write_image(dir / ("failure_" + method + ".raw"), e.state.x);
            throw;
        }
    }

    sv::io::write_image(dir / ("recon_" + method + ".raw"), x);
    tel.write_csv(dir / ("telemetry_" + method + ".csv"));
    if (opt.png) write_png(dir / ("recon_" + method + ".png"), x, 800, 1200, cfg.positive("analysis.mu_water"));
    write_manifest(cfg, dir, "reconstruct " + method);
    std::string msg = method + " done";
    if (ref.truth) {
        char buf[64];
        std::snprintf(buf, sizeof buf, ", RMSE %.3f HU", tel.records.back().rmse_hu);
        msg += buf;
    }
    note(msg);
}

void cmd_analyze(const RunConfig& cfg, const Options& opt, const std::string& task)
{
    const fs::path dir = out_dir(cfg, opt);
    const double mu_water = cfg.positive("analysis.mu_water");
    auto recon_path = [&] {
        const std::string r = cfg.str("analysis.recon");
        const fs::path p = r.empty() ? dir / ("recon_" + method_of(cfg, opt) + ".raw")
                                     : (fs::path(r).is_absolute() ? fs::path(r) : dir / r);
        if (!fs::exists(p)) throw sv::ConfigError("analysis.recon: file not found: " + p.string());
        return p;
    };

    char line[256];
    if (task == "rmse") {
        const sv::ImageGrid g = image_grid(cfg);
        const fs::path rp = recon_path();
        const sv::Image x = sv::io::read_image(rp);
        const sv::Image truth = sv::io::read_image(existing(cfg, dir, "io.truth"));
        if (!(x.grid == g) || !(truth.grid == g))
            throw sv::ConfigError("analysis.recon: grid differs from geometry.nx/ny/pixel");
        const double r = sv::rmse_roi(x, truth, roi(cfg, g), mu_water);
        std::snprintf(line, sizeof line, "%.17g\n", r);
        write_text(dir / "rmse.csv", "image,rmse_hu\n" + rp.filename().string() + "," + line);
        std::snprintf(line, sizeof line, "RMSE %.3f HU", r);
        note(line);
    } else if (task == "histogram") {
        const sv::ImageGrid g = image_grid(cfg);
        const sv::PatchSpec spec = patch_spec(cfg, g);
        const sv::Transform t = load_transform(cfg, dir, spec);
        const sv::Image x = sv::io::read_image(recon_path());
        if (!(x.grid == g)) throw sv::ConfigError("analysis.recon: grid differs from geometry.nx/ny/pixel");
        const sv::Codes tx = sv::apply_psi_tilde(x, t.psi, spec);
        sv::Codes z;
        if (method_of(cfg, opt) == "st-l2") {
            const double thr = cfg.num_in("solver.l2_threshold", 0);
            z = sv::sparse_code(tx, 1, thr * thr);
        } else {
            z = sv::sparse_code(tx, 1, cfg.num_in("solver.gamma_over_lambda", 0));
        }
        const sv::Histogram h = sv::sparsification_histogram(tx, z, cfg.int_in("analysis.histogram_bins", 1, 100000),
                                                             cfg.num_in("analysis.histogram_range", 0));
        sv::write_histogram_csv(dir / "histogram.csv", h);
        sv::write_histogram_dat(dir / "histogram.dat", h);
        std::snprintf(line, sizeof line, "excess kurtosis %.4g, sparsity %.3f%%", h.excess_kurtosis,
                      100 * sv::nonzero_fraction(z));
        note(line);
    } else if (task == "prop1") {
        const Eigen::Index n = cfg.int_in("analysis.prop1_n", 2, 1 << 16);
        const int trials = cfg.int_in("analysis.prop1_trials", 1);
        const double se = cfg.positive("analysis.prop1_sigma_eps2");
        const auto ak = cfg.list("analysis.prop1_a_kernel"), pk = cfg.list("analysis.prop1_psi_kernel");
        const Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(ak.data(), Eigen::Index(ak.size()));
        const Eigen::VectorXd p = Eigen::Map<const Eigen::VectorXd>(pk.data(), Eigen::Index(pk.size()));
        std::string out = "sigma_e2,closed_form,empirical,relative_difference,trials\n";
        for (double s2 : cfg.list("analysis.prop1_sigma_e2")) {
            if (!(s2 > 0)) throw sv::ConfigError("analysis.prop1_sigma_e2: variances must be > 0");
            const sv::Prop1Study st = sv::prop1_monte_carlo(a, p, n, se, s2, trials, cfg.seed());
            std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g,%.17g,%d\n", s2, st.closed_form, st.empirical,
                          (st.empirical - st.closed_form) / st.closed_form, st.trials);
            out += line;
        }
        write_text(dir / "prop1.csv", out);
        note("wrote " + (dir / "prop1.csv").string());
    } else if (task == "lambda-transfer") {
        const sv::ImageGrid g = image_grid(cfg);
        const sv::Weights w_new = read_weights(existing(cfg, dir, "io.weights"));
        const sv::Weights w_ref = read_weights(existing(cfg, dir, "io.weights_ref"));
        if (!(w_new.geometry == w_ref.geometry))
            throw sv::ConfigError("io.weights_ref: geometry differs from io.weights");
        const sv::Projector a(w_new.geometry, g);
        const double lref = cfg.positive("analysis.lambda_ref");
        const double lnew = sv::lambda_transfer(w_ref, w_new, a, roi(cfg, g), lref);
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\n", lref, lnew, lnew / lref);
        write_text(dir / "lambda_transfer.csv", std::string("lambda_ref,lambda_new,ratio\n") + line);
        std::snprintf(line, sizeof line, "lambda %.6g -> %.6g", lref, lnew);
        note(line);
    } else {
        throw sv::ConfigError("analyze: unknown task '" + task + "' (rmse, histogram, prop1, lambda-transfer)");
    }
    write_manifest(cfg, dir, "analyze " + task);
}

} // namespace svct
