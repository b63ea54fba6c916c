#include <CLI11.hpp>

#include <iostream>

#include "commands.hpp"
#include "sparseview/errors.hpp"

namespace {

enum Exit { ok = 0, failure = 1, config_error = 2, numerical_error = 3 };

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Sparse-view CT reconstruction with learned sparsifying transforms"};
    app.require_subcommand(1);
    app.set_version_flag("--version", svct::tool_version);

    std::string config;
    long long seed = -1;
    svct::Options opt;
    std::string out, task;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config, "INI run configuration")->required();
        sub->add_option("--seed", seed, "overrides the config seed")->check(CLI::NonNegativeNumber);
        sub->add_option("--out", out, "output directory (overrides io.dir)");
    };
    CLI::App* simulate = app.add_subcommand("simulate", "phantom, sinogram and weights");
    CLI::App* learn = app.add_subcommand("learn", "learn a sparsifying transform");
    CLI::App* recon = app.add_subcommand("reconstruct", "reconstruct an image");
    CLI::App* analyze = app.add_subcommand("analyze", "metrics and studies");
    CLI::App* schema = app.add_subcommand("schema", "print every config key with its default");
    for (CLI::App* s : {simulate, learn, recon, analyze}) common(s);
    recon->add_option("--method", opt.method, "fbp | ep | st-l2 | st-l1")
        ->check(CLI::IsMember({"fbp", "ep", "st-l2", "st-l1"}));
    recon->add_flag("--png", opt.png, "also write an 8-bit PNG in the [800, 1200] HU window");
    recon->add_flag("--dump-spectra", opt.dump_spectra, "write the preconditioner spectra (st methods)");
    analyze->add_option("task", task, "rmse | histogram | prop1 | lambda-transfer")
        ->required()
        ->check(CLI::IsMember({"rmse", "histogram", "prop1", "lambda-transfer"}));
    analyze->add_option("--method", opt.method, "method whose reconstruction is analyzed")
        ->check(CLI::IsMember({"fbp", "ep", "st-l2", "st-l1"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (schema->parsed()) {
            std::cout << svct::RunConfig::schema_text();
            return ok;
        }
        svct::RunConfig cfg = svct::RunConfig::load(config);
        if (seed >= 0) cfg.set_seed(static_cast<std::uint64_t>(seed));
        // overrides are recorded in the manifest
        if (!out.empty()) cfg.set("io.dir", out);
        if (!opt.method.empty()) cfg.set("solver.method", opt.method);
        if (simulate->parsed()) svct::cmd_simulate(cfg, opt);
        if (learn->parsed()) svct::cmd_learn(cfg, opt);
        if (recon->parsed()) svct::cmd_reconstruct(cfg, opt);
        if (analyze->parsed()) svct::cmd_analyze(cfg, opt, task);
    } catch (const sv::ConfigError& e) {
        std::cerr << "svct: configuration error: " << e.what() << "\n";
        return config_error;
    } catch (const sv::NumericalError& e) {
        std::cerr << "svct: numerical failure: " << e.what() << "\n";
        return numerical_error;
    } catch (const std::exception& e) {
        std::cerr << "svct: " << e.what() << "\n";
        return failure;
    }
    return ok;
}
