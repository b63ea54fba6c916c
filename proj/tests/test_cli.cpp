#include <doctest.h>

#include <sys/wait.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "config.hpp"
#include "sparseview/io.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args)
{
    const std::string cmd = std::string(SVCT_BIN) + " " + args + " 2>/dev/null";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p)
{
    std::ifstream f(p, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name)
{
    const fs::path d = fs::temp_directory_path() / ("svct_test_" + name);
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
}

void write(const fs::path& p, const std::string& text)
{
    std::ofstream f(p, std::ios::binary);
    f << text;
}

std::string error_of(const std::string& ini)
{
    try {
        (void)svct::RunConfig::from_string(ini).num("solver.lambda");
    } catch (const sv::ConfigError& e) {
        return e.what();
    }
    return "";
}

const char* smoke_ini = R"(seed = 7
[geometry]
nx = 64
ny = 64
pixel = 3.2
channels = 128
channel_spacing = 4.0
[transform]
iterations = 30
[solver]
outer_iters = 50
ep_iters = 50
l2_outer_iters = 30
[analysis]
roi_radius = 90
prop1_trials = 2000
)";

} // namespace

TEST_CASE("config defaults, overrides and key-path errors")
{
    const svct::RunConfig d = svct::RunConfig::from_string("");
    CHECK(d.integer("geometry.views") == 60);
    CHECK(d.num("noise.rho0") == 1e5);
    CHECK(d.seed() == 1);

    const svct::RunConfig c = svct::RunConfig::from_string("seed = 99\n[solver]\nlambda = 2.5\n[io]\n");
    CHECK(c.num("solver.lambda") == 2.5);
    CHECK(c.seed() == 99);
    CHECK(c.list("phantom.training_slices").size() == 5);

    CHECK(error_of("[solver]\nlambdx = 1\n").find("solver.lambdx") != std::string::npos);
    CHECK(error_of("[solver]\nlambda = abc\n").find("solver.lambda") != std::string::npos);
    CHECK(error_of("[sovler]\nlambda = 1\n").find("sovler.lambda") != std::string::npos);
    CHECK(error_of("seed = -3\n").find("seed") != std::string::npos);
    CHECK(error_of("bogus = 1\n").find("bogus") != std::string::npos);
    CHECK(error_of("[solver\n").find("config") != std::string::npos);

    const svct::RunConfig r = svct::RunConfig::from_string("[geometry]\nviews = 0\n");
    try {
        (void)r.int_in("geometry.views", 1);
        FAIL("expected a range error");
    } catch (const sv::ConfigError& e) {
        CHECK(std::string(e.what()).find("geometry.views") == 0);
    }
}

TEST_CASE("manifest round trip")
{
    const svct::RunConfig c = svct::RunConfig::from_string("seed = 5\n[solver]\nlambda = 7\n");
    const std::string m = c.manifest("learn");
    const svct::RunConfig back = svct::RunConfig::from_string(m);
    CHECK(back.manifest("learn") == m);
    CHECK(back.num("solver.lambda") == 7);
    CHECK(back.seed() == 5);
    CHECK(m.find(svct::tool_version) != std::string::npos);
    CHECK(svct::RunConfig::from_string(svct::RunConfig::schema_text()).manifest("x") ==
          svct::RunConfig::from_string("").manifest("x"));
}

TEST_CASE("fbp of a zero sinogram is a zero image")
{
    const fs::path dir = scratch("zero");
    const sv::Geometry geo = sv::Geometry::parallel(30, 48, 1.0);
    sv::io::write_sinogram(dir / "zero.raw", sv::Sinogram(geo));
    write(dir / "c.ini", "[geometry]\nnx = 32\nny = 32\npixel = 1\n[io]\nsinogram = zero.raw\ndir = " + dir.string() +
                             "\n");
    REQUIRE(run("reconstruct --config " + (dir / "c.ini").string() + " --method fbp --png") == 0);
    const sv::Image x = sv::io::read_image(dir / "recon_fbp.raw");
    CHECK(x.grid.width == 32);
    CHECK(x.values.cwiseAbs().maxCoeff() == 0);
    CHECK(fs::exists(dir / "recon_fbp.png"));
    CHECK(fs::exists(dir / "manifest_reconstruct_fbp.ini"));
    fs::remove_all(dir);
}

TEST_CASE("exit codes")
{
    const fs::path dir = scratch("exit");
    CHECK(run("simulate --config " + (dir / "missing.ini").string()) == 2);
    CHECK(run("frobnicate") == 2);
    CHECK(run("simulate") == 2);
    write(dir / "bad.ini", "[solver]\nlambdx = 1\n");
    CHECK(run("simulate --config " + (dir / "bad.ini").string()) == 2);
    write(dir / "range.ini", "[geometry]\nviews = -4\n[io]\ndir = " + dir.string() + "\n");
    CHECK(run("simulate --config " + (dir / "range.ini").string()) == 2);
    CHECK(run("reconstruct --config " + (dir / "range.ini").string() + " --method sart") == 2);
    CHECK(run("analyze nonsense --config " + (dir / "range.ini").string()) == 2);

    // the data term overflows, so the solver stops with a numerical failure
    const sv::Geometry geo = sv::Geometry::parallel(12, 24, 1.0);
    sv::Sinogram y(geo);
    y.values.setConstant(1e200);
    sv::io::write_sinogram(dir / "y.raw", y);
    sv::io::write_sinogram(dir / "w.raw", sv::Sinogram(geo, Eigen::VectorXd::Ones(geo.num_rays())), "weights");
    write(dir / "huge.ini", "[geometry]\nnx = 16\nny = 16\npixel = 1\n[solver]\nep_iters = 5\n[io]\nsinogram = y.raw\n"
                           "weights = w.raw\ndir = " +
                               dir.string() + "\n");
    CHECK(run("reconstruct --config " + (dir / "huge.ini").string() + " --method ep") == 3);
    CHECK(run("--help >/dev/null") == 0);
    fs::remove_all(dir);
}

TEST_CASE("64x64 pipeline smoke run is complete, fast and reproducible")
{
    const fs::path dir = scratch("smoke");
    const fs::path ini = dir / "smoke.ini";
    write(ini, smoke_ini);
    const std::string cfg = " --config " + ini.string() + " --out " + (dir / "run").string();

    const auto t0 = std::chrono::steady_clock::now();
    REQUIRE(run("simulate" + cfg) == 0);
    REQUIRE(run("learn" + cfg) == 0);
    for (const char* m : {"fbp", "ep", "st-l2", "st-l1"})
        REQUIRE(run(std::string("reconstruct --method ") + m + " --png --dump-spectra" + cfg) == 0);
    for (const char* t : {"rmse", "histogram", "prop1"}) REQUIRE(run(std::string("analyze ") + t + cfg) == 0);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    MESSAGE("pipeline seconds: " << secs);
    CHECK(secs < 60);

    const fs::path out = dir / "run";
    for (const char* f :
         {"truth.raw", "truth.raw.hdr", "truth_fine.raw", "sinogram.raw", "prelog.raw", "weights.raw", "transform.raw",
          "learn_trace.csv", "recon_fbp.raw", "recon_ep.raw", "recon_st-l2.raw", "recon_st-l1.raw", "recon_st-l1.png",
          "telemetry_fbp.csv", "telemetry_ep.csv", "telemetry_st-l2.csv", "telemetry_st-l1.csv", "spectra_st-l1.csv",
          "rmse.csv", "histogram.csv", "histogram.dat", "prop1.csv", "manifest_simulate.ini", "manifest_learn.ini",
          "manifest_reconstruct_st-l1.ini", "manifest_analyze_prop1.ini"})
        CHECK_MESSAGE(fs::exists(out / f), f);

    // same seed, same bytes; rerunning from the manifest as well
    const std::string tel = slurp(out / "telemetry_st-l1.csv");
    const std::string sino = slurp(out / "sinogram.raw");
    REQUIRE(run("reconstruct --method st-l1" + cfg) == 0);
    CHECK(slurp(out / "telemetry_st-l1.csv") == tel);
    REQUIRE(run("reconstruct --config " + (out / "manifest_reconstruct_st-l1.ini").string()) == 0);
    CHECK(slurp(out / "telemetry_st-l1.csv") == tel);

    REQUIRE(run("simulate" + cfg) == 0);
    CHECK(slurp(out / "sinogram.raw") == sino);
    REQUIRE(run("simulate --seed 8" + cfg) == 0);
    CHECK(slurp(out / "sinogram.raw") != sino);
    fs::remove_all(dir);
}
