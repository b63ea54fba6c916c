#pragma once

#include <filesystem>
#include <string>

#include "config.hpp"
#include "sparseview/geometry.hpp"

namespace svct {

struct Options {
    std::filesystem::path out; // overrides io.dir when set
    std::string method;        // overrides solver.method when set
    bool png = false;
    bool dump_spectra = false;
};

void cmd_simulate(const RunConfig& cfg, const Options& opt);
void cmd_learn(const RunConfig& cfg, const Options& opt);
void cmd_reconstruct(const RunConfig& cfg, const Options& opt);
/// task: rmse | histogram | prop1 | lambda-transfer
void cmd_analyze(const RunConfig& cfg, const Options& opt, const std::string& task);

/// 8-bit grayscale PNG of the image in modified HU, clipped to [lo_hu, hi_hu].
/// The top row of the file is the largest y.
void write_png(const std::filesystem::path& path, const sv::Image& img, double lo_hu = 800, double hi_hu = 1200,
               double mu_water = 0.02);

} // namespace svct
