#include "config.hpp"

#include <boost/property_tree/ini_parser.hpp>

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <sstream>

#include "sparseview/errors.hpp"

namespace svct {

namespace {

struct Entry {
    const char* key;
    const char* value;
    const char* doc;
};

// Lengths in mm, attenuation in 1/mm.
const Entry schema[] = {
    {"phantom.kind", "chest", "chest | disk"},
    {"phantom.slice", "0", "chest slice index of the test image"},
    {"phantom.training_slices", "-20,-10,10,20,30", "chest slices used to learn the transform"},
    {"phantom.disk_radius", "80", "disk radius"},
    {"phantom.disk_mu", "0.02", "disk attenuation"},

    {"geometry.nx", "128", "image width in pixels"},
    {"geometry.ny", "128", "image height in pixels"},
    {"geometry.pixel", "1.6", "pixel size"},
    {"geometry.kind", "fan_flat", "fan_flat | parallel"},
    {"geometry.views", "60", "number of views"},
    {"geometry.channels", "256", "detector channels"},
    {"geometry.channel_spacing", "2.0", "channel pitch on the detector"},
    {"geometry.source_to_iso", "541", "fan only"},
    {"geometry.source_to_detector", "949", "fan only"},
    {"geometry.fine_factor", "2", "simulation grid refinement (avoids the inverse crime)"},

    {"noise.rho0", "1e5", "incident photons per ray"},
    {"noise.sigma2", "25", "electronic noise variance"},

    {"patches.width", "8", ""},
    {"patches.height", "8", ""},
    {"patches.stride_x", "1", ""},
    {"patches.stride_y", "1", ""},

    {"transform.gamma_prime", "4.4e-8", "l0 weight of transform learning"},
    {"transform.tau_scale", "1", "tau = tau_scale * ||X||_F^2"},
    {"transform.xi", "1", ""},
    {"transform.iterations", "100", ""},
    {"transform.max_patches", "0", "evenly subsample the training patches; 0 keeps all"},

    {"solver.method", "st-l1", "fbp | ep | st-l2 | st-l1 (overridden by --method)"},
    {"solver.init", "ep", "fbp | ep | constant | given"},
    {"solver.init_value", "0", "constant initial image"},
    {"solver.init_image", "", "image file for init = given"},
    {"solver.fbp_cutoff", "1", "Hanning cutoff as a fraction of Nyquist"},
    {"solver.lambda", "60", "st-l1"},
    {"solver.gamma_over_lambda", "3.2e-3", "st-l1 hard threshold on codes"},
    {"solver.kappa_nu", "10", "st-l1"},
    {"solver.kappa_mu", "2", "st-l1"},
    {"solver.outer_iters", "1000", "st-l1"},
    {"solver.admm_iters", "2", "st-l1"},
    {"solver.pcg_iters", "2", "st-l1"},
    {"solver.pcg_tol", "0", "st-l1; 0 runs all pcg_iters steps"},
    {"solver.early_stop", "0", "st-l1 relative x-change stop; 0 disables"},
    {"solver.ep_beta", "1e6", ""},
    {"solver.ep_delta", "2e-4", "10 HU"},
    {"solver.ep_iters", "100", ""},
    {"solver.l2_lambda", "1e5", ""},
    {"solver.l2_threshold", "1.6e-3", "codes below this are zeroed (sqrt(gamma / lambda))"},
    {"solver.l2_outer_iters", "100", ""},
    {"solver.l2_pcg_iters", "5", ""},

    {"analysis.roi_radius", "0", "RMSE region radius; 0 uses the whole grid"},
    {"analysis.mu_water", "0.02", "1000 HU"},
    {"analysis.recon", "", "image for rmse and histogram; empty: recon_<solver.method>.raw"},
    {"analysis.histogram_bins", "101", ""},
    {"analysis.histogram_range", "0", "0 uses the largest error"},
    {"analysis.prop1_n", "16", ""},
    {"analysis.prop1_trials", "10000", ""},
    {"analysis.prop1_sigma_eps2", "1", ""},
    {"analysis.prop1_sigma_e2", "0.25,0.5,1,2,4", ""},
    {"analysis.prop1_a_kernel", "1,0.6,0.3", "periodic convolution kernel of A"},
    {"analysis.prop1_psi_kernel", "1,-1", "periodic convolution kernel of Psi~"},
    {"analysis.lambda_ref", "1", "lambda tuned for io.weights_ref"},

    {"io.dir", "out", "output directory; relative file names below resolve against it"},
    {"io.truth", "truth.raw", ""},
    {"io.sinogram", "sinogram.raw", ""},
    {"io.weights", "weights.raw", ""},
    {"io.weights_ref", "", "reference weights for lambda-transfer"},
    {"io.transform", "transform.raw", ""},
};

const Entry* find(const std::string& key)
{
    for (const Entry& e : schema)
        if (key == e.key) return &e;
    return nullptr;
}

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

double parse_double(const std::string& key, const std::string& text)
{
    const std::string t = trim(text);
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(t.c_str(), &end);
    if (t.empty() || *end != '\0' || errno == ERANGE)
        throw sv::ConfigError(key + ": expected a number, got '" + text + "'");
    return v;
}

RunConfig build(boost::property_tree::ptree in)
{
    RunConfig cfg;
    for (const auto& [name, node] : in) {
        if (node.empty()) {
            const bool section = name == "manifest" || std::any_of(std::begin(schema), std::end(schema), [&](const Entry& e) {
                return std::string(e.key).starts_with(name + ".");
            });
            if (name != "seed" && !(section && node.data().empty()))
                throw sv::ConfigError(name + ": unknown top-level key");
            continue;
        }
        if (name == "manifest") continue;
        for (const auto& [key, value] : node) {
            const std::string path = name + "." + key;
            if (!find(path)) throw sv::ConfigError(path + ": unknown key");
            cfg.set(path, value.data());
        }
    }
    if (auto s = in.get_optional<std::string>("seed")) {
        const std::string t = trim(*s);
        char* end = nullptr;
        errno = 0;
        const unsigned long long v = std::strtoull(t.c_str(), &end, 10);
        if (t.empty() || t[0] == '-' || *end != '\0' || errno == ERANGE)
            throw sv::ConfigError("seed: expected a nonnegative 64-bit integer, got '" + *s + "'");
        cfg.set_seed(v);
    }
    return cfg;
}

} // namespace

void RunConfig::set(const std::string& key, const std::string& value)
{
    if (!find(key)) throw sv::ConfigError(key + ": unknown key");
    tree_.put(boost::property_tree::ptree::path_type(key, '.'), trim(value));
}

RunConfig RunConfig::load(const std::filesystem::path& path)
{
    if (!std::filesystem::exists(path)) throw sv::ConfigError("config file not found: " + path.string());
    boost::property_tree::ptree t;
    try {
        boost::property_tree::read_ini(path.string(), t);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw sv::ConfigError(std::string("config: ") + e.what());
    }
    return build(std::move(t));
}

RunConfig RunConfig::from_string(const std::string& text)
{
    std::istringstream in(text);
    boost::property_tree::ptree t;
    try {
        boost::property_tree::read_ini(in, t);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw sv::ConfigError(std::string("config: ") + e.what());
    }
    return build(std::move(t));
}

std::string RunConfig::str(const std::string& key) const
{
    const Entry* e = find(key);
    if (!e) throw sv::ConfigError(key + ": not in the schema");
    return tree_.get<std::string>(boost::property_tree::ptree::path_type(key, '.'), e->value);
}

double RunConfig::num(const std::string& key) const
{
    const double v = parse_double(key, str(key));
    if (!std::isfinite(v)) throw sv::ConfigError(key + ": must be finite");
    return v;
}

long long RunConfig::integer(const std::string& key) const
{
    const std::string t = trim(str(key));
    char* end = nullptr;
    errno = 0;
    const long long v = std::strtoll(t.c_str(), &end, 10);
    if (t.empty() || *end != '\0' || errno == ERANGE)
        throw sv::ConfigError(key + ": expected an integer, got '" + t + "'");
    return v;
}

bool RunConfig::flag(const std::string& key) const
{
    const std::string t = trim(str(key));
    if (t == "true" || t == "1" || t == "yes") return true;
    if (t == "false" || t == "0" || t == "no") return false;
    throw sv::ConfigError(key + ": expected true or false, got '" + t + "'");
}

std::vector<double> RunConfig::list(const std::string& key) const
{
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(parse_double(key, item));
    if (out.empty()) throw sv::ConfigError(key + ": expected a comma-separated list of numbers");
    return out;
}

double RunConfig::num_in(const std::string& key, double lo, double hi) const
{
    const double v = num(key);
    if (v < lo || v > hi) {
        std::ostringstream m;
        m << key << ": " << v << " is outside [" << lo << ", " << hi << "]";
        throw sv::ConfigError(m.str());
    }
    return v;
}

double RunConfig::positive(const std::string& key) const
{
    const double v = num(key);
    if (!(v > 0)) throw sv::ConfigError(key + ": must be > 0");
    return v;
}

int RunConfig::int_in(const std::string& key, long long lo, long long hi) const
{
    const long long v = integer(key);
    if (v < lo || v > hi)
        throw sv::ConfigError(key + ": " + std::to_string(v) + " is outside [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
    return int(v);
}

std::string RunConfig::manifest(const std::string& command) const
{
    std::ostringstream out;
    out << "seed = " << seed_ << "\n";
    std::string section;
    for (const Entry& e : schema) {
        const std::string key = e.key;
        const auto dot = key.find('.');
        if (key.substr(0, dot) != section) {
            section = key.substr(0, dot);
            out << "\n[" << section << "]\n";
        }
        out << key.substr(dot + 1) << " = " << str(key) << "\n";
    }
    out << "\n[manifest]\ntool = " << tool_version << "\ncommand = " << command << "\n";
    return out.str();
}

std::string RunConfig::schema_text()
{
    std::ostringstream out;
    out << "seed = 1\n";
    std::string section;
    for (const Entry& e : schema) {
        const std::string key = e.key;
        const auto dot = key.find('.');
        if (key.substr(0, dot) != section) {
            section = key.substr(0, dot);
            out << "\n[" << section << "]\n";
        }
        if (*e.doc) out << "; " << e.doc << "\n";
        out << key.substr(dot + 1) << " = " << e.value << "\n";
    }
    return out.str();
}

} // namespace svct
