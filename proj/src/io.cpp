#include "sparseview/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace sv::io {
namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v)
{
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

} // namespace

void Header::set(const std::string& key, double value) { entries_[key] = format_double(value); }
void Header::set(const std::string& key, long long value) { entries_[key] = std::to_string(value); }

const std::string& Header::get(const std::string& key) const
{
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError("header: missing key '" + key + "'");
    return it->second;
}

double Header::get_double(const std::string& key) const
{
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("header: key '" + key + "' is not a number: " + v);
    }
}

long long Header::get_int(const std::string& key) const
{
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        long long d = std::stoll(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        throw ConfigError("header: key '" + key + "' is not an integer: " + v);
    }
}

std::filesystem::path header_path(const std::filesystem::path& data)
{
    return std::filesystem::path(data.string() + ".hdr");
}

Header read_header(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open header " + path.string());
    Header h;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected 'key = value'");
        h.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return h;
}

void write_header(const std::filesystem::path& path, const Header& h)
{
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write header " + path.string());
    out << "# sparseview raw header: little-endian float64, row-major\n";
    for (const auto& [k, v] : h.entries()) out << k << " = " << v << '\n';
}

void write_raw(const std::filesystem::path& path, const double* data, std::size_t count)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + path.string());
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(data), std::streamsize(count * sizeof(double)));
    } else {
        for (std::size_t i = 0; i < count; ++i) {
            auto bits = std::bit_cast<std::uint64_t>(data[i]);
            char bytes[8];
            for (int b = 0; b < 8; ++b) bytes[b] = char((bits >> (8 * b)) & 0xff);
            out.write(bytes, 8);
        }
    }
    if (!out) throw ConfigError("short write to " + path.string());
}

Eigen::VectorXd read_raw(const std::filesystem::path& path, std::size_t expected_count)
{
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw ConfigError("cannot open " + path.string());
    const auto bytes = std::size_t(in.tellg());
    if (bytes != expected_count * sizeof(double))
        throw ConfigError(path.string() + ": expected " + std::to_string(expected_count) + " float64 values, file has " +
                          std::to_string(bytes) + " bytes");
    in.seekg(0);
    Eigen::VectorXd v(static_cast<Eigen::Index>(expected_count));
    std::vector<unsigned char> buf(bytes);
    in.read(reinterpret_cast<char*>(buf.data()), std::streamsize(bytes));
    for (std::size_t i = 0; i < expected_count; ++i) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) bits |= std::uint64_t(buf[i * 8 + std::size_t(b)]) << (8 * b);
        v[Eigen::Index(i)] = std::bit_cast<double>(bits);
    }
    return v;
}

void write_image(const std::filesystem::path& path, const Image& img, const std::string& units)
{
    Header h;
    h.set("kind", std::string("image"));
    h.set("width", img.grid.width);
    h.set("height", img.grid.height);
    h.set("dx", img.grid.dx);
    h.set("dy", img.grid.dy);
    h.set("length_units", std::string("mm"));
    h.set("units", units);
    write_raw(path, img.values.data(), std::size_t(img.values.size()));
    write_header(header_path(path), h);
}

Image read_image(const std::filesystem::path& path)
{
    const Header h = read_header(header_path(path));
    if (h.get("kind") != "image") throw ConfigError(path.string() + ": not an image file");
    ImageGrid g{int(h.get_int("width")), int(h.get_int("height")), h.get_double("dx"), h.get_double("dy")};
    g.validate();
    return Image(g, read_raw(path, std::size_t(g.size())));
}

void put_geometry(Header& h, const Geometry& g)
{
    h.set("geometry", std::string(g.kind == ScanKind::parallel ? "parallel" : "fan-flat"));
    h.set("views", g.num_views);
    h.set("channels", g.num_channels);
    h.set("channel_spacing", g.channel_spacing);
    if (g.kind == ScanKind::fan_flat) {
        h.set("source_to_iso", g.source_to_iso);
        h.set("source_to_detector", g.source_to_detector);
    }
}

Geometry get_geometry(const Header& h)
{
    const std::string kind = h.get("geometry");
    const int views = int(h.get_int("views"));
    const int channels = int(h.get_int("channels"));
    const double ds = h.get_double("channel_spacing");
    if (kind == "parallel") return Geometry::parallel(views, channels, ds);
    if (kind == "fan-flat")
        return Geometry::fan_flat(views, channels, ds, h.get_double("source_to_iso"),
                                  h.get_double("source_to_detector"));
    throw ConfigError("header: unknown geometry '" + kind + "'");
}

void write_sinogram(const std::filesystem::path& path, const Sinogram& s, const std::string& kind)
{
    Header h;
    h.set("kind", kind);
    put_geometry(h, s.geometry);
    write_raw(path, s.values.data(), std::size_t(s.values.size()));
    write_header(header_path(path), h);
}

Sinogram read_sinogram(const std::filesystem::path& path)
{
    const Header h = read_header(header_path(path));
    const Geometry g = get_geometry(h);
    return Sinogram(g, read_raw(path, std::size_t(g.num_rays())));
}

} // namespace sv::io
