#pragma once

#include <Eigen/Core>

#include <filesystem>
#include <map>
#include <string>

#include "sparseview/geometry.hpp"

namespace sv::io {

/// Plain-text sidecar: one "key = value" per line, '#' starts a comment.
/// Stored next to the data file as <data path>.hdr.
class Header {
public:
    void set(const std::string& key, const std::string& value) { entries_[key] = value; }
    void set(const std::string& key, double value);
    void set(const std::string& key, long long value);
    void set(const std::string& key, int value) { set(key, static_cast<long long>(value)); }

    [[nodiscard]] bool has(const std::string& key) const { return entries_.count(key) != 0; }
    [[nodiscard]] const std::string& get(const std::string& key) const;
    [[nodiscard]] double get_double(const std::string& key) const;
    [[nodiscard]] long long get_int(const std::string& key) const;

    [[nodiscard]] const std::map<std::string, std::string>& entries() const { return entries_; }

private:
    std::map<std::string, std::string> entries_;
};

std::filesystem::path header_path(const std::filesystem::path& data);

Header read_header(const std::filesystem::path& path);
void write_header(const std::filesystem::path& path, const Header& h);

/// Raw little-endian float64 array.
void write_raw(const std::filesystem::path& path, const double* data, std::size_t count);
Eigen::VectorXd read_raw(const std::filesystem::path& path, std::size_t expected_count);

void write_image(const std::filesystem::path& path, const Image& img, const std::string& units = "1/mm");
Image read_image(const std::filesystem::path& path);

/// kind distinguishes measurement arrays sharing the sinogram layout
/// ("sinogram", "prelog", "weights").
void write_sinogram(const std::filesystem::path& path, const Sinogram& s, const std::string& kind = "sinogram");
Sinogram read_sinogram(const std::filesystem::path& path);

void put_geometry(Header& h, const Geometry& g);
Geometry get_geometry(const Header& h);

} // namespace sv::io
