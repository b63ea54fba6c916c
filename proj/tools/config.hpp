#pragma once

#include <boost/property_tree/ptree.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace svct {

inline constexpr const char* tool_version = "svct 1.0.0";

/// INI run configuration. Every key must appear in the schema; values are
/// parsed on access and errors name the key path ("solver.lambda").
class RunConfig {
public:
    static RunConfig load(const std::filesystem::path& path);
    static RunConfig from_string(const std::string& text);

    [[nodiscard]] std::string str(const std::string& key) const;
    [[nodiscard]] double num(const std::string& key) const;
    [[nodiscard]] long long integer(const std::string& key) const;
    [[nodiscard]] bool flag(const std::string& key) const;
    [[nodiscard]] std::vector<double> list(const std::string& key) const;

    /// Number that must satisfy lo <= v (and v <= hi when hi is given).
    [[nodiscard]] double num_in(const std::string& key, double lo, double hi = 1e308) const;
    [[nodiscard]] double positive(const std::string& key) const;
    [[nodiscard]] int int_in(const std::string& key, long long lo, long long hi = 1LL << 40) const;

    [[nodiscard]] std::uint64_t seed() const { return seed_; }
    void set_seed(std::uint64_t s) { seed_ = s; }
    void set(const std::string& key, const std::string& value);

    /// Resolved configuration (all schema keys, defaults filled in) followed
    /// by a [manifest] section. Feeding it back as --config reproduces the run.
    [[nodiscard]] std::string manifest(const std::string& command) const;

    /// "key = default  # description" lines for every schema entry.
    static std::string schema_text();

private:
    boost::property_tree::ptree tree_;
    std::uint64_t seed_ = 1;
};

} // namespace svct
