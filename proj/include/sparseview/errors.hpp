#pragma once

#include <stdexcept>
#include <string>

namespace sv {

/// Invalid input: bad configuration, mismatched shapes, out-of-range parameters.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A computation produced a non-finite or otherwise unusable result.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace sv
