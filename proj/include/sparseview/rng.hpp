#pragma once

#include <array>
#include <cstdint>

namespace sv {

/// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter, std::array<std::uint32_t, 2> key);

/// Counter-based stream: key = seed, counter = (draw index, stream id).
/// Two streams with different ids never share a counter, so per-item streams
/// give the same numbers regardless of evaluation order.
class PhiloxStream {
public:
    PhiloxStream(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {}

    std::uint32_t next_u32();
    std::uint64_t next_u64();
    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform();
    double normal();
    /// Exact inversion for mean <= 1000, rounded normal approximation above.
    std::uint64_t poisson(double mean);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t block_ = 0;
    std::array<std::uint32_t, 4> buf_{};
    int used_ = 4;
};

} // namespace sv
