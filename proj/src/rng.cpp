#include "sparseview/rng.hpp"

#include <cmath>
#include <numbers>

namespace sv {

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k)
{
    constexpr std::uint64_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
    constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = m0 * c[0];
        const std::uint64_t p1 = m1 * c[2];
        c = {std::uint32_t(p1 >> 32) ^ c[1] ^ k[0], std::uint32_t(p1), std::uint32_t(p0 >> 32) ^ c[3] ^ k[1],
             std::uint32_t(p0)};
        k[0] += w0;
        k[1] += w1;
    }
    return c;
}

std::uint32_t PhiloxStream::next_u32()
{
    if (used_ == 4) {
        buf_ = philox4x32({std::uint32_t(block_), std::uint32_t(block_ >> 32), std::uint32_t(stream_),
                           std::uint32_t(stream_ >> 32)},
                          {std::uint32_t(seed_), std::uint32_t(seed_ >> 32)});
        ++block_;
        used_ = 0;
    }
    return buf_[std::size_t(used_++)];
}

std::uint64_t PhiloxStream::next_u64()
{
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
}

double PhiloxStream::uniform()
{
    return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double PhiloxStream::normal()
{
    const double u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
}

std::uint64_t PhiloxStream::poisson(double mean)
{
    if (!(mean > 0)) return 0;
    if (mean > 1000.0) {
        const double k = std::round(mean + std::sqrt(mean) * normal());
        return k > 0 ? std::uint64_t(k) : 0;
    }
    // Inversion by sequential search. exp(-mean) underflows past ~700, so
    // large means are split into independent pieces (the sum stays Poisson).
    std::uint64_t total = 0;
    double remaining = mean;
    while (remaining > 0) {
        const double part = std::min(remaining, 500.0);
        remaining -= part;
        const double u = uniform();
        double p = std::exp(-part);
        double cdf = p;
        std::uint64_t k = 0;
        while (u > cdf && p > 0) {
            ++k;
            p *= part / double(k);
            cdf += p;
        }
        total += k;
    }
    return total;
}

} // namespace sv
