#include "sparseview/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <vector>

#include "sparseview/errors.hpp"

namespace sv {
namespace {

// FFTW's planner is not reentrant.
std::mutex& planner_mutex()
{
    static std::mutex m;
    return m;
}

constexpr unsigned plan_flags = FFTW_ESTIMATE | FFTW_UNALIGNED;

fftw_complex* as_fftw(std::span<std::complex<double>> d)
{
    return reinterpret_cast<fftw_complex*>(d.data());
}

void run(void* plan, std::span<std::complex<double>> data, std::size_t expected)
{
    if (data.size() != expected) throw ConfigError("fft: buffer size mismatch");
    fftw_execute_dft(static_cast<fftw_plan>(plan), as_fftw(data), as_fftw(data));
}

} // namespace

Fft1d::Fft1d(int n) : n_(n)
{
    if (n < 1) throw ConfigError("fft: size must be positive");
    std::vector<std::complex<double>> scratch(static_cast<std::size_t>(n));
    std::lock_guard lock(planner_mutex());
    fwd_ = fftw_plan_dft_1d(n, as_fftw(scratch), as_fftw(scratch), FFTW_FORWARD, plan_flags);
    inv_ = fftw_plan_dft_1d(n, as_fftw(scratch), as_fftw(scratch), FFTW_BACKWARD, plan_flags);
}

Fft1d::~Fft1d()
{
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(inv_));
}

void Fft1d::forward(std::span<std::complex<double>> data) const { run(fwd_, data, std::size_t(n_)); }
void Fft1d::inverse(std::span<std::complex<double>> data) const { run(inv_, data, std::size_t(n_)); }

Fft2d::Fft2d(int width, int height) : width_(width), height_(height)
{
    if (width < 1 || height < 1) throw ConfigError("fft: size must be positive");
    std::vector<std::complex<double>> scratch(std::size_t(width) * std::size_t(height));
    std::lock_guard lock(planner_mutex());
    fwd_ = fftw_plan_dft_2d(height, width, as_fftw(scratch), as_fftw(scratch), FFTW_FORWARD, plan_flags);
    inv_ = fftw_plan_dft_2d(height, width, as_fftw(scratch), as_fftw(scratch), FFTW_BACKWARD, plan_flags);
}

Fft2d::~Fft2d()
{
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
    fftw_destroy_plan(static_cast<fftw_plan>(inv_));
}

void Fft2d::forward(std::span<std::complex<double>> data) const
{
    run(fwd_, data, std::size_t(width_) * std::size_t(height_));
}

void Fft2d::inverse(std::span<std::complex<double>> data) const
{
    run(inv_, data, std::size_t(width_) * std::size_t(height_));
}

} // namespace sv
