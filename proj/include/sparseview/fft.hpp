#pragma once

#include <complex>
#include <span>

namespace sv {

/// In-place complex DFT of a fixed size, planned with FFTW_ESTIMATE so the
/// same input always yields bit-identical output. inverse() is unnormalized.
class Fft1d {
public:
    explicit Fft1d(int n);
    ~Fft1d();
    Fft1d(const Fft1d&) = delete;
    Fft1d& operator=(const Fft1d&) = delete;

    [[nodiscard]] int size() const { return n_; }
    void forward(std::span<std::complex<double>> data) const;
    void inverse(std::span<std::complex<double>> data) const;

private:
    int n_;
    void* fwd_ = nullptr;
    void* inv_ = nullptr;
};

/// In-place 2D DFT on a row-major height x width array.
class Fft2d {
public:
    Fft2d(int width, int height);
    ~Fft2d();
    Fft2d(const Fft2d&) = delete;
    Fft2d& operator=(const Fft2d&) = delete;

    [[nodiscard]] int width() const { return width_; }
    [[nodiscard]] int height() const { return height_; }
    void forward(std::span<std::complex<double>> data) const;
    void inverse(std::span<std::complex<double>> data) const;

private:
    int width_, height_;
    void* fwd_ = nullptr;
    void* inv_ = nullptr;
};

} // namespace sv
