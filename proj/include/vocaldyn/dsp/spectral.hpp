#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "vocaldyn/dsp/audio.hpp"

namespace vocaldyn::dsp {

/// In-place iterative radix-2 complex FFT of a fixed power-of-two size.
class Fft {
public:
    explicit Fft(std::size_t n);
    std::size_t size() const { return n_; }
    void forward(std::span<std::complex<double>> data) const;

private:
    std::size_t n_;
    std::vector<std::size_t> bitrev_;
    std::vector<std::complex<double>> twiddle_;
};

/// Periodic Hann window of length n.
std::vector<double> hann_window(std::size_t n);

/// Magnitude spectra of windowed frames centred on arbitrary sample
/// positions. Out-of-range indices are reflected about the signal edges.
/// Returns centers.size() x (n_fft/2 + 1) values, row-major.
class MagnitudeStft {
public:
    explicit MagnitudeStft(std::size_t n_fft);
    std::size_t n_fft() const { return fft_.size(); }
    std::size_t n_bins() const { return fft_.size() / 2 + 1; }
    std::vector<float> compute(std::span<const float> samples, std::span<const long> centers) const;

private:
    Fft fft_;
    std::vector<double> window_;
};

/// Band-limited rational resampling (Kaiser-windowed sinc). Output length is
/// ceil(n * target / source). Same-rate input is returned unchanged.
AudioBuffer resample(const AudioBuffer& audio, int target_rate);

}  // namespace vocaldyn::dsp
