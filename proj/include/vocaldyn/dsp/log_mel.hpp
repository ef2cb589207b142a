#pragma once

#include <vector>

#include "vocaldyn/dsp/audio.hpp"

namespace vocaldyn::dsp {

inline constexpr int kLogMelSampleRate = 44100;

struct LogMelConfig {
    std::size_t n_fft = 2048;
    std::size_t n_mels = 128;
    double hop_seconds = 256.0 / 44100.0;  // 5.8 ms
    double fmin = 0.0;
    double fmax = 0.0;  // 0 selects the Nyquist frequency
    double log_floor = 1e-10;
};

// Slaney mel scale: linear below 1 kHz, logarithmic above.
double hz_to_mel(double hz);
double mel_to_hz(double mel);

/// Centre frequencies (Hz) of the triangular filters.
std::vector<double> mel_center_frequencies(std::size_t n_mels, double fmin, double fmax);

/// n_bins x n_mels unit-peak triangular filterbank over FFT bin frequencies.
std::vector<float> mel_filterbank(std::size_t n_fft, int sample_rate, std::size_t n_mels, double fmin,
                                  double fmax);

/// Centre-padded (reflect) magnitude STFT with a periodic Hann window, mel
/// filterbank, then ln(max(x, floor)). Input shorter than one window yields a
/// single zero-padded frame and sets FeatureMatrix::kShortInput.
FeatureMatrix log_mel(const AudioBuffer& audio, const LogMelConfig& config = {});

}  // namespace vocaldyn::dsp
