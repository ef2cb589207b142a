#pragma once

// Zwicker loudness for time-varying signals (ISO 532-1:2017, method 1).
//
// Pipeline: 28 one-third-octave filters (25 Hz .. 12.5 kHz) -> squaring and
// three-stage smoothing -> band levels every 0.5 ms -> core loudness in 20
// approximated critical bands -> nonlinear temporal decay -> upper-slope
// spreading onto a 0.1 Bark grid (240 values) -> output every 2 ms.

#include <array>
#include <span>
#include <vector>

#include "vocaldyn/dsp/audio.hpp"

namespace vocaldyn::dsp {

inline constexpr int kLoudnessSampleRate = 48000;
inline constexpr std::size_t kThirdOctaveBands = 28;
inline constexpr std::size_t kCoreBands = 21;
inline constexpr std::size_t kBarkBins = 240;
inline constexpr double kBarkResolution = 0.1;
inline constexpr double kLoudnessHopSeconds = 0.002;

enum class SoundField { free, diffuse };

struct LoudnessConfig {
    /// dB SPL of a full-scale sine (amplitude 1.0). 94 dB SPL = 1 Pa RMS.
    double calibration_db_spl_fs = 94.0;
    SoundField field = SoundField::free;
};

struct LoudnessTrace {
    FeatureMatrix specific;     // frames x 240, sone/Bark
    std::vector<double> total;  // temporally weighted total loudness per frame, sone
};

/// Requires 48 kHz input; throws SampleRateError otherwise.
LoudnessTrace zwicker_time_varying(const AudioBuffer& audio, const LoudnessConfig& config = {});
FeatureMatrix bark_specific_loudness(const AudioBuffer& audio, const LoudnessConfig& config = {});

/// Per-frame sum of specific loudness times 0.1 Bark. Throws InvalidArgument
/// when the matrix is not bark_loudness.
std::vector<double> total_loudness(const FeatureMatrix& specific);

// Building blocks, exposed for testing.

/// Scale factor mapping digital samples to pascal for the given calibration.
double pascal_per_unit(double calibration_db_spl_fs);

/// Band levels (dB SPL) of the 28 third-octave bands, sampled at 2 kHz.
/// Returns frames x 28, row-major.
std::vector<double> third_octave_levels(std::span<const double> pressure);

/// Core loudness of the 20 approximated critical bands plus a trailing zero.
std::array<double, kCoreBands> core_loudness(std::span<const double, kThirdOctaveBands> levels, SoundField field);

/// Spreads core loudness with the upper-slope rules. Writes the 0.1 Bark
/// pattern into `specific` when non-empty and returns the integrated total.
double spread_specific_loudness(std::span<const double, kCoreBands> core, std::span<float> specific);

}  // namespace vocaldyn::dsp
