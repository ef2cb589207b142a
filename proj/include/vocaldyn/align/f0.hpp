#pragma once

#include <string_view>
#include <vector>

#include "vocaldyn/dsp/audio.hpp"

namespace vocaldyn::align {

inline constexpr double kF0HopSeconds = 0.01;
inline constexpr double kF0MinHz = 50.0;
inline constexpr double kF0MaxHz = 1500.0;

/// Frame k describes time k * hop_seconds. f0 = 0 marks unvoiced frames.
struct F0Track {
    double hop_seconds = kF0HopSeconds;
    std::vector<double> f0;
    std::vector<double> confidence;

    std::size_t size() const { return f0.size(); }
    double time(std::size_t k) const { return static_cast<double>(k) * hop_seconds; }
};

struct YinConfig {
    double threshold = 0.15;
    int sample_rate = 16000;        // analysis rate after resampling
    double window_seconds = 0.032;  // integration window
    double min_hz = kF0MinHz;
    double max_hz = kF0MaxHz;
};

/// YIN tracker (cumulative mean normalized difference, absolute threshold,
/// parabolic refinement) at a 10 ms hop. Frames whose minimum stays above
/// the threshold are unvoiced with confidence 1 - min d' clamped to [0, 1].
F0Track extract_f0(const dsp::AudioBuffer& audio, const YinConfig& config = {});

struct F0Row {
    double time = 0.0;
    double frequency = 0.0;
    double confidence = 1.0;
};

/// Nearest-row resampling onto a 10 ms grid starting at 0 and ending at the
/// grid point nearest the last row. Equidistant rows resolve to the earlier
/// one. Rows below min_confidence or outside [50, 1500] Hz become unvoiced.
/// Throws InvalidArgument for decreasing times or negative frequencies.
F0Track ingest_f0_rows(const std::vector<F0Row>& rows, double min_confidence = 0.0);

/// CSV with columns time,frequency[,confidence]; a non-numeric first line is
/// treated as a header. Throws ParseError with the line number.
std::vector<F0Row> parse_f0_csv(std::string_view text);

}  // namespace vocaldyn::align
