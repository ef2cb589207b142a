#pragma once

#include <vector>

#include "vocaldyn/dsp/audio.hpp"
#include "vocaldyn/score/score.hpp"

namespace vocaldyn::align {

enum class ChromaOrigin : std::uint8_t { score, audio };

inline constexpr double kDefaultGridSeconds = 0.05;
inline constexpr double kDefaultTempo = 120.0;  // quarter notes per minute
inline constexpr int kChromaSampleRate = 22050;

/// frames x 12 pitch-class profile; frame k is centred at k * hop_seconds.
/// Every frame has unit L2 norm or is all zero.
struct ChromaMatrix {
    std::size_t frames = 0;
    double hop_seconds = kDefaultGridSeconds;
    ChromaOrigin origin = ChromaOrigin::score;
    std::vector<float> values;

    std::span<const float> row(std::size_t t) const { return {values.data() + t * 12, 12}; }
    std::span<float> row(std::size_t t) { return {values.data() + t * 12, 12}; }

    /// As a DYNF-compatible matrix of kind chroma.
    dsp::FeatureMatrix to_features(int source_rate = 0) const;
};

double score_tempo(const score::ScoreDocument& score);
double quarters_to_seconds(double quarters, double tempo);

/// Notes sounding at each frame centre (onset <= t < end) add 1 to their
/// pitch class. Uses all parts unless vocal_only is set. Frame count covers
/// the score end at tempo_hint (120 when absent). Throws InvalidArgument on
/// an empty score.
ChromaMatrix score_to_chroma(const score::ScoreDocument& score, double grid_seconds = kDefaultGridSeconds,
                             bool vocal_only = false);

/// Resamples to 22.05 kHz, takes 4096-point Hann spectra centred on the
/// grid, sums bin magnitudes (55 Hz to 5 kHz) into the nearest equal-tempered
/// pitch class (A4 = 440 Hz), compresses with log(1 + 10x) and normalizes.
/// Near-silent frames stay all zero.
ChromaMatrix audio_to_chroma(const dsp::AudioBuffer& audio, double grid_seconds = kDefaultGridSeconds);

/// Pitch class of the equal-tempered semitone nearest to hz.
int nearest_pitch_class(double hz);

/// I x J matrix of 1 - cosine similarity. Two zero frames cost 0, a zero
/// frame against a non-zero frame costs 1.
std::vector<double> chroma_cost(const ChromaMatrix& a, const ChromaMatrix& b);

}  // namespace vocaldyn::align
