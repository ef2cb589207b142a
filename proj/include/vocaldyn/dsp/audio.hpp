#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "vocaldyn/error.hpp"

namespace vocaldyn::dsp {

/// Raised when an operation requires a specific sample rate and refuses to
/// resample silently.
class SampleRateError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// Mono PCM audio with samples nominally in [-1, 1].
class AudioBuffer {
public:
    AudioBuffer() = default;
    /// Throws InvalidArgument for a non-positive rate or non-finite samples.
    AudioBuffer(std::vector<float> samples, int sample_rate);

    std::span<const float> samples() const { return samples_; }
    std::vector<float>& mutable_samples() { return samples_; }
    int sample_rate() const { return sample_rate_; }
    std::size_t size() const { return samples_.size(); }
    bool empty() const { return samples_.empty(); }
    double duration_seconds() const {
        return sample_rate_ > 0 ? static_cast<double>(samples_.size()) / sample_rate_ : 0.0;
    }

private:
    std::vector<float> samples_;
    int sample_rate_ = 0;
};

enum class FeatureKind : std::uint8_t { log_mel = 0, bark_loudness = 1, chroma = 2 };

std::string_view feature_kind_name(FeatureKind kind);

/// frames x bins feature matrix, row-major, frame t centred at t * hop_seconds.
struct FeatureMatrix {
    static constexpr std::uint32_t kShortInput = 1u;  // input shorter than one analysis window

    FeatureKind kind = FeatureKind::log_mel;
    std::size_t frames = 0;
    std::size_t bins = 0;
    double hop_seconds = 0.0;
    int source_sample_rate = 0;
    std::vector<float> values;
    std::uint32_t flags = 0;

    FeatureMatrix() = default;
    FeatureMatrix(FeatureKind k, std::size_t n_frames, std::size_t n_bins, double hop, int rate)
        : kind(k), frames(n_frames), bins(n_bins), hop_seconds(hop), source_sample_rate(rate),
          values(n_frames * n_bins, 0.0f) {}

    float& at(std::size_t t, std::size_t b) { return values[t * bins + b]; }
    float at(std::size_t t, std::size_t b) const { return values[t * bins + b]; }
    std::span<float> row(std::size_t t) { return {values.data() + t * bins, bins}; }
    std::span<const float> row(std::size_t t) const { return {values.data() + t * bins, bins}; }
};

/// Non-overlapping mean pooling over `factor` frames; the trailing partial
/// group is averaged over its actual length. hop_seconds is scaled by factor.
FeatureMatrix downsample_time(const FeatureMatrix& features, std::size_t factor);

}  // namespace vocaldyn::dsp
