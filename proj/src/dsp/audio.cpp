#include "vocaldyn/dsp/audio.hpp"

#include <algorithm>
#include <cmath>

#include "vocaldyn/error.hpp"

namespace vocaldyn::dsp {

AudioBuffer::AudioBuffer(std::vector<float> samples, int sample_rate)
    : samples_(std::move(samples)), sample_rate_(sample_rate) {
    if (sample_rate_ <= 0) throw InvalidArgument("sample rate must be positive");
    for (float s : samples_)
        if (!std::isfinite(s)) throw InvalidArgument("audio contains non-finite samples");
}

std::string_view feature_kind_name(FeatureKind kind) {
    switch (kind) {
        case FeatureKind::log_mel: return "log_mel";
        case FeatureKind::bark_loudness: return "bark_loudness";
        case FeatureKind::chroma: return "chroma";
    }
    return "unknown";
}

FeatureMatrix downsample_time(const FeatureMatrix& in, std::size_t factor) {
    if (factor == 0) throw InvalidArgument("downsample factor must be >= 1");
    if (factor == 1) return in;

    const std::size_t out_frames = (in.frames + factor - 1) / factor;
    FeatureMatrix out(in.kind, out_frames, in.bins, in.hop_seconds * static_cast<double>(factor),
                      in.source_sample_rate);
    out.flags = in.flags;
    std::vector<double> acc(in.bins);
    for (std::size_t g = 0; g < out_frames; ++g) {
        const std::size_t begin = g * factor;
        const std::size_t end = std::min(begin + factor, in.frames);
        std::fill(acc.begin(), acc.end(), 0.0);
        for (std::size_t t = begin; t < end; ++t) {
            auto r = in.row(t);
            for (std::size_t b = 0; b < in.bins; ++b) acc[b] += r[b];
        }
        const double n = static_cast<double>(end - begin);
        auto o = out.row(g);
        for (std::size_t b = 0; b < in.bins; ++b) o[b] = static_cast<float>(acc[b] / n);
    }
    return out;
}

}  // namespace vocaldyn::dsp
