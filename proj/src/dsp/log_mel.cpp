#include "vocaldyn/dsp/log_mel.hpp"

#include <algorithm>
#include <cmath>

#include "vocaldyn/error.hpp"
#include "vocaldyn/simd/kernels.hpp"
#include "vocaldyn/dsp/spectral.hpp"

namespace vocaldyn::dsp {
namespace {
constexpr double kMinLogHz = 1000.0;
constexpr double kLinearStep = 200.0 / 3.0;
constexpr double kMinLogMel = kMinLogHz / kLinearStep;
const double kLogStep = std::log(6.4) / 27.0;
}  // namespace

double hz_to_mel(double hz) {
    if (hz < kMinLogHz) return hz / kLinearStep;
    return kMinLogMel + std::log(hz / kMinLogHz) / kLogStep;
}

double mel_to_hz(double mel) {
    if (mel < kMinLogMel) return mel * kLinearStep;
    return kMinLogHz * std::exp(kLogStep * (mel - kMinLogMel));
}

namespace {
std::vector<double> mel_edges(std::size_t n_mels, double fmin, double fmax) {
    const double lo = hz_to_mel(fmin);
    const double hi = hz_to_mel(fmax);
    std::vector<double> edges(n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));
    return edges;
}
}  // namespace

std::vector<double> mel_center_frequencies(std::size_t n_mels, double fmin, double fmax) {
    auto edges = mel_edges(n_mels, fmin, fmax);
    return {edges.begin() + 1, edges.end() - 1};
}

std::vector<float> mel_filterbank(std::size_t n_fft, int sample_rate, std::size_t n_mels, double fmin,
                                  double fmax) {
    const auto edges = mel_edges(n_mels, fmin, fmax);
    const std::size_t n_bins = n_fft / 2 + 1;
    std::vector<float> w(n_bins * n_mels, 0.0f);
    for (std::size_t k = 0; k < n_bins; ++k) {
        const double f = static_cast<double>(k) * sample_rate / static_cast<double>(n_fft);
        for (std::size_t m = 0; m < n_mels; ++m) {
            const double lower = (f - edges[m]) / (edges[m + 1] - edges[m]);
            const double upper = (edges[m + 2] - f) / (edges[m + 2] - edges[m + 1]);
            w[k * n_mels + m] = static_cast<float>(std::max(0.0, std::min(lower, upper)));
        }
    }
    return w;
}

FeatureMatrix log_mel(const AudioBuffer& audio, const LogMelConfig& cfg) {
    if (cfg.n_mels == 0) throw InvalidArgument("n_mels must be positive");
    if (cfg.hop_seconds <= 0) throw InvalidArgument("hop must be positive");
    const int sr = audio.sample_rate();
    if (sr <= 0) throw InvalidArgument("audio has no sample rate");
    const double fmax = cfg.fmax > 0 ? cfg.fmax : sr / 2.0;
    const long hop = std::max(1L, std::lround(cfg.hop_seconds * sr));

    MagnitudeStft stft(cfg.n_fft);
    const auto x = audio.samples();
    std::vector<float> padded;
    std::span<const float> signal = x;
    std::vector<long> centers;
    std::uint32_t flags = 0;
    if (x.size() < cfg.n_fft) {
        padded.assign(cfg.n_fft, 0.0f);
        std::copy(x.begin(), x.end(), padded.begin());
        signal = padded;
        centers.push_back(static_cast<long>(cfg.n_fft / 2));
        flags |= FeatureMatrix::kShortInput;
    } else {
        const std::size_t frames = 1 + x.size() / static_cast<std::size_t>(hop);
        centers.resize(frames);
        for (std::size_t t = 0; t < frames; ++t) centers[t] = static_cast<long>(t) * hop;
    }

    const auto mags = stft.compute(signal, centers);
    const auto bank = mel_filterbank(cfg.n_fft, sr, cfg.n_mels, cfg.fmin, fmax);
    const std::size_t n_bins = stft.n_bins();

    FeatureMatrix out(FeatureKind::log_mel, centers.size(), cfg.n_mels, static_cast<double>(hop) / sr, sr);
    out.flags = flags;
    simd::gemm_nn<float>({mags.data(), centers.size(), n_bins, n_bins}, {bank.data(), n_bins, cfg.n_mels, cfg.n_mels},
                         {out.values.data(), out.frames, out.bins, out.bins});
    const float floor_value = static_cast<float>(cfg.log_floor);
    for (auto& v : out.values) v = std::log(std::max(v, floor_value));
    return out;
}

}  // namespace vocaldyn::dsp
