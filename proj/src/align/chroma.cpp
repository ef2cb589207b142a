#include "vocaldyn/align/chroma.hpp"

#include <algorithm>
#include <cmath>

#include "vocaldyn/dsp/spectral.hpp"
#include "vocaldyn/simd/kernels.hpp"

namespace vocaldyn::align {
namespace {

constexpr std::size_t kChromaFft = 4096;
constexpr double kMinHz = 55.0;
constexpr double kMaxHz = 5000.0;
constexpr double kSilenceMagnitude = 1e-6;  // per-bin, after window normalization

void normalize_frame(std::span<float> v) {
    double ss = 0.0;
    for (float x : v) ss += static_cast<double>(x) * x;
    if (ss <= 0.0) return;
    const double inv = 1.0 / std::sqrt(ss);
    for (auto& x : v) x = static_cast<float>(x * inv);
}

std::size_t grid_frames(double seconds, double grid) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(seconds / grid - 1e-9)));
}

}  // namespace

dsp::FeatureMatrix ChromaMatrix::to_features(int source_rate) const {
    dsp::FeatureMatrix f(dsp::FeatureKind::chroma, frames, 12, hop_seconds, source_rate);
    f.values = values;
    return f;
}

double score_tempo(const score::ScoreDocument& s) {
    return s.tempo_hint && *s.tempo_hint > 0 ? *s.tempo_hint : kDefaultTempo;
}

double quarters_to_seconds(double quarters, double tempo) { return quarters * 60.0 / tempo; }

int nearest_pitch_class(double hz) {
    const long midi = std::lround(69.0 + 12.0 * std::log2(hz / 440.0));
    return static_cast<int>(((midi % 12) + 12) % 12);
}

ChromaMatrix score_to_chroma(const score::ScoreDocument& s, double grid, bool vocal_only) {
    if (!(grid > 0)) throw InvalidArgument("chroma grid must be positive");
    bool any = false;
    for (const auto& p : s.parts) any |= !p.notes.empty();
    if (!any) throw InvalidArgument("score has no notes");

    const double tempo = score_tempo(s);
    double end = 0.0;
    for (const auto& p : s.parts)
        for (const auto& n : p.notes) end = std::max(end, n.end());
    ChromaMatrix c;
    c.hop_seconds = grid;
    c.origin = ChromaOrigin::score;
    c.frames = grid_frames(quarters_to_seconds(end, tempo), grid);
    c.values.assign(c.frames * 12, 0.0f);
    for (const auto& p : s.parts) {
        if (vocal_only && p.role != score::PartRole::vocal) continue;
        for (const auto& n : p.notes) {
            const double on = quarters_to_seconds(n.onset, tempo) / grid;
            const double off = quarters_to_seconds(n.end(), tempo) / grid;
            // frames k with on <= k < off
            const auto k0 = static_cast<std::size_t>(std::max(0.0, std::ceil(on - 1e-9)));
            const auto k1 = std::min(c.frames, static_cast<std::size_t>(std::max(0.0, std::ceil(off - 1e-9))));
            const int pc = ((n.pitch % 12) + 12) % 12;
            for (std::size_t k = k0; k < k1; ++k) c.values[k * 12 + static_cast<std::size_t>(pc)] += 1.0f;
        }
    }
    for (std::size_t k = 0; k < c.frames; ++k) normalize_frame(c.row(k));
    return c;
}

ChromaMatrix audio_to_chroma(const dsp::AudioBuffer& audio, double grid) {
    if (!(grid > 0)) throw InvalidArgument("chroma grid must be positive");
    if (audio.empty()) throw InvalidArgument("audio is empty");
    const auto x = dsp::resample(audio, kChromaSampleRate);

    ChromaMatrix c;
    c.hop_seconds = grid;
    c.origin = ChromaOrigin::audio;
    c.frames = grid_frames(audio.duration_seconds(), grid);
    c.values.assign(c.frames * 12, 0.0f);

    std::vector<long> centers(c.frames);
    for (std::size_t k = 0; k < c.frames; ++k)
        centers[k] = std::min<long>(static_cast<long>(x.size()) - 1, std::lround(k * grid * kChromaSampleRate));

    // Bin -> pitch class lookup for the analysed band.
    const std::size_t nb = kChromaFft / 2 + 1;
    std::vector<int> bin_pc(nb, -1);
    for (std::size_t b = 1; b < nb; ++b) {
        const double hz = static_cast<double>(b) * kChromaSampleRate / kChromaFft;
        if (hz >= kMinHz && hz <= kMaxHz) bin_pc[b] = nearest_pitch_class(hz);
    }

    // Frames are computed in blocks to bound memory on long recordings.
    const dsp::MagnitudeStft stft(kChromaFft);
    const double norm = 2.0 / static_cast<double>(kChromaFft);  // Hann sum = n/2
    constexpr std::size_t kBlock = 256;
    for (std::size_t k0 = 0; k0 < c.frames; k0 += kBlock) {
        const std::size_t k1 = std::min(c.frames, k0 + kBlock);
        const auto mags = stft.compute(x.samples(), std::span<const long>(centers).subspan(k0, k1 - k0));
        for (std::size_t k = k0; k < k1; ++k) {
            const float* m = mags.data() + (k - k0) * nb;
            double acc[12] = {};
            double peak = 0.0;
            for (std::size_t b = 0; b < nb; ++b) {
                if (bin_pc[b] < 0) continue;
                const double v = m[b] * norm;
                acc[bin_pc[b]] += v;
                peak = std::max(peak, v);
            }
            if (peak < kSilenceMagnitude) continue;
            auto row = c.row(k);
            for (int p = 0; p < 12; ++p) row[p] = static_cast<float>(std::log1p(10.0 * acc[p]));
            normalize_frame(row);
        }
    }
    return c;
}

std::vector<double> chroma_cost(const ChromaMatrix& a, const ChromaMatrix& b) {
    std::vector<double> cost(a.frames * b.frames);
    std::vector<bool> bz(b.frames);
    for (std::size_t j = 0; j < b.frames; ++j) {
        const auto r = b.row(j);
        bz[j] = std::all_of(r.begin(), r.end(), [](float v) { return v == 0.0f; });
    }
    for (std::size_t i = 0; i < a.frames; ++i) {
        const auto ra = a.row(i);
        const bool az = std::all_of(ra.begin(), ra.end(), [](float v) { return v == 0.0f; });
        for (std::size_t j = 0; j < b.frames; ++j) {
            double c;
            if (az || bz[j]) c = (az && bz[j]) ? 0.0 : 1.0;
            else c = std::clamp(1.0 - static_cast<double>(simd::dot<float>(ra, b.row(j))), 0.0, 2.0);
            cost[i * b.frames + j] = c;
        }
    }
    return cost;
}

}  // namespace vocaldyn::align
