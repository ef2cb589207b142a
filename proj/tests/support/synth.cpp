#include "synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "vocaldyn/align/align.hpp"
#include "vocaldyn/align/chroma.hpp"

namespace vocaldyn::testing {

using score::DynamicCategory;

score::ScoreDocument fixture_score(const FixtureScoreOptions& o) {
    std::mt19937_64 rng(o.seed);
    score::ScoreDocument s;
    s.tempo_hint = o.tempo_qpm;
    s.metadata = {"Synthetic", "Fixture Lied", "T-" + std::to_string(o.seed)};
    score::Part voice{score::PartRole::vocal, {}}, lh{score::PartRole::piano_lh, {}}, rh{score::PartRole::piano_rh, {}};

    const DynamicCategory tiers[3] = {DynamicCategory::p, DynamicCategory::mf, DynamicCategory::f};
    int pitch = 67;
    std::size_t last_tier = 3;
    for (std::size_t m = 0; m < o.measures; ++m) {
        const double bar = 4.0 * static_cast<double>(m);
        if (m % 2 == 0) {
            std::size_t t;
            do t = rng() % 3;
            while (t == last_tier);
            last_tier = t;
            s.markings.push_back({tiers[t], bar, score::PartRole::vocal, bar});
        }
        // Root moves through a I-IV-V-I pattern.
        static constexpr int roots[4] = {48, 53, 55, 48};
        const int root = roots[m % 4];
        lh.notes.push_back({root, bar, 2.0, score::PartRole::piano_lh, 0});
        lh.notes.push_back({root + 7, bar + 2.0, 2.0, score::PartRole::piano_lh, 0});
        for (double beat : {1.0, 3.0})
            for (int iv : {12, 16, 19}) rh.notes.push_back({root + iv, bar + beat, 1.0, score::PartRole::piano_rh, 0});

        double beat = 0.0;
        const bool rest_bar = m % 4 == 3;
        while (beat < 4.0) {
            double dur = (rng() % 3 == 0 && beat <= 2.0) ? 2.0 : 1.0;
            if (rest_bar && beat >= 3.0) break;  // breath on the last beat
            pitch += static_cast<int>(rng() % 5) - 2;
            pitch = std::clamp(pitch, 60, 76);
            voice.notes.push_back({pitch, bar + beat, dur, score::PartRole::vocal, 0});
            beat += dur;
        }
    }
    s.parts = {voice, lh, rh};
    s.normalize();
    score::assign_measures(s, 4.0);
    return s;
}

double tier_amplitude(DynamicCategory c) {
    switch (c) {
        case DynamicCategory::p: return 0.04;
        case DynamicCategory::mf: return 0.13;
        case DynamicCategory::f: return 0.40;
        default: return 0.13 * std::pow(10.0, (static_cast<int>(c) - 5) * 0.5 / 2.0);
    }
}

void add_tone(std::vector<float>& out, int sr, double start_s, double dur_s, double hz, double amp, int harmonics,
              double vibrato_phase) {
    const auto begin = static_cast<std::size_t>(std::max(0.0, start_s) * sr);
    const auto n = static_cast<std::size_t>(dur_s * sr);
    const double attack = 0.015 * sr, release = 0.03 * sr;
    double phase = 0.0;
    for (std::size_t i = 0; i < n && begin + i < out.size(); ++i) {
        const double t = static_cast<double>(i) / sr;
        double env = 1.0;
        if (static_cast<double>(i) < attack) env = static_cast<double>(i) / attack;
        if (static_cast<double>(n - i) < release) env = std::min(env, static_cast<double>(n - i) / release);
        const double f = hz * (1.0 + 0.004 * std::sin(2.0 * std::numbers::pi * 5.5 * t + vibrato_phase));
        phase += 2.0 * std::numbers::pi * f / sr;
        double v = 0.0;
        for (int k = 1; k <= harmonics; ++k) v += std::sin(k * phase) / k;
        out[begin + i] += static_cast<float>(amp * env * v);
    }
}

Rendition render(const score::ScoreDocument& s, const RenderOptions& o) {
    std::mt19937_64 rng(o.seed);
    std::uniform_real_distribution<double> jitter(0.9, 1.1), phase(0.0, 2.0 * std::numbers::pi);
    const double total_s = align::quarters_to_seconds(s.end_offset(), o.tempo_qpm) + 0.5;
    const auto n = static_cast<std::size_t>(total_s * o.sample_rate);
    std::vector<float> voice(n, 0.0f), piano(n, 0.0f);

    score::PropagationOptions po;
    po.prefix = score::PrefixPolicy::use_first_marking;
    const auto labels = score::propagate_note_dynamics(s, po);
    const auto& vnotes = s.find_part(score::PartRole::vocal)->notes;
    for (const auto& l : labels) {
        const auto& note = vnotes[l.note_index];
        const double amp = tier_amplitude(l.category) * jitter(rng);
        // Louder singing is also brighter.
        const int harmonics = l.category >= DynamicCategory::f ? 10 : l.category >= DynamicCategory::mf ? 7 : 4;
        add_tone(voice, o.sample_rate, align::quarters_to_seconds(note.onset, o.tempo_qpm),
                 align::quarters_to_seconds(note.duration, o.tempo_qpm), align::midi_to_hz(note.pitch), amp, harmonics,
                 phase(rng));
    }
    for (auto role : {score::PartRole::piano_lh, score::PartRole::piano_rh})
        if (const auto* part = s.find_part(role))
            for (const auto& note : part->notes)
                add_tone(piano, o.sample_rate, align::quarters_to_seconds(note.onset, o.tempo_qpm),
                         align::quarters_to_seconds(note.duration, o.tempo_qpm), align::midi_to_hz(note.pitch),
                         o.piano_gain, 5, 0.0);
    std::vector<float> mix(n);
    for (std::size_t i = 0; i < n; ++i) mix[i] = voice[i] + piano[i];
    return {dsp::AudioBuffer(std::move(voice), o.sample_rate), dsp::AudioBuffer(std::move(mix), o.sample_rate)};
}

}  // namespace vocaldyn::testing
