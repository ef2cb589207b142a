#include "vocaldyn/align/align.hpp"

#include <algorithm>
#include <cmath>

namespace vocaldyn::align {
namespace {

constexpr double kMinNoteSeconds = 1e-3;
constexpr double kCentTolerance = 100.0;

}  // namespace

double midi_to_hz(double pitch) { return 440.0 * std::pow(2.0, (pitch - 69.0) / 12.0); }

PathMap::PathMap(const WarpingPath& path, std::size_t score_frames) {
    if (path.steps.empty() || score_frames == 0) throw InvalidArgument("empty warping path");
    first_.assign(score_frames, -1.0);
    for (const auto& [i, j] : path.steps)
        if (i < score_frames && first_[i] < 0) first_[i] = static_cast<double>(j);
    // Fill score frames skipped by (2,1) steps.
    std::size_t prev = 0;
    for (std::size_t i = 1; i < score_frames; ++i) {
        if (first_[i] >= 0) {
            for (std::size_t k = prev + 1; k < i; ++k)
                first_[k] = first_[prev] + (first_[i] - first_[prev]) * static_cast<double>(k - prev) /
                                              static_cast<double>(i - prev);
            prev = i;
        }
    }
    for (std::size_t k = prev + 1; k < score_frames; ++k) first_[k] = first_[prev];
    const auto& last = path.steps.back();
    slope_ = last.first > 0 ? static_cast<double>(last.second) / static_cast<double>(last.first) : 1.0;
}

double PathMap::operator()(double x) const {
    if (x <= 0.0) return first_.front();
    const double top = static_cast<double>(first_.size() - 1);
    if (x >= top) return first_.back() + (x - top) * slope_;
    const auto i = static_cast<std::size_t>(std::floor(x));
    const double frac = x - static_cast<double>(i);
    return first_[i] + frac * (first_[i + 1] - first_[i]);
}

Alignment align_score_to_audio(const score::ScoreDocument& s, const dsp::AudioBuffer& audio,
                               const AlignOptions& opt) {
    const auto* vocal = s.find_part(score::PartRole::vocal);
    if (!vocal || vocal->notes.empty()) throw InvalidArgument("score has no vocal notes to align");
    if (audio.empty()) throw InvalidArgument("audio is empty");

    const auto sc = score_to_chroma(s, opt.grid_seconds, opt.vocal_only);
    const auto ac = audio_to_chroma(audio, opt.grid_seconds);
    const auto cost = chroma_cost(sc, ac);

    Alignment out;
    out.path = dtw(cost, sc.frames, ac.frames, opt.dtw);
    const PathMap map(out.path, sc.frames);
    const double tempo = score_tempo(s);
    const double grid = opt.grid_seconds;
    const double duration = audio.duration_seconds();

    double last_onset = 0.0;
    for (std::size_t k = 0; k < vocal->notes.size(); ++k) {
        const auto& n = vocal->notes[k];
        AlignedNote a;
        a.note_index = k;
        a.note = n;
        a.onset_seconds = std::max(last_onset, map(quarters_to_seconds(n.onset, tempo) / grid) * grid);
        a.onset_seconds = std::min(a.onset_seconds, std::max(0.0, duration - kMinNoteSeconds));
        a.offset_seconds = std::min(duration, map(quarters_to_seconds(n.end(), tempo) / grid) * grid);
        a.offset_seconds = std::max(a.offset_seconds, a.onset_seconds + kMinNoteSeconds);
        last_onset = a.onset_seconds;
        out.notes.push_back(a);
    }
    return out;
}

double validate_alignment(const std::vector<AlignedNote>& aligned, const F0Track& f0) {
    if (aligned.empty() || f0.f0.empty()) throw UndefinedScoreError("alignment score needs notes and an f0 track");
    std::size_t inside = 0, matched = 0;
    for (std::size_t k = 0; k < f0.size(); ++k) {
        const double hz = f0.f0[k];
        if (hz <= 0.0) continue;
        const double t = f0.time(k);
        bool in_note = false, ok = false;
        for (const auto& a : aligned) {
            if (t < a.onset_seconds || t >= a.offset_seconds) continue;
            in_note = true;
            const double cents = 1200.0 * std::log2(hz / midi_to_hz(a.note.pitch));
            const double folded = cents - 1200.0 * std::round(cents / 1200.0);
            if (std::abs(folded) <= kCentTolerance) {
                ok = true;
                break;
            }
        }
        inside += in_note;
        matched += ok;
    }
    if (inside == 0) throw UndefinedScoreError("no voiced f0 frame falls inside an aligned note");
    return static_cast<double>(matched) / static_cast<double>(inside);
}

nlohmann::ordered_json to_json(const std::vector<AlignedNote>& notes) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& a : notes)
        arr.push_back({{"note_id", a.note_index},
                       {"pitch", a.note.pitch},
                       {"onset", a.note.onset},
                       {"duration", a.note.duration},
                       {"measure", a.note.measure},
                       {"onset_seconds", a.onset_seconds},
                       {"offset_seconds", a.offset_seconds}});
    return arr;
}

std::vector<AlignedNote> aligned_notes_from_json(const nlohmann::ordered_json& j) {
    try {
        std::vector<AlignedNote> out;
        for (const auto& e : j) {
            AlignedNote a;
            a.note_index = e.at("note_id").get<std::size_t>();
            a.note.pitch = e.at("pitch").get<int>();
            a.note.onset = e.at("onset").get<double>();
            a.note.duration = e.at("duration").get<double>();
            a.note.measure = e.value("measure", 1);
            a.note.part = score::PartRole::vocal;
            a.onset_seconds = e.at("onset_seconds").get<double>();
            a.offset_seconds = e.at("offset_seconds").get<double>();
            if (!(a.offset_seconds > a.onset_seconds) || a.onset_seconds < 0)
                throw ParseError("aligned note " + std::to_string(a.note_index) + " has invalid times");
            out.push_back(a);
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid aligned-notes JSON: ") + e.what());
    }
}

nlohmann::ordered_json to_json(const F0Track& track) {
    return {{"hop_seconds", track.hop_seconds}, {"f0", track.f0}, {"confidence", track.confidence}};
}

F0Track f0_from_json(const nlohmann::ordered_json& j) {
    try {
        F0Track t;
        t.hop_seconds = j.at("hop_seconds").get<double>();
        t.f0 = j.at("f0").get<std::vector<double>>();
        t.confidence = j.at("confidence").get<std::vector<double>>();
        if (t.f0.size() != t.confidence.size() || !(t.hop_seconds > 0)) throw ParseError("inconsistent f0 track");
        return t;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("invalid f0 JSON: ") + e.what());
    }
}

}  // namespace vocaldyn::align
