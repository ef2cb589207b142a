#pragma once

#include <json.hpp>
#include <vector>

#include "vocaldyn/align/chroma.hpp"
#include "vocaldyn/align/dtw.hpp"
#include "vocaldyn/align/f0.hpp"

namespace vocaldyn::align {

struct AlignedNote {
    std::size_t note_index = 0;  // into the vocal part's notes
    score::NoteEvent note;
    double onset_seconds = 0.0;
    double offset_seconds = 0.0;

    bool operator==(const AlignedNote&) const = default;
};

struct AlignOptions {
    double grid_seconds = kDefaultGridSeconds;
    /// Build the score chroma from the vocal part only (use when aligning
    /// against a separated vocal stem instead of the mix).
    bool vocal_only = false;
    DtwOptions dtw;
};

struct Alignment {
    std::vector<AlignedNote> notes;
    WarpingPath path;
};

/// Maps a fractional score frame to a fractional audio frame through the
/// path: each score frame takes the first audio frame it is matched with,
/// skipped score frames and fractions interpolate linearly, and positions
/// past the last score frame extrapolate with the overall path slope.
class PathMap {
public:
    PathMap(const WarpingPath& path, std::size_t score_frames);
    double operator()(double score_frame) const;

private:
    std::vector<double> first_;  // first matched audio frame per score frame
    double slope_ = 1.0;
};

/// Chroma on a common grid, 1 - cosine cost, DTW, then every vocal note's
/// onset and end are mapped through the path. Offsets are forced past the
/// onset by at least a millisecond.
Alignment align_score_to_audio(const score::ScoreDocument& score, const dsp::AudioBuffer& audio,
                               const AlignOptions& options = {});

class UndefinedScoreError : public Error {
public:
    using Error::Error;
};

/// Fraction of voiced f0 frames inside some note interval [onset, offset)
/// whose pitch lies within +-100 cents of that note modulo the octave.
/// Throws UndefinedScoreError when no voiced frame falls inside a note.
double validate_alignment(const std::vector<AlignedNote>& aligned, const F0Track& f0);

double midi_to_hz(double pitch);

nlohmann::ordered_json to_json(const std::vector<AlignedNote>& notes);
std::vector<AlignedNote> aligned_notes_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json to_json(const F0Track& track);
F0Track f0_from_json(const nlohmann::ordered_json& j);

}  // namespace vocaldyn::align
