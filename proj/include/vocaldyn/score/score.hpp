#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vocaldyn/error.hpp"

namespace vocaldyn::score {

/// Ordered so that the ten absolute values compare by loudness.
enum class DynamicCategory : std::uint8_t {
    pppp, ppp, pp, p, mp, mf, f, ff, fff, ffff,
    sf,  // sf, sfz, sffz, fz, rf, rfz and the sfp family
    crescendo,
    diminuendo,
};

inline constexpr std::size_t kDynamicCategoryCount = 13;
inline constexpr std::size_t kAbsoluteCategoryCount = 10;

std::string_view category_name(DynamicCategory c);
/// Accepts the 13 canonical names plus accent spellings ("sfz", "fz", ...)
/// and "cresc"/"dim". Returns nullopt for anything else.
std::optional<DynamicCategory> parse_category(std::string_view name);
std::array<DynamicCategory, kDynamicCategoryCount> all_categories();

inline bool is_absolute(DynamicCategory c) { return c <= DynamicCategory::ffff; }
inline bool is_wedge(DynamicCategory c) {
    return c == DynamicCategory::crescendo || c == DynamicCategory::diminuendo;
}

/// Stream a part belongs to. `other` collects parts outside the
/// voice + piano layout (second voices, obbligato instruments); such scores
/// never pass the corpus filter.
enum class PartRole : std::uint8_t { vocal, piano_lh, piano_rh, other };

std::string_view part_role_name(PartRole r);
std::optional<PartRole> parse_part_role(std::string_view name);

struct NoteEvent {
    int pitch = 60;         // MIDI semitone, 60 = C4
    double onset = 0.0;     // quarter notes from the start
    double duration = 1.0;  // quarter notes
    PartRole part = PartRole::vocal;
    int measure = 1;        // 1-based measure index in document order

    double end() const { return onset + duration; }
    bool operator==(const NoteEvent&) const = default;
};

struct DynamicMarking {
    DynamicCategory category = DynamicCategory::mf;
    double offset = 0.0;
    PartRole part = PartRole::vocal;
    double span_end = 0.0;  // == offset except for wedges

    bool operator==(const DynamicMarking&) const = default;
};

struct Part {
    PartRole role = PartRole::vocal;
    std::vector<NoteEvent> notes;  // sorted by onset, then pitch

    bool operator==(const Part&) const = default;
};

struct ScoreMetadata {
    std::string composer;
    std::string title;
    std::string catalogue_id;

    bool operator==(const ScoreMetadata&) const = default;
};

struct ScoreDocument {
    std::vector<Part> parts;  // at most one per role, ordered by role
    std::vector<DynamicMarking> markings;
    ScoreMetadata metadata;
    std::optional<double> tempo_hint;   // quarter notes per minute
    std::vector<double> measure_starts; // offset of each measure, first part

    const Part* find_part(PartRole role) const;
    Part& part(PartRole role);  // created (in role order) when missing
    double end_offset() const;  // last note end or marking span end
    /// Restores the ordering invariants (parts by role, notes by onset,
    /// markings by offset).
    void normalize();

    bool operator==(const ScoreDocument&) const = default;
};

/// Fills measure_starts with fixed-length measures covering the score and
/// sets every note's measure from its onset.
void assign_measures(ScoreDocument& score, double quarters_per_measure = 4.0);

/// True iff the score has more than three markings and exactly the
/// vocal / piano_lh / piano_rh streams.
bool score_passes_filter(const ScoreDocument& score);

enum class WedgeRegion : std::uint8_t { crescendo, diminuendo };

struct NoteDynamicLabel {
    std::size_t note_index = 0;  // into the vocal part's notes
    NoteEvent note;
    DynamicCategory category = DynamicCategory::mf;  // absolute or sf
    std::optional<WedgeRegion> region;

    bool operator==(const NoteDynamicLabel&) const = default;
};

/// Thrown when vocal notes precede every absolute marking.
class UnlabeledPrefixError : public Error {
public:
    explicit UnlabeledPrefixError(std::vector<std::size_t> notes);
    const std::vector<std::size_t>& note_indices() const noexcept { return notes_; }

private:
    std::vector<std::size_t> notes_;
};

enum class PrefixPolicy : std::uint8_t {
    fail,               // throw UnlabeledPrefixError
    drop,               // omit the prefix notes from the output
    use_first_marking,  // label them with the first absolute marking
};

struct PropagationOptions {
    /// Only consider markings attached to the vocal part. By default markings
    /// of every part count, with vocal markings winning at equal offsets.
    bool vocal_markings_only = false;
    PrefixPolicy prefix = PrefixPolicy::fail;
};

/// Note-level labels for the vocal part. Each note holds the latest absolute
/// marking at or before its onset; an sf marking labels the first note at or
/// after it as sf without changing the held value; notes starting inside a
/// wedge span [offset, span_end) carry the region flag.
std::vector<NoteDynamicLabel> propagate_note_dynamics(const ScoreDocument& score,
                                                      const PropagationOptions& options = {});

using CategoryCounts = std::map<DynamicCategory, std::size_t>;

/// Marking counts per category over a corpus; every category is present.
CategoryCounts corpus_marking_statistics(const std::vector<ScoreDocument>& scores);

}  // namespace vocaldyn::score
