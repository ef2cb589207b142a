#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <vector>

#include "vocaldyn/align/align.hpp"
#include "vocaldyn/dsp/audio.hpp"
#include "vocaldyn/score/score.hpp"

namespace vocaldyn::label {

inline constexpr std::size_t kNumClasses = 10;
inline constexpr std::uint8_t kMaskedClass = 255;

class UnresolvedCategoryError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

class HopMismatchError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

/// pppp -> 0 ... ffff -> 9. Throws UnresolvedCategoryError for sf and wedges.
std::uint8_t category_to_class(score::DynamicCategory category);
score::DynamicCategory class_to_category(std::uint8_t cls);

enum class RegionFlag : std::uint8_t { none = 0, crescendo = 1, diminuendo = 2 };

struct FrameLabelSequence {
    double hop_seconds = 0.0;
    std::vector<std::uint8_t> classes;  // kMaskedClass where masked out
    std::vector<RegionFlag> regions;    // wedge flags; informational only

    std::size_t size() const { return classes.size(); }
    bool valid(std::size_t t) const { return classes[t] != kMaskedClass; }
    std::size_t masked_in_count() const;

    bool operator==(const FrameLabelSequence&) const = default;
};

/// Frame t (centre t * hop) takes the class of the note whose [onset, offset)
/// contains it; the later onset wins on overlap. Frames outside every note,
/// notes without a label and sf notes are masked.
FrameLabelSequence frames_from_alignment(const std::vector<align::AlignedNote>& aligned,
                                         const std::vector<score::NoteDynamicLabel>& labels, double hop_seconds,
                                         std::size_t total_frames);

/// Throws HopMismatchError unless the hops agree to 1e-9 s.
void check_hop(double label_hop, double feature_hop);

/// Same as frames_from_alignment sized to `features`, with the hop checked.
FrameLabelSequence frames_for_features(const std::vector<align::AlignedNote>& aligned,
                                       const std::vector<score::NoteDynamicLabel>& labels, double hop_seconds,
                                       const dsp::FeatureMatrix& features);

// DYNL: "DYNL" | version u32 | frames u32 | hop f64 | frames x u8 (255 = masked)
inline constexpr std::uint32_t kLabelFileVersion = 1;
std::vector<std::uint8_t> encode_labels(const FrameLabelSequence& labels);
FrameLabelSequence decode_labels(const std::vector<std::uint8_t>& bytes);
void write_labels(const std::filesystem::path& path, const FrameLabelSequence& labels);
FrameLabelSequence read_labels(const std::filesystem::path& path);

/// {hop_seconds, classes: [int|null], categories: [name|null], regions: [name|null]}
nlohmann::ordered_json to_json(const FrameLabelSequence& labels);

}  // namespace vocaldyn::label
