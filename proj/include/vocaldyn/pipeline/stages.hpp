#pragma once

#include <array>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "vocaldyn/align/align.hpp"
#include "vocaldyn/dsp/audio.hpp"
#include "vocaldyn/pipeline/manifest.hpp"
#include "vocaldyn/score/score.hpp"

namespace vocaldyn::pipeline {

enum class Stage { features, align, label };
std::string_view stage_name(Stage s);
std::optional<Stage> parse_stage(std::string_view name);

/// A labelled feature rate: base features downsampled by `factor`.
struct HopConfig {
    std::string_view name;  // artifact stem, e.g. "bark_x8"
    dsp::FeatureKind kind;
    std::size_t factor;
};

/// Bark / 8 = 16 ms, log-Mel / 3 = 17.4 ms, log-Mel / 5 = 29 ms, Bark / 15 = 30 ms.
inline constexpr std::array<HopConfig, 4> kHopConfigs = {{
    {"bark_x8", dsp::FeatureKind::bark_loudness, 8},
    {"mel_x3", dsp::FeatureKind::log_mel, 3},
    {"mel_x5", dsp::FeatureKind::log_mel, 5},
    {"bark_x15", dsp::FeatureKind::bark_loudness, 15},
}};
const HopConfig& hop_config(std::string_view name);

/// Hop of a downsampled configuration in seconds.
double hop_seconds(const HopConfig& c);

struct StageOptions {
    /// Align against the vocal stem (vocal-only score chroma) instead of the mix.
    bool align_to_stem = false;
    align::AlignOptions align;
    /// Notes before the first absolute marking: dropped (masked) by default.
    score::PrefixPolicy prefix = score::PrefixPolicy::drop;
    bool vocal_markings_only = false;
};

/// Artifact file names inside Manifest::artifact_dir(id).
namespace artifact {
inline constexpr std::string_view kLogMel = "logmel.dynf";
inline constexpr std::string_view kBark = "bark.dynf";
inline constexpr std::string_view kAlignedNotes = "aligned_notes.json";
inline constexpr std::string_view kF0 = "f0.json";
inline constexpr std::string_view kAlignment = "alignment.json";
inline constexpr std::string_view kNoteLabels = "note_labels.json";
std::string features(const HopConfig& c);  // "features_bark_x8.dynf"
std::string labels(const HopConfig& c);    // "labels_bark_x8.dynl"
}  // namespace artifact

/// Runs one stage for one record and returns the updated record. Artifacts
/// are written atomically; the manifest itself is not touched. Re-running a
/// completed stage rewrites identical outputs and keeps the status.
///
/// features: needs stem_path; writes log-Mel (44.1 kHz) and Bark (48 kHz) DYNF.
/// align:    needs features; writes aligned notes, f0 and alignment_score.
///           An optional "f0_path" CSV (time,frequency[,confidence]) in the
///           record replaces the built-in YIN tracker.
/// label:    needs accepted; writes DYNL and downsampled DYNF per kHopConfigs.
PerformanceRecord run_stage(const Manifest& manifest, const PerformanceRecord& record, Stage stage,
                            const StageOptions& options = {});

/// Runs `stage` over every record for which it is the next step, saving the
/// manifest after each record. Returns the ids that failed with their errors.
std::vector<std::pair<std::string, std::string>> run_stage_all(Manifest& manifest, Stage stage,
                                                               const StageOptions& options = {},
                                                               unsigned jobs = 1);

struct NoteRect {
    double onset = 0.0;
    double offset = 0.0;
    int pitch = 0;
    double pitch_hz = 0.0;
};

struct DynamicsRegion {
    double start = 0.0;
    double end = 0.0;
    score::DynamicCategory category = score::DynamicCategory::mf;
};

struct VisualizationBundle {
    std::string id;
    double duration = 0.0;
    std::optional<double> alignment_score;
    std::vector<std::pair<double, double>> f0;  // (time s, Hz), voiced frames only
    std::vector<NoteRect> notes;
    std::vector<std::pair<float, float>> envelope;  // (min, max) per bucket
    std::vector<DynamicsRegion> regions;           // absolute dynamics, non-overlapping
    std::vector<DynamicsRegion> wedges;            // crescendo / diminuendo spans

    Json to_json() const;
};

/// Needs the align stage's artifacts. `width` is the envelope bucket count.
VisualizationBundle build_visualization(const Manifest& manifest, const PerformanceRecord& record,
                                        std::size_t width = 1000, const StageOptions& options = {});

/// Min/max pairs over `width` equal sample ranges.
std::vector<std::pair<float, float>> waveform_envelope(std::span<const float> samples, std::size_t width);

/// accept -> accepted, reject -> rejected; only from aligned.
Status decision_status(std::string_view decision);

/// Serializes decisions on one manifest: each call reloads nothing, mutates
/// the in-memory manifest and saves it atomically before returning.
class DecisionStore {
public:
    explicit DecisionStore(Manifest manifest) : manifest_(std::move(manifest)) {}

    PerformanceRecord record_decision(std::string_view id, std::string_view decision, std::string note,
                                      std::string by = "reviewer");
    std::vector<PerformanceRecord> snapshot() const;
    PerformanceRecord get(std::string_view id) const;
    /// Copy of the manifest for read-only work such as visualization.
    Manifest manifest() const;

private:
    mutable std::mutex mu_;
    Manifest manifest_;
};

/// Free-function form for one-shot use: loads nothing, saves the manifest.
PerformanceRecord record_decision(Manifest& manifest, std::string_view id, std::string_view decision,
                                  std::string note, std::string by = "reviewer");

/// Copies downsampled features and labels of every labeled record into
/// out_dir/<id>/ and writes out_dir/summary.json. Throws when nothing is
/// labeled.
Json export_dataset(const Manifest& manifest, const std::filesystem::path& out_dir);

/// Current UTC time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_timestamp();

}  // namespace vocaldyn::pipeline
