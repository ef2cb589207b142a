#pragma once

#include <array>
#include <cstdint>
#include <json.hpp>
#include <span>
#include <string>
#include <vector>

#include "vocaldyn/dsp/audio.hpp"
#include "vocaldyn/label/labels.hpp"

namespace vocaldyn::eval {

class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

using ConfusionMatrix = std::array<std::array<std::uint64_t, label::kNumClasses>, label::kNumClasses>;

/// Masked-in frame counts with |pred - label| <= 0, 1, 2.
struct MatchCounts {
    std::array<std::uint64_t, 3> within{};
    std::uint64_t total = 0;

    MatchCounts& operator+=(const MatchCounts& o);
    bool operator==(const MatchCounts&) const = default;
};

/// Labels use label::kMaskedClass for frames that do not count. Predictions
/// must be class indices. Lengths must agree.
MatchCounts count_matches(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels);

/// 100 * matched / masked-in count. Throws UndefinedMetricError when no frame
/// is masked in, InvalidArgument for tolerance outside {0, 1, 2}.
double relaxed_accuracy(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels,
                        int tolerance);
double relaxed_accuracy(std::span<const std::uint8_t> predictions, const label::FrameLabelSequence& labels,
                        int tolerance);

/// Cell (i, j) counts masked-in frames with label i and prediction j.
ConfusionMatrix confusion_matrix(std::span<const std::uint8_t> predictions, std::span<const std::uint8_t> labels);

/// Percentage with two decimals, ties rounded up, computed exactly from the
/// counts: "33.33", "100.00".
std::string format_percent(std::uint64_t matched, std::uint64_t total);

/// "17.4 ms", "29 ms": hop in milliseconds rounded to 0.1, trailing ".0" dropped.
std::string format_resolution(double hop_seconds);

/// "log-Mel" or "Bark".
std::string feature_label(dsp::FeatureKind kind);

struct RunConfig {
    dsp::FeatureKind feature = dsp::FeatureKind::bark_loudness;
    std::size_t sequence_length = 0;
    double hop_seconds = 0.0;
};

/// One evaluated file. Runs with the same configuration are pooled.
struct EvalRun {
    std::vector<std::uint8_t> predictions;
    std::vector<std::uint8_t> labels;
    RunConfig config;
};

struct ReportRow {
    RunConfig config;
    MatchCounts counts;
    ConfusionMatrix confusion{};

    double acc() const;
    double acc_pm1() const;
    double acc_pm2() const;
};

/// Accuracies pool all masked-in frames of a configuration (global frame
/// average, not a per-file mean).
struct EvalReport {
    std::vector<ReportRow> rows;  // log-Mel before Bark, then shorter sequence, then smaller hop

    std::string to_text() const;
    nlohmann::ordered_json to_json() const;
};

/// Throws InvalidArgument on an empty run list and UndefinedMetricError when a
/// configuration has no masked-in frame.
EvalReport build_report(std::span<const EvalRun> runs);

/// Seconds of masked-in frames per class, summed over files (count * hop).
std::array<double, label::kNumClasses> duration_statistics(std::span<const label::FrameLabelSequence> files);
std::array<std::uint64_t, label::kNumClasses> class_frame_counts(std::span<const label::FrameLabelSequence> files);

/// {"pppp": seconds, ..., "ffff": seconds}
nlohmann::ordered_json durations_to_json(const std::array<double, label::kNumClasses>& seconds);

}  // namespace vocaldyn::eval
