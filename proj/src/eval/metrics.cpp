#include "vocaldyn/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>
#include <tuple>

namespace vocaldyn::eval {
namespace {

constexpr std::size_t K = label::kNumClasses;

void check_pair(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> labels) {
    if (pred.size() != labels.size())
        throw ShapeError("predictions have " + std::to_string(pred.size()) + " frames, labels " +
                         std::to_string(labels.size()));
}

std::uint8_t checked_prediction(std::uint8_t p) {
    if (p >= K) throw InvalidArgument("prediction " + std::to_string(p) + " is not a class index");
    return p;
}

std::uint8_t checked_label(std::uint8_t y) {
    if (y >= K && y != label::kMaskedClass) throw InvalidArgument("label " + std::to_string(y) + " is not a class index");
    return y;
}

double percent(std::uint64_t matched, std::uint64_t total) {
    if (total == 0) throw UndefinedMetricError("no masked-in frames; accuracy is undefined");
    return 100.0 * static_cast<double>(matched) / static_cast<double>(total);
}

int feature_rank(dsp::FeatureKind k) {
    switch (k) {
        case dsp::FeatureKind::log_mel: return 0;
        case dsp::FeatureKind::bark_loudness: return 1;
        default: return 2;
    }
}

// Resolution in tenths of a millisecond; also the grouping key.
long resolution_tenths(double hop_seconds) { return std::lround(hop_seconds * 1e4); }

}  // namespace

MatchCounts& MatchCounts::operator+=(const MatchCounts& o) {
    for (std::size_t t = 0; t < 3; ++t) within[t] += o.within[t];
    total += o.total;
    return *this;
}

MatchCounts count_matches(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> labels) {
    check_pair(pred, labels);
    MatchCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto y = checked_label(labels[i]);
        const auto p = checked_prediction(pred[i]);
        if (y == label::kMaskedClass) continue;
        const int d = std::abs(int(p) - int(y));
        ++c.total;
        for (int t = 0; t < 3; ++t) c.within[t] += d <= t;
    }
    return c;
}

double relaxed_accuracy(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> labels, int tolerance) {
    if (tolerance < 0 || tolerance > 2) throw InvalidArgument("tolerance must be 0, 1 or 2");
    const auto c = count_matches(pred, labels);
    return percent(c.within[tolerance], c.total);
}

double relaxed_accuracy(std::span<const std::uint8_t> pred, const label::FrameLabelSequence& labels, int tolerance) {
    return relaxed_accuracy(pred, labels.classes, tolerance);
}

ConfusionMatrix confusion_matrix(std::span<const std::uint8_t> pred, std::span<const std::uint8_t> labels) {
    check_pair(pred, labels);
    ConfusionMatrix m{};
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto y = checked_label(labels[i]);
        const auto p = checked_prediction(pred[i]);
        if (y != label::kMaskedClass) ++m[y][p];
    }
    return m;
}

std::string format_percent(std::uint64_t matched, std::uint64_t total) {
    if (total == 0) throw UndefinedMetricError("no masked-in frames; accuracy is undefined");
    if (matched > total) throw InvalidArgument("matched count exceeds total");
    // hundredths of a percent, half-up: floor((10000 m / n) + 1/2)
    const auto m = static_cast<unsigned __int128>(matched), n = static_cast<unsigned __int128>(total);
    const auto h = static_cast<std::uint64_t>((20000 * m + n) / (2 * n));
    std::string frac = std::to_string(h % 100);
    if (frac.size() < 2) frac.insert(0, "0");
    return std::to_string(h / 100) + "." + frac;
}

std::string format_resolution(double hop_seconds) {
    if (!(hop_seconds > 0)) throw InvalidArgument("hop must be positive");
    const long tenths = resolution_tenths(hop_seconds);
    std::string s = std::to_string(tenths / 10);
    if (tenths % 10 != 0) s += "." + std::to_string(tenths % 10);
    return s + " ms";
}

std::string feature_label(dsp::FeatureKind kind) {
    switch (kind) {
        case dsp::FeatureKind::log_mel: return "log-Mel";
        case dsp::FeatureKind::bark_loudness: return "Bark";
        case dsp::FeatureKind::chroma: return "Chroma";
    }
    return "?";
}

double ReportRow::acc() const { return percent(counts.within[0], counts.total); }
double ReportRow::acc_pm1() const { return percent(counts.within[1], counts.total); }
double ReportRow::acc_pm2() const { return percent(counts.within[2], counts.total); }

EvalReport build_report(std::span<const EvalRun> runs) {
    if (runs.empty()) throw InvalidArgument("build_report needs at least one run");
    using Key = std::tuple<int, std::size_t, long>;
    std::map<Key, ReportRow> rows;
    for (const auto& r : runs) {
        const Key key{feature_rank(r.config.feature), r.config.sequence_length, resolution_tenths(r.config.hop_seconds)};
        auto [it, fresh] = rows.try_emplace(key);
        auto& row = it->second;
        if (fresh) row.config = r.config;
        row.counts += count_matches(r.predictions, r.labels);
        const auto cm = confusion_matrix(r.predictions, r.labels);
        for (std::size_t i = 0; i < K; ++i)
            for (std::size_t j = 0; j < K; ++j) row.confusion[i][j] += cm[i][j];
    }
    EvalReport out;
    for (auto& [key, row] : rows) {
        if (row.counts.total == 0)
            throw UndefinedMetricError("no masked-in frames for " + feature_label(row.config.feature) + " at " +
                                       format_resolution(row.config.hop_seconds));
        out.rows.push_back(row);
    }
    return out;
}

std::string EvalReport::to_text() const {
    const std::vector<std::string> header = {"Seq Length", "Temporal Resolution", "Perceptual Feature",
                                             "Acc",        "Acc(±1)",             "Acc(±2)"};
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows)
        cells.push_back({std::to_string(r.config.sequence_length), format_resolution(r.config.hop_seconds),
                         feature_label(r.config.feature), format_percent(r.counts.within[0], r.counts.total),
                         format_percent(r.counts.within[1], r.counts.total),
                         format_percent(r.counts.within[2], r.counts.total)});
    // Widths in code points; "±" is two bytes in UTF-8.
    auto width = [](const std::string& s) {
        return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) { return (c & 0xC0) != 0x80; }));
    };
    std::vector<std::size_t> w(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        w[c] = width(header[c]);
        for (const auto& row : cells) w[c] = std::max(w[c], width(row[c]));
    }
    std::ostringstream os;
    auto line = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (c) os << " | ";
            const std::string pad(w[c] - width(row[c]), ' ');
            // text columns left-aligned, numbers right-aligned
            if (c == 0 || c >= 3) os << pad << row[c];
            else os << row[c] << pad;
        }
        os << '\n';
    };
    line(header);
    for (std::size_t c = 0; c < w.size(); ++c) os << (c ? "-|-" : "") << std::string(w[c], '-');
    os << '\n';
    for (const auto& row : cells) line(row);
    return os.str();
}

nlohmann::ordered_json EvalReport::to_json() const {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        auto confusion = nlohmann::ordered_json::array();
        for (const auto& row : r.confusion) confusion.push_back(row);
        arr.push_back({{"seq_length", r.config.sequence_length},
                       {"temporal_resolution", format_resolution(r.config.hop_seconds)},
                       {"hop_seconds", r.config.hop_seconds},
                       {"feature", feature_label(r.config.feature)},
                       {"acc", std::stod(format_percent(r.counts.within[0], r.counts.total))},
                       {"acc_pm1", std::stod(format_percent(r.counts.within[1], r.counts.total))},
                       {"acc_pm2", std::stod(format_percent(r.counts.within[2], r.counts.total))},
                       {"masked_frame_count", r.counts.total},
                       {"confusion", confusion}});
    }
    return {{"averaging", "global_frames"}, {"rows", arr}};
}

std::array<std::uint64_t, K> class_frame_counts(std::span<const label::FrameLabelSequence> files) {
    std::array<std::uint64_t, K> n{};
    for (const auto& f : files)
        for (auto y : f.classes)
            if (checked_label(y) != label::kMaskedClass) ++n[y];
    return n;
}

std::array<double, K> duration_statistics(std::span<const label::FrameLabelSequence> files) {
    std::array<double, K> s{};
    for (const auto& f : files) {
        std::array<std::uint64_t, K> n{};
        for (auto y : f.classes)
            if (checked_label(y) != label::kMaskedClass) ++n[y];
        for (std::size_t c = 0; c < K; ++c) s[c] += static_cast<double>(n[c]) * f.hop_seconds;
    }
    return s;
}

nlohmann::ordered_json durations_to_json(const std::array<double, K>& seconds) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (std::size_t c = 0; c < K; ++c)
        j[std::string(score::category_name(label::class_to_category(static_cast<std::uint8_t>(c))))] = seconds[c];
    return j;
}

}  // namespace vocaldyn::eval
