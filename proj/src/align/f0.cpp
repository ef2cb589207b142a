#include "vocaldyn/align/f0.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <string>

#include "vocaldyn/dsp/spectral.hpp"
#include "vocaldyn/simd/kernels.hpp"

namespace vocaldyn::align {

F0Track extract_f0(const dsp::AudioBuffer& audio, const YinConfig& cfg) {
    if (!(cfg.threshold > 0) || cfg.min_hz <= 0 || cfg.max_hz <= cfg.min_hz)
        throw InvalidArgument("invalid YIN configuration");
    F0Track track;
    if (audio.empty()) return track;

    const auto y = dsp::resample(audio, cfg.sample_rate);
    const double sr = cfg.sample_rate;
    const auto w = static_cast<std::size_t>(std::lround(cfg.window_seconds * sr));
    const auto tau_min = std::max<std::size_t>(2, static_cast<std::size_t>(std::floor(sr / cfg.max_hz)));
    const auto tau_max = static_cast<std::size_t>(std::ceil(sr / cfg.min_hz));
    const std::size_t frames =
        std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(audio.duration_seconds() / kF0HopSeconds - 1e-9)));
    track.f0.assign(frames, 0.0);
    track.confidence.assign(frames, 0.0);

    // Zero-padded copy so every frame can read w + tau_max samples.
    const std::size_t pad = w / 2;
    std::vector<float> x(pad + y.size() + w + tau_max + 1, 0.0f);
    std::copy(y.samples().begin(), y.samples().end(), x.begin() + static_cast<long>(pad));
    std::vector<double> sq(x.size() + 1, 0.0);
    for (std::size_t i = 0; i < x.size(); ++i) sq[i + 1] = sq[i] + static_cast<double>(x[i]) * x[i];

    std::vector<double> d(tau_max + 2, 0.0), dn(tau_max + 2, 1.0);
    for (std::size_t k = 0; k < frames; ++k) {
        // Window starts half a window before the frame time (shifted by pad).
        const auto s = static_cast<std::size_t>(std::lround(static_cast<double>(k) * kF0HopSeconds * sr));
        const double e0 = sq[s + w] - sq[s];
        const std::span<const float> head(x.data() + s, w);
        double running = 0.0;
        dn[0] = 1.0;
        for (std::size_t tau = 1; tau <= tau_max + 1; ++tau) {
            const double et = sq[s + tau + w] - sq[s + tau];
            const double r = simd::dot<float>(head, std::span<const float>(x.data() + s + tau, w));
            d[tau] = std::max(0.0, e0 + et - 2.0 * r);
            running += d[tau];
            dn[tau] = running > 0.0 ? d[tau] * static_cast<double>(tau) / running : 1.0;
        }

        std::size_t best = 0;
        for (std::size_t tau = tau_min; tau <= tau_max; ++tau) {
            if (dn[tau] < cfg.threshold) {
                while (tau + 1 <= tau_max && dn[tau + 1] < dn[tau]) ++tau;
                best = tau;
                break;
            }
        }
        if (best == 0) {
            double lo = 1.0;
            for (std::size_t tau = tau_min; tau <= tau_max; ++tau) lo = std::min(lo, dn[tau]);
            track.confidence[k] = std::clamp(1.0 - lo, 0.0, 1.0);
            continue;
        }
        double period = static_cast<double>(best);
        const double a = dn[best - 1], b = dn[best], c = dn[best + 1];
        const double denom = a - 2.0 * b + c;
        if (denom > 0.0) period += std::clamp(0.5 * (a - c) / denom, -0.5, 0.5);
        const double hz = sr / period;
        track.confidence[k] = std::clamp(1.0 - b, 0.0, 1.0);
        if (hz >= cfg.min_hz && hz <= cfg.max_hz) track.f0[k] = hz;
    }
    return track;
}

F0Track ingest_f0_rows(const std::vector<F0Row>& rows, double min_confidence) {
    F0Track track;
    if (rows.empty()) return track;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (!std::isfinite(rows[i].time) || !std::isfinite(rows[i].frequency))
            throw InvalidArgument("f0 row " + std::to_string(i) + " is not finite");
        if (rows[i].frequency < 0) throw InvalidArgument("f0 row " + std::to_string(i) + " has a negative frequency");
        if (i > 0 && rows[i].time < rows[i - 1].time)
            throw InvalidArgument("f0 rows are not sorted by time at row " + std::to_string(i));
    }
    const double last = std::max(0.0, rows.back().time);
    const auto frames = static_cast<std::size_t>(std::llround(last / kF0HopSeconds)) + 1;
    track.f0.resize(frames);
    track.confidence.resize(frames);
    std::size_t r = 0;
    for (std::size_t k = 0; k < frames; ++k) {
        const double t = track.time(k);
        // Advance while the next row is strictly closer; equal distance keeps the earlier row.
        while (r + 1 < rows.size() && std::abs(rows[r + 1].time - t) < std::abs(rows[r].time - t) - 1e-12) ++r;
        const auto& row = rows[r];
        const bool voiced = row.frequency >= kF0MinHz && row.frequency <= kF0MaxHz && row.confidence >= min_confidence;
        track.f0[k] = voiced ? row.frequency : 0.0;
        track.confidence[k] = std::clamp(row.confidence, 0.0, 1.0);
    }
    return track;
}

std::vector<F0Row> parse_f0_csv(std::string_view text) {
    std::vector<F0Row> rows;
    long line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.remove_suffix(1);
        if (line.empty()) continue;

        double v[3] = {0.0, 0.0, 1.0};
        int n = 0;
        bool numeric = true;
        std::size_t start = 0;
        while (start <= line.size() && n < 3) {
            const auto comma = line.find(',', start);
            auto field = line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
            while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
            const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v[n]);
            if (ec != std::errc() || ptr != field.data() + field.size()) {
                numeric = false;
                break;
            }
            ++n;
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (!numeric || n < 2) {
            if (rows.empty() && line_no == 1) continue;  // header
            throw ParseError("f0 CSV expects time,frequency[,confidence]", line_no);
        }
        rows.push_back({v[0], v[1], v[2]});
    }
    return rows;
}

}  // namespace vocaldyn::align
