// Acceptance suite: one PASS/FAIL line per criterion. Tolerances and time
// budgets are fixed here; the exit status is non-zero if any line fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "synth.hpp"
#include "vocaldyn/align/dtw.hpp"
#include "vocaldyn/dsp/feature_file.hpp"
#include "vocaldyn/dsp/log_mel.hpp"
#include "vocaldyn/dsp/loudness.hpp"
#include "vocaldyn/simd/kernels.hpp"
#include "vocaldyn/dsp/wav.hpp"
#include "vocaldyn/eval/metrics.hpp"
#include "vocaldyn/io.hpp"
#include "vocaldyn/label/labels.hpp"
#include "vocaldyn/model/train.hpp"
#include "vocaldyn/pipeline/stages.hpp"
#include "vocaldyn/score/musicxml.hpp"
#include "vocaldyn/score/score.hpp"

using namespace vocaldyn;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int g_failures = 0;

void run(const char* name, double budget_seconds, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < budget_seconds;
    const bool pass = o.pass && in_time;
    if (!pass) ++g_failures;
    std::printf("%s %s: %s; %.2f s (budget %.0f s%s)\n", pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs,
                budget_seconds, in_time ? "" : ", exceeded");
    std::fflush(stdout);
}

template <class... A>
std::string fmt(const char* f, A... a) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

// 100 random cases of 1000 frames over 10 classes with random masks.
Outcome metric_oracle() {
    std::mt19937_64 rng(100);
    std::uniform_int_distribution<int> cls(0, 9);
    std::uniform_real_distribution<double> rate(0.0, 0.6);
    int exact = 0, monotone = 0;
    for (int c = 0; c < 100; ++c) {
        std::vector<std::uint8_t> p(1000), y(1000);
        std::bernoulli_distribution mask(rate(rng));
        for (std::size_t t = 0; t < 1000; ++t) {
            p[t] = static_cast<std::uint8_t>(cls(rng));
            y[t] = mask(rng) ? label::kMaskedClass : static_cast<std::uint8_t>(cls(rng));
        }
        y[0] = static_cast<std::uint8_t>(cls(rng));
        double acc[3];
        bool all = true;
        for (int tol = 0; tol <= 2; ++tol) {
            acc[tol] = eval::relaxed_accuracy(p, y, tol);
            all &= acc[tol] == testing::direct_accuracy(p, y, tol);
        }
        exact += all;
        monotone += acc[0] <= acc[1] && acc[1] <= acc[2];
    }
    return {exact == 100 && monotone == 100, fmt("%d/100 exact, %d/100 monotone", exact, monotone)};
}

// 50 random cost matrices up to 8 x 11 against full enumeration.
Outcome dtw_oracle() {
    std::mt19937_64 rng(50);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int agree = 0, invariant = 0, reachable = 0;
    for (int c = 0; c < 50; ++c) {
        std::size_t rows, cols, paths;
        std::vector<double> cost;
        double oracle;
        // Draw until the far corner is reachable by the step pattern.
        do {
            rows = 1 + rng() % 8;
            cols = 1 + rng() % 11;
            cost.resize(rows * cols);
            for (auto& v : cost) v = u(rng);
            oracle = testing::brute_force_dtw(cost, rows, cols, paths);
        } while (paths == 0);
        ++reachable;
        const auto p = align::dtw(cost, rows, cols);
        const double recomputed = testing::dtw_path_cost(p, cost, cols);
        agree += std::abs(p.total_cost - oracle) <= 1e-12 * std::max(1.0, oracle) &&
                 std::abs(recomputed - oracle) <= 1e-12 * std::max(1.0, oracle);
        bool same = true;
        for (double lambda : {0.25, 3.0, 1000.0}) {
            auto scaled = cost;
            for (auto& v : scaled) v *= lambda;
            same &= align::dtw(scaled, rows, cols).steps == p.steps;
        }
        invariant += same;
    }
    return {agree == 50 && invariant == 50,
            fmt("%d/%d costs equal enumeration, %d/%d paths unchanged under scaling", agree, reachable, invariant,
                reachable)};
}

// Steady 1 kHz tones at the default calibration (full-scale sine = 94 dB SPL).
Outcome loudness_reference() {
    auto tone = [](double db) {
        const double amp = std::pow(10.0, (db - dsp::LoudnessConfig{}.calibration_db_spl_fs) / 20.0);
        std::vector<float> x(2 * dsp::kLoudnessSampleRate);
        for (std::size_t i = 0; i < x.size(); ++i)
            x[i] = static_cast<float>(amp * std::sin(2 * std::numbers::pi * 1000.0 * i / dsp::kLoudnessSampleRate));
        return dsp::AudioBuffer{std::move(x), dsp::kLoudnessSampleRate};
    };
    // Mean over the last 200 ms, once the temporal weighting has settled.
    auto steady = [&](double db, double& weighted) {
        const auto tr = dsp::zwicker_time_varying(tone(db));
        const auto sum = dsp::total_loudness(tr.specific);
        double a = 0, b = 0;
        for (std::size_t i = sum.size() - 100; i < sum.size(); ++i) a += sum[i], b += tr.total[i];
        weighted = b / 100;
        return a / 100;
    };
    double w40, w50;
    const double n40 = steady(40, w40), n50 = steady(50, w50);
    const auto quiet = dsp::bark_specific_loudness(
        dsp::AudioBuffer{std::vector<float>(dsp::kLoudnessSampleRate, 0.0f), dsp::kLoudnessSampleRate});
    const auto quiet_total = dsp::total_loudness(quiet);
    const double silent = *std::max_element(quiet_total.begin(), quiet_total.end());
    const bool ok = std::abs(n40 - 1.0) <= 0.05 && std::abs(w40 - 1.0) <= 0.05 && std::abs(n50 - 2.0) <= 0.2 &&
                    std::abs(w50 - 2.0) <= 0.2 && silent <= 1e-6;
    return {ok, fmt("40 dB -> %.4f sone (bark sum) / %.4f (total), need 1 +- 5%%; 50 dB -> %.4f / %.4f, need 2 +- 10%%; "
                    "silence max %.1e",
                    n40, w40, n50, w50, silent)};
}

Outcome hop_arithmetic() {
    const std::pair<const char*, const char*> want[] = {
        {"bark_x8", "16 ms"}, {"mel_x3", "17.4 ms"}, {"mel_x5", "29 ms"}, {"bark_x15", "30 ms"}};
    std::string got;
    bool ok = true;
    for (auto [name, ms] : want) {
        const auto& c = pipeline::hop_config(name);
        const double base = c.kind == dsp::FeatureKind::log_mel ? 256.0 / dsp::kLogMelSampleRate : dsp::kLoudnessHopSeconds;
        dsp::FeatureMatrix f(c.kind, 1000, 2, base, 0);
        const auto d = dsp::downsample_time(f, c.factor);
        const auto s = eval::format_resolution(d.hop_seconds);
        ok &= s == ms && eval::format_resolution(pipeline::hop_seconds(c)) == ms &&
              d.frames == (1000 + c.factor - 1) / c.factor;
        got += std::string(got.empty() ? "" : ", ") + name + " " + s;
    }
    return {ok, got};
}

Outcome gradient_check() {
    double worst = 0.0;
    std::string where;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto r = testing::gradient_check(seed);
        if (r.max_relative_error >= worst) {
            worst = r.max_relative_error;
            where = r.worst_tensor;
        }
    }
    return {worst < 1e-4, fmt("max relative error %.2e (%s) over 5 seeds, limit 1e-4", worst, where.c_str())};
}

Outcome overfit() {
    // Four items of random features with piecewise-constant labels.
    constexpr std::size_t bins = 64, frames = 256;
    std::mt19937_64 rng(4);
    std::normal_distribution<float> g;
    std::vector<model::Sequence> data(4);
    for (std::size_t i = 0; i < data.size(); ++i) {
        auto& s = data[i];
        s.id = "item" + std::to_string(i);
        s.frames = frames;
        s.features.resize(frames * bins);
        for (auto& v : s.features) v = g(rng);
        s.labels.resize(frames);
        std::uint8_t cls = static_cast<std::uint8_t>(rng() % 10);
        for (std::size_t t = 0; t < frames; ++t) {
            if (t % 24 == 0) cls = static_cast<std::uint8_t>(rng() % 10);
            s.labels[t] = t % 11 == 5 ? model::kIgnoreLabel : cls;
        }
    }
    model::ModelConfig mc;
    mc.input_bins = bins;
    mc.sequence_length = frames;
    mc.seed = 4;
    auto params = model::init_model<float>(mc);
    model::TrainConfig tc;
    tc.epochs = 500;
    tc.learning_rate = 0.002;
    tc.batch_size = 4;
    tc.seed = 4;
    const auto stats = model::train(params, data, tc);
    // Accuracy of the final parameters, measured separately from training.
    std::uint64_t hit = 0, total = 0;
    for (const auto& s : data) {
        const auto pred = model::predict(params, s.features, s.frames);
        for (std::size_t t = 0; t < s.frames; ++t)
            if (s.labels[t] != model::kIgnoreLabel) total++, hit += pred[t] == s.labels[t];
    }
    const double acc = 100.0 * static_cast<double>(hit) / static_cast<double>(total);
    return {acc >= 95.0, fmt("masked training accuracy %.2f%% after 500 epochs (need >= 95%%), last epoch loss %.4f", acc,
                             stats.back().loss)};
}

Outcome end_to_end() {
    const auto root = fs::temp_directory_path() / ("vocaldyn_accept_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    struct Cleanup {
        fs::path p;
        ~Cleanup() {
            std::error_code ec;
            fs::remove_all(p, ec);
        }
    } cleanup{root};
    ::unsetenv("DYNAMICS_DATA_ROOT");
    ::unsetenv("VOCALDYN_DATA_ROOT");

    // 25 measures of 4/4 at 100 qpm: 60 s.
    testing::FixtureScoreOptions so;
    so.measures = 25;
    so.tempo_qpm = 100;
    so.seed = 12;
    const auto score = testing::fixture_score(so);
    io::write_file_atomic(root / "lied.musicxml", score::write_musicxml(score));

    const double tempos[4] = {96, 100, 104, 120};  // the last is held out
    pipeline::Json arr = pipeline::Json::array();
    for (int k = 0; k < 4; ++k) {
        testing::RenderOptions ro;
        ro.tempo_qpm = tempos[k];
        ro.seed = 30 + k;
        const auto r = testing::render(score, ro);
        const auto id = "take" + std::to_string(k);
        dsp::write_wav(root / (id + "_mix.wav"), r.mix);
        dsp::write_wav(root / (id + "_vocals.wav"), r.stem);
        arr.push_back({{"id", id},
                       {"score_path", "lied.musicxml"},
                       {"audio_path", id + "_mix.wav"},
                       {"stem_path", id + "_vocals.wav"},
                       {"status", "pending"}});
    }
    io::write_file_atomic(root / "manifest.json", arr.dump(2));
    auto m = pipeline::Manifest::load(root / "manifest.json");

    std::string scores;
    for (auto stage : {pipeline::Stage::features, pipeline::Stage::align}) {
        const auto failed = pipeline::run_stage_all(m, stage);
        if (!failed.empty()) return {false, failed[0].first + ": " + failed[0].second};
    }
    for (const auto& r : m.records) {
        scores += fmt("%s%.2f", scores.empty() ? "" : "/", r.alignment_score.value_or(-1));
        pipeline::record_decision(m, r.id, "accept", "");
    }
    if (const auto failed = pipeline::run_stage_all(m, pipeline::Stage::label); !failed.empty())
        return {false, failed[0].first + ": " + failed[0].second};

    const auto& cfg = pipeline::hop_config("bark_x15");
    std::vector<model::Sequence> train_set;
    model::Sequence test;
    for (const auto& r : m.records) {
        const auto dir = m.artifact_dir(r.id);
        const auto f = dsp::read_features(dir / pipeline::artifact::features(cfg));
        const auto l = label::read_labels(dir / pipeline::artifact::labels(cfg));
        model::Sequence s{f.values, l.classes, f.frames, r.id};
        if (r.id == "take3") test = std::move(s);
        else train_set.push_back(std::move(s));
    }
    model::ModelConfig mc;
    mc.input_bins = train_set[0].features.size() / train_set[0].frames;
    mc.sequence_length = 1024;
    mc.seed = 7;
    auto params = model::init_model<float>(mc);
    model::TrainConfig tc;
    tc.epochs = 40;
    tc.batch_size = 1;
    tc.seed = 7;
    model::train(params, train_set, tc);

    const auto pred = model::predict(params, test.features, test.frames);
    const auto counts = eval::count_matches(pred, test.labels);
    const double acc0 = 100.0 * counts.within[0] / counts.total, acc1 = 100.0 * counts.within[1] / counts.total;
    return {acc1 >= 80.0, fmt("held-out take at 120 qpm: Acc %.2f%%, Acc+-1 %.2f%% (need >= 80%%) on %llu frames; "
                              "alignment scores %s",
                              acc0, acc1, static_cast<unsigned long long>(counts.total), scores.c_str())};
}

Outcome propagation_fixtures() {
    using C = score::DynamicCategory;
    using score::PartRole;
    auto voice = [](std::initializer_list<double> onsets) {
        score::ScoreDocument s;
        for (double o : onsets) s.part(PartRole::vocal).notes.push_back({67, o, 1.0, PartRole::vocal, 1});
        return s;
    };
    auto cats = [](const std::vector<score::NoteDynamicLabel>& l) {
        std::vector<C> out;
        for (const auto& x : l) out.push_back(x.category);
        return out;
    };
    int ok = 0;

    auto hold = voice({0, 1, 2, 3});
    hold.markings = {{C::p, 0, PartRole::vocal, 0}, {C::f, 3, PartRole::vocal, 3}};
    ok += cats(score::propagate_note_dynamics(hold)) == std::vector<C>{C::p, C::p, C::p, C::f};

    auto sf = voice({0, 1, 2});
    sf.markings = {{C::p, 0, PartRole::vocal, 0}, {C::sf, 1, PartRole::vocal, 1}};
    ok += cats(score::propagate_note_dynamics(sf)) == std::vector<C>{C::p, C::sf, C::p};

    auto wedge = voice({0, 1, 2, 3});
    wedge.markings = {{C::p, 0, PartRole::vocal, 0}, {C::crescendo, 1, PartRole::vocal, 3}, {C::f, 3, PartRole::vocal, 3}};
    wedge.normalize();
    const auto wl = score::propagate_note_dynamics(wedge);
    std::vector<std::optional<score::WedgeRegion>> regions;
    for (const auto& x : wl) regions.push_back(x.region);
    ok += cats(wl) == std::vector<C>{C::p, C::p, C::p, C::f} &&
          regions == std::vector<std::optional<score::WedgeRegion>>{std::nullopt, score::WedgeRegion::crescendo,
                                                                    score::WedgeRegion::crescendo, std::nullopt};
    return {ok == 3, fmt("%d/3 fixtures (hold, sf, wedge) exact", ok)};
}

eval::EvalRun stub(dsp::FeatureKind f, std::size_t seq, const char* hop, std::uint64_t a0, std::uint64_t a1,
                   std::uint64_t a2) {
    // 10000 labeled frames of class 5; predictions at distance 0, 1, 2 and 3.
    eval::EvalRun r;
    r.config = {f, seq, pipeline::hop_seconds(pipeline::hop_config(hop))};
    r.labels.assign(10000, 5);
    r.predictions.resize(10000);
    for (std::uint64_t t = 0; t < 10000; ++t) r.predictions[t] = t < a0 ? 5 : t < a1 ? 6 : t < a2 ? 3 : 8;
    return r;
}

Outcome report_format() {
    using K = dsp::FeatureKind;
    // Deliberately out of order; the report sorts.
    const std::vector<eval::EvalRun> runs = {
        stub(K::bark_loudness, 10000, "bark_x15", 2096, 6071, 8478),
        stub(K::log_mel, 4096, "mel_x3", 695, 3846, 6302),
        stub(K::bark_loudness, 4096, "bark_x8", 2044, 5917, 8224),
        stub(K::log_mel, 10000, "mel_x5", 1135, 4255, 6838),
    };
    const std::string expected =
        "Seq Length | Temporal Resolution | Perceptual Feature |   Acc | Acc(±1) | Acc(±2)\n"
        "-----------|---------------------|--------------------|-------|---------|--------\n"
        "      4096 | 17.4 ms             | log-Mel            |  6.95 |   38.46 |   63.02\n"
        "     10000 | 29 ms               | log-Mel            | 11.35 |   42.55 |   68.38\n"
        "      4096 | 16 ms               | Bark               | 20.44 |   59.17 |   82.24\n"
        "     10000 | 30 ms               | Bark               | 20.96 |   60.71 |   84.78\n";
    const auto first = eval::build_report(runs).to_text();
    const auto second = eval::build_report(runs).to_text();
    const bool ok = first == expected && second == first;
    return {ok, ok ? "4 rows byte-identical to the expected table, stable across builds"
                   : "text differs from expected:\n" + first};
}

}  // namespace

int main() {
    std::printf("kernels: %s\n", std::string(simd::isa_name(simd::active_isa())).c_str());
    run("metric oracle", 5, metric_oracle);
    run("DTW oracle", 30, dtw_oracle);
    run("loudness reference", 10, loudness_reference);
    run("feature hop arithmetic", 1, hop_arithmetic);
    run("gradient check", 60, gradient_check);
    run("overfit", 300, overfit);
    run("end-to-end synthetic", 600, end_to_end);
    run("label propagation fixtures", 1, propagation_fixtures);
    run("report format", 1, report_format);
    std::printf("%d of 9 failed\n", g_failures);
    return g_failures ? 1 : 0;
}
