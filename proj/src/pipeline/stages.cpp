#include "vocaldyn/pipeline/stages.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <ctime>
#include <map>
#include <memory>
#include <thread>

#include "vocaldyn/align/f0.hpp"
#include "vocaldyn/dsp/feature_file.hpp"
#include "vocaldyn/dsp/log_mel.hpp"
#include "vocaldyn/dsp/loudness.hpp"
#include "vocaldyn/dsp/spectral.hpp"
#include "vocaldyn/dsp/wav.hpp"
#include "vocaldyn/eval/metrics.hpp"
#include "vocaldyn/io.hpp"
#include "vocaldyn/label/labels.hpp"
#include "vocaldyn/score/musicxml.hpp"
#include "vocaldyn/score/score_json.hpp"

namespace vocaldyn::pipeline {
namespace fs = std::filesystem;
namespace {

// Position along the main path; rejected sits beside accepted.
int rank(Status s) {
    switch (s) {
        case Status::pending: return 0;
        case Status::features_done: return 1;
        case Status::aligned: return 2;
        case Status::accepted:
        case Status::rejected: return 3;
        case Status::labeled: return 4;
    }
    return 0;
}

fs::path require_file(const Manifest& m, const std::string& p, std::string_view what, const std::string& id) {
    if (p.empty()) throw MissingInputError("record '" + id + "' has no " + std::string(what));
    auto full = m.resolve(p);
    if (!fs::is_regular_file(full))
        throw MissingInputError("record '" + id + "': " + std::string(what) + " " + full.string() + " does not exist");
    return full;
}

fs::path require_artifact(const fs::path& dir, std::string_view name, const std::string& id) {
    auto p = dir / std::string(name);
    if (!fs::is_regular_file(p))
        throw MissingInputError("record '" + id + "' is missing artifact " + p.string() + "; run the earlier stage");
    return p;
}

score::ScoreDocument load_score(const Manifest& m, const PerformanceRecord& r) {
    const auto path = require_file(m, r.score_path, "score", r.id);
    if (path.extension() == ".json") return score::score_from_json(Json::parse(io::read_text_file(path)));
    score::MusicXmlOptions opt;
    if (const auto it = r.extra.find("part_roles"); it != r.extra.end() && it->is_string())
        opt.part_roles = score::parse_part_role_overrides(it->get<std::string>());
    return score::read_musicxml(path, opt);
}

dsp::AudioBuffer at_rate(const dsp::AudioBuffer& a, int rate) {
    return a.sample_rate() == rate ? a : dsp::resample(a, rate);
}

void write_json(const fs::path& p, const Json& j) { io::write_file_atomic(p, j.dump(2) + "\n"); }

std::vector<score::NoteDynamicLabel> note_labels(const score::ScoreDocument& s, const StageOptions& o) {
    score::PropagationOptions po;
    po.prefix = o.prefix;
    po.vocal_markings_only = o.vocal_markings_only;
    return score::propagate_note_dynamics(s, po);
}

void run_features(const Manifest& m, PerformanceRecord& r) {
    const auto stem = require_file(m, r.stem_path, "stem_path (separated vocals)", r.id);
    const auto audio = dsp::read_wav(stem);
    const auto dir = m.artifact_dir(r.id);
    fs::create_directories(dir);
    dsp::write_features(dir / std::string(artifact::kLogMel), dsp::log_mel(at_rate(audio, dsp::kLogMelSampleRate)));
    dsp::write_features(dir / std::string(artifact::kBark),
                        dsp::bark_specific_loudness(at_rate(audio, dsp::kLoudnessSampleRate)));
}

void run_align(const Manifest& m, PerformanceRecord& r, const StageOptions& o) {
    // Alignment works from audio, but labeling later needs both feature files.
    for (auto name : {artifact::kLogMel, artifact::kBark}) require_artifact(m.artifact_dir(r.id), name, r.id);
    const auto s = load_score(m, r);
    auto opt = o.align;
    if (o.align_to_stem) opt.vocal_only = true;
    const auto ref_path = o.align_to_stem ? require_file(m, r.stem_path, "stem_path", r.id)
                                          : require_file(m, r.audio_path, "audio_path", r.id);
    const auto alignment = align::align_score_to_audio(s, dsp::read_wav(ref_path), opt);

    align::F0Track f0;
    if (const auto it = r.extra.find("f0_path"); it != r.extra.end() && it->is_string()) {
        const auto p = require_file(m, it->get<std::string>(), "f0_path", r.id);
        f0 = align::ingest_f0_rows(align::parse_f0_csv(io::read_text_file(p)));
    } else {
        f0 = align::extract_f0(dsp::read_wav(require_file(m, r.stem_path, "stem_path", r.id)));
    }
    const double score = align::validate_alignment(alignment.notes, f0);

    const auto dir = m.artifact_dir(r.id);
    fs::create_directories(dir);
    write_json(dir / std::string(artifact::kAlignedNotes), align::to_json(alignment.notes));
    write_json(dir / std::string(artifact::kF0), align::to_json(f0));
    write_json(dir / std::string(artifact::kAlignment), {{"alignment_score", score},
                                                         {"reference", o.align_to_stem ? "stem" : "mix"},
                                                         {"grid_seconds", opt.grid_seconds},
                                                         {"path_length", alignment.path.steps.size()},
                                                         {"total_cost", alignment.path.total_cost}});
    r.alignment_score = score;
}

void run_label(const Manifest& m, PerformanceRecord& r, const StageOptions& o) {
    const auto dir = m.artifact_dir(r.id);
    const auto aligned =
        align::aligned_notes_from_json(Json::parse(io::read_text_file(require_artifact(dir, artifact::kAlignedNotes, r.id))));
    const auto labels = note_labels(load_score(m, r), o);
    write_json(dir / std::string(artifact::kNoteLabels), score::to_json(labels));
    std::map<dsp::FeatureKind, dsp::FeatureMatrix> base;
    base[dsp::FeatureKind::log_mel] = dsp::read_features(require_artifact(dir, artifact::kLogMel, r.id));
    base[dsp::FeatureKind::bark_loudness] = dsp::read_features(require_artifact(dir, artifact::kBark, r.id));
    for (const auto& c : kHopConfigs) {
        const auto feats = dsp::downsample_time(base.at(c.kind), c.factor);
        const auto frames = label::frames_for_features(aligned, labels, feats.hop_seconds, feats);
        dsp::write_features(dir / artifact::features(c), feats);
        label::write_labels(dir / artifact::labels(c), frames);
    }
}

}  // namespace

std::string_view stage_name(Stage s) {
    switch (s) {
        case Stage::features: return "features";
        case Stage::align: return "align";
        case Stage::label: return "label";
    }
    return "?";
}

std::optional<Stage> parse_stage(std::string_view name) {
    for (auto s : {Stage::features, Stage::align, Stage::label})
        if (stage_name(s) == name) return s;
    return std::nullopt;
}

const HopConfig& hop_config(std::string_view name) {
    for (const auto& c : kHopConfigs)
        if (c.name == name) return c;
    throw InvalidArgument("unknown feature configuration '" + std::string(name) +
                          "' (expected bark_x8, mel_x3, mel_x5 or bark_x15)");
}

double hop_seconds(const HopConfig& c) {
    const double base = c.kind == dsp::FeatureKind::log_mel
                            ? dsp::LogMelConfig{}.hop_seconds
                            : dsp::kLoudnessHopSeconds;
    return base * static_cast<double>(c.factor);
}

namespace artifact {
std::string features(const HopConfig& c) { return "features_" + std::string(c.name) + ".dynf"; }
std::string labels(const HopConfig& c) { return "labels_" + std::string(c.name) + ".dynl"; }
}  // namespace artifact

PerformanceRecord run_stage(const Manifest& m, const PerformanceRecord& record, Stage stage, const StageOptions& o) {
    PerformanceRecord r = record;
    const auto fail = [&](const std::string& why) {
        throw StatusError("cannot run " + std::string(stage_name(stage)) + " on record '" + r.id + "' with status " +
                          std::string(status_name(r.status)) + ": " + why);
    };
    if (r.status == Status::rejected) fail("rejected records are final");
    switch (stage) {
        case Stage::features:
            run_features(m, r);
            if (r.status == Status::pending) r.status = Status::features_done;
            break;
        case Stage::align:
            if (rank(r.status) < rank(Status::features_done)) fail("run features first");
            run_align(m, r, o);
            if (r.status == Status::features_done) r.status = Status::aligned;
            break;
        case Stage::label:
            if (r.status != Status::accepted && r.status != Status::labeled) fail("the record must be accepted first");
            run_label(m, r, o);
            r.status = Status::labeled;
            break;
    }
    return r;
}

std::vector<std::pair<std::string, std::string>> run_stage_all(Manifest& m, Stage stage, const StageOptions& o,
                                                               unsigned jobs) {
    const Status wanted = stage == Stage::features ? Status::pending
                          : stage == Stage::align  ? Status::features_done
                                                   : Status::accepted;
    std::vector<std::size_t> todo;
    for (std::size_t i = 0; i < m.records.size(); ++i)
        if (m.records[i].status == wanted) todo.push_back(i);

    std::mutex mu;  // guards m and failures
    std::vector<std::pair<std::string, std::string>> failures;
    std::atomic<std::size_t> next{0};
    const Manifest snapshot = m;
    auto worker = [&] {
        for (std::size_t k; (k = next++) < todo.size();) {
            const auto& rec = snapshot.records[todo[k]];
            try {
                auto updated = run_stage(snapshot, rec, stage, o);
                std::lock_guard lock(mu);
                m.records[todo[k]] = std::move(updated);
                if (!m.path().empty()) m.save();
            } catch (const std::exception& e) {
                std::lock_guard lock(mu);
                failures.emplace_back(rec.id, e.what());
            }
        }
    };
    jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(todo.size())));
    std::vector<std::thread> pool;
    for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    std::sort(failures.begin(), failures.end());
    return failures;
}

std::vector<std::pair<float, float>> waveform_envelope(std::span<const float> x, std::size_t width) {
    if (width == 0) throw InvalidArgument("envelope width must be positive");
    std::vector<std::pair<float, float>> out(width, {0.0f, 0.0f});
    if (x.empty()) return out;
    const std::size_t n = x.size();
    for (std::size_t b = 0; b < width; ++b) {
        const std::size_t lo = b * n / width;
        const std::size_t hi = std::max(lo + 1, (b + 1) * n / width);
        const auto [mn, mx] = std::minmax_element(x.begin() + lo, x.begin() + std::min(hi, n));
        out[b] = {*mn, *mx};
    }
    return out;
}

Json VisualizationBundle::to_json() const {
    Json f = Json::array(), n = Json::array(), e = Json::array(), g = Json::array(), w = Json::array();
    for (const auto& [t, hz] : f0) f.push_back({t, hz});
    for (const auto& r : notes)
        n.push_back({{"onset", r.onset}, {"offset", r.offset}, {"pitch", r.pitch}, {"pitch_hz", r.pitch_hz}});
    for (const auto& [lo, hi] : envelope) e.push_back({lo, hi});
    auto region = [](const DynamicsRegion& r) {
        return Json{{"start", r.start}, {"end", r.end}, {"category", std::string(score::category_name(r.category))}};
    };
    for (const auto& r : regions) g.push_back(region(r));
    for (const auto& r : wedges) w.push_back(region(r));
    Json j = {{"id", id}, {"duration", duration}};
    j["alignment_score"] = alignment_score ? Json(*alignment_score) : Json(nullptr);
    j["f0"] = f;
    j["notes"] = n;
    j["envelope"] = e;
    j["regions"] = g;
    j["wedges"] = w;
    return j;
}

VisualizationBundle build_visualization(const Manifest& m, const PerformanceRecord& r, std::size_t width,
                                        const StageOptions& o) {
    const auto dir = m.artifact_dir(r.id);
    const auto aligned =
        align::aligned_notes_from_json(Json::parse(io::read_text_file(require_artifact(dir, artifact::kAlignedNotes, r.id))));
    const auto f0 = align::f0_from_json(Json::parse(io::read_text_file(require_artifact(dir, artifact::kF0, r.id))));
    const auto wav = r.stem_path.empty() ? require_file(m, r.audio_path, "audio_path", r.id)
                                         : require_file(m, r.stem_path, "stem_path", r.id);
    const auto audio = dsp::read_wav(wav);

    VisualizationBundle b;
    b.id = r.id;
    b.duration = audio.duration_seconds();
    b.alignment_score = r.alignment_score;
    b.envelope = waveform_envelope(audio.samples(), width);
    for (std::size_t k = 0; k < f0.size(); ++k)
        if (f0.f0[k] > 0 && f0.time(k) <= b.duration) b.f0.emplace_back(f0.time(k), f0.f0[k]);

    std::vector<const align::AlignedNote*> order;
    for (const auto& a : aligned) order.push_back(&a);
    std::stable_sort(order.begin(), order.end(),
                     [](const auto* x, const auto* y) { return x->onset_seconds < y->onset_seconds; });
    for (const auto* a : order)
        b.notes.push_back({a->onset_seconds, std::min(a->offset_seconds, b.duration), a->note.pitch,
                           align::midi_to_hz(a->note.pitch)});

    std::map<std::size_t, const score::NoteDynamicLabel*> by_note;
    const auto labels = note_labels(load_score(m, r), o);
    for (const auto& l : labels) by_note[l.note_index] = &l;

    // Absolute dynamics hold until the next change, across rests.
    for (const auto* a : order) {
        const auto it = by_note.find(a->note_index);
        if (it == by_note.end() || !score::is_absolute(it->second->category)) continue;
        const auto cat = it->second->category;
        if (!b.regions.empty() && b.regions.back().category == cat) {
            b.regions.back().end = a->offset_seconds;
            continue;
        }
        if (!b.regions.empty()) b.regions.back().end = a->onset_seconds;
        b.regions.push_back({a->onset_seconds, a->offset_seconds, cat});
    }
    // Wedges cover the notes they flag.
    std::optional<score::WedgeRegion> open;
    for (const auto* a : order) {
        const auto it = by_note.find(a->note_index);
        const auto reg = it == by_note.end() ? std::nullopt : it->second->region;
        if (reg && open == reg) {
            b.wedges.back().end = a->offset_seconds;
        } else if (reg) {
            b.wedges.push_back({a->onset_seconds, a->offset_seconds,
                                *reg == score::WedgeRegion::crescendo ? score::DynamicCategory::crescendo
                                                                       : score::DynamicCategory::diminuendo});
        }
        open = reg;
    }
    for (auto* v : {&b.regions, &b.wedges})
        for (auto& g : *v) {
            g.start = std::min(g.start, b.duration);
            g.end = std::clamp(g.end, g.start, b.duration);
        }
    return b;
}

Status decision_status(std::string_view d) {
    if (d == "accept") return Status::accepted;
    if (d == "reject") return Status::rejected;
    throw InvalidArgument("decision must be 'accept' or 'reject', got '" + std::string(d) + "'");
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

PerformanceRecord record_decision(Manifest& m, std::string_view id, std::string_view decision, std::string note,
                                  std::string by) {
    const Status target = decision_status(decision);
    auto& rec = m.find(id);
    if (!transition_allowed(rec.status, target))
        throw StatusError("record '" + rec.id + "' is " + std::string(status_name(rec.status)) + "; only aligned records can be " +
                          (target == Status::accepted ? "accepted" : "rejected"));
    PerformanceRecord updated = rec;
    updated.status = target;
    updated.decision = Decision{std::move(by), utc_timestamp(), std::move(note)};
    // Save a copy first so a failed write leaves memory and disk agreeing.
    Manifest next = m;
    next.find(id) = updated;
    if (!m.path().empty()) next.save();
    rec = updated;
    return updated;
}

PerformanceRecord DecisionStore::record_decision(std::string_view id, std::string_view decision, std::string note,
                                                 std::string by) {
    std::lock_guard lock(mu_);
    return pipeline::record_decision(manifest_, id, decision, std::move(note), std::move(by));
}

std::vector<PerformanceRecord> DecisionStore::snapshot() const {
    std::lock_guard lock(mu_);
    return manifest_.records;
}

PerformanceRecord DecisionStore::get(std::string_view id) const {
    std::lock_guard lock(mu_);
    return manifest_.find(id);
}

Manifest DecisionStore::manifest() const {
    std::lock_guard lock(mu_);
    return manifest_;
}

Json export_dataset(const Manifest& m, const fs::path& out_dir) {
    std::vector<const PerformanceRecord*> labeled;
    for (const auto& r : m.records)
        if (r.status == Status::labeled) labeled.push_back(&r);
    if (labeled.empty()) throw InvalidArgument("no labeled records to export");

    fs::create_directories(out_dir);
    std::map<std::string_view, std::vector<label::FrameLabelSequence>> per_config;
    Json ids = Json::array();
    for (const auto* r : labeled) {
        const auto src = m.artifact_dir(r->id);
        const auto dst = out_dir / r->id;
        fs::create_directories(dst);
        for (const auto& c : kHopConfigs) {
            for (const auto& name : {artifact::features(c), artifact::labels(c)})
                fs::copy_file(require_artifact(src, name, r->id), dst / name, fs::copy_options::overwrite_existing);
            per_config[c.name].push_back(label::read_labels(dst / artifact::labels(c)));
        }
        ids.push_back(r->id);
    }
    Json configs = Json::object();
    for (const auto& c : kHopConfigs) {
        const auto& files = per_config[c.name];
        const auto counts = eval::class_frame_counts(files);
        const auto secs = eval::duration_statistics(files);
        Json frames = Json::object();
        double total = 0.0;
        for (std::size_t k = 0; k < counts.size(); ++k) {
            frames[std::string(score::category_name(label::class_to_category(static_cast<std::uint8_t>(k))))] = counts[k];
            total += secs[k];
        }
        configs[std::string(c.name)] = {{"hop_seconds", hop_seconds(c)},
                                        {"frames_per_class", frames},
                                        {"seconds_per_class", eval::durations_to_json(secs)},
                                        {"total_hours", total / 3600.0}};
    }
    Json summary = {{"performances", labeled.size()}, {"ids", ids}, {"configs", configs}};
    write_json(out_dir / "summary.json", summary);
    return summary;
}

}  // namespace vocaldyn::pipeline
