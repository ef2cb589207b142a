#include <doctest.h>
#include <httplib.h>

#include <cmath>
#include <cstdlib>
#include <regex>
#include <thread>

#include "helpers.hpp"
#include "synth.hpp"
#include "vocaldyn/dsp/feature_file.hpp"
#include "vocaldyn/dsp/wav.hpp"
#include "vocaldyn/eval/metrics.hpp"
#include "vocaldyn/io.hpp"
#include "vocaldyn/label/labels.hpp"
#include "vocaldyn/pipeline/server.hpp"
#include "vocaldyn/score/musicxml.hpp"

using namespace vocaldyn;
using namespace vocaldyn::pipeline;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> bytes_of(const fs::path& p) { return io::read_file(p); }

// A data root with one short song (score, stem, mix) and a manifest of
// `count` records that all point at it.
struct Workspace {
    testutil::TempDir dir;
    fs::path manifest_path;

    explicit Workspace(std::size_t count = 5) {
        ::unsetenv("DYNAMICS_DATA_ROOT");
        ::unsetenv("VOCALDYN_DATA_ROOT");
        testing::FixtureScoreOptions so;
        so.measures = 4;
        auto s = testing::fixture_score(so);
        s.markings.push_back({score::DynamicCategory::crescendo, 4.0, score::PartRole::vocal, 8.0});
        io::write_file_atomic(dir / "song.musicxml", score::write_musicxml(s));
        const auto r = testing::render(s);
        dsp::write_wav(dir / "song_vocals.wav", r.stem);
        dsp::write_wav(dir / "song.wav", r.mix);

        Json arr = Json::array();
        for (std::size_t i = 0; i < count; ++i)
            arr.push_back({{"id", "rec" + std::to_string(i)},
                           {"score_path", "song.musicxml"},
                           {"audio_path", "song.wav"},
                           {"stem_path", "song_vocals.wav"},
                           {"status", "pending"}});
        manifest_path = dir / "manifest.json";
        io::write_file_atomic(manifest_path, arr.dump(2) + "\n");
    }

    Manifest load() const { return Manifest::load(manifest_path); }
};

// Runs features and align for the listed records and saves the manifest.
void prepare(Manifest& m, const std::vector<std::string>& ids) {
    for (const auto& id : ids) {
        auto& r = m.find(id);
        r = run_stage(m, r, Stage::features);
        r = run_stage(m, r, Stage::align);
    }
    m.save();
}

}  // namespace

TEST_CASE("manifest round-trip keeps unknown fields and layout") {
    const std::string text = R"([
  {
    "id": "schubert_d911_01",
    "performer": "someone",
    "score_path": "scores/d911_01.musicxml",
    "audio_path": "audio/d911_01.wav",
    "stem_path": "stems/d911_01.wav",
    "status": "aligned",
    "alignment_score": 0.93,
    "tags": [
      "winterreise",
      1
    ]
  },
  {
    "id": "b",
    "score_path": "s.musicxml",
    "audio_path": "a.wav",
    "status": "pending"
  }
]
)";
    const auto m = Manifest::parse(text);
    REQUIRE(m.records.size() == 2);
    CHECK(m.records[0].status == Status::aligned);
    CHECK(*m.records[0].alignment_score == 0.93);
    CHECK(m.records[1].stem_path.empty());
    CHECK(m.dump() == text);

    testutil::TempDir dir;
    m.save(dir / "m.json");
    CHECK(io::read_text_file(dir / "m.json") == text);
    CHECK(Manifest::load(dir / "m.json").dump() == text);
    CHECK(m.resolve("x.wav") == fs::path(".") / "x.wav");
    CHECK(Manifest::load(dir / "m.json").resolve("x.wav") == dir / "x.wav");
}

TEST_CASE("manifest errors") {
    try {
        Manifest::parse(R"([{"id":"a","score_path":"s","audio_path":"x","status":"pending"},
                            {"id":"a","score_path":"s","audio_path":"y","status":"pending"}])");
        FAIL("duplicate id accepted");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("'a'") != std::string::npos);
    }
    CHECK_THROWS_AS(Manifest::parse("{}"), ParseError);
    CHECK_THROWS_AS(Manifest::parse("[1]"), ParseError);
    CHECK_THROWS_AS(Manifest::parse("[{"), ParseError);
    CHECK_THROWS_AS(Manifest::parse(R"([{"id":"a","score_path":"s","audio_path":"x","status":"done"}])"), ParseError);
    CHECK_THROWS_AS(Manifest::parse(R"([{"id":"../a","score_path":"s","audio_path":"x","status":"pending"}])"),
                    ParseError);
    CHECK_THROWS_AS(Manifest::parse(R"([{"id":"a","audio_path":"x","status":"pending"}])"), ParseError);
    CHECK_THROWS_AS(Manifest::parse("[]").find("zz"), UnknownRecordError);
    CHECK_THROWS_AS(Manifest::parse("[]").save(), InvalidArgument);
}

TEST_CASE("status transitions") {
    using S = Status;
    const std::vector<std::pair<S, S>> allowed = {{S::pending, S::features_done},
                                                  {S::features_done, S::aligned},
                                                  {S::aligned, S::accepted},
                                                  {S::aligned, S::rejected},
                                                  {S::accepted, S::labeled}};
    const S all[] = {S::pending, S::features_done, S::aligned, S::accepted, S::rejected, S::labeled};
    for (S a : all) {
        CHECK(parse_status(status_name(a)) == a);
        for (S b : all) {
            const bool expect = std::find(allowed.begin(), allowed.end(), std::pair{a, b}) != allowed.end();
            CHECK(transition_allowed(a, b) == expect);
        }
    }
    CHECK_FALSE(parse_status("bogus"));
    CHECK(decision_status("accept") == S::accepted);
    CHECK(decision_status("reject") == S::rejected);
    CHECK_THROWS_AS(decision_status("maybe"), InvalidArgument);
    CHECK(std::regex_match(utc_timestamp(), std::regex(R"(\d{4}-\d\d-\d\dT\d\d:\d\d:\d\dZ)")));
}

TEST_CASE("hop configurations") {
    CHECK(hop_seconds(hop_config("bark_x8")) == doctest::Approx(0.016));
    CHECK(hop_seconds(hop_config("bark_x15")) == doctest::Approx(0.030));
    CHECK(eval::format_resolution(hop_seconds(hop_config("mel_x3"))) == "17.4 ms");
    CHECK(eval::format_resolution(hop_seconds(hop_config("mel_x5"))) == "29 ms");
    CHECK_THROWS_AS(hop_config("mel_x4"), InvalidArgument);
    CHECK(artifact::labels(hop_config("mel_x3")) == "labels_mel_x3.dynl");
}

TEST_CASE("stages run in order and are idempotent") {
    Workspace ws(1);
    auto m = ws.load();
    auto rec = m.find("rec0");
    const auto dir = m.artifact_dir("rec0");

    CHECK_THROWS_AS(run_stage(m, rec, Stage::align), StatusError);
    CHECK_THROWS_AS(run_stage(m, rec, Stage::label), StatusError);

    rec = run_stage(m, rec, Stage::features);
    CHECK(rec.status == Status::features_done);
    const auto mel = dsp::read_features(dir / std::string(artifact::kLogMel));
    const auto bark = dsp::read_features(dir / std::string(artifact::kBark));
    CHECK(mel.kind == dsp::FeatureKind::log_mel);
    CHECK(bark.kind == dsp::FeatureKind::bark_loudness);
    const auto before = bytes_of(dir / std::string(artifact::kBark));
    CHECK(run_stage(m, rec, Stage::features).status == Status::features_done);
    CHECK(bytes_of(dir / std::string(artifact::kBark)) == before);

    rec = run_stage(m, rec, Stage::align);
    CHECK(rec.status == Status::aligned);
    REQUIRE(rec.alignment_score);
    MESSAGE("alignment score " << *rec.alignment_score);
    CHECK(*rec.alignment_score >= 0.9);
    CHECK(fs::exists(dir / std::string(artifact::kAlignedNotes)));
    CHECK_THROWS_AS(run_stage(m, rec, Stage::label), StatusError);

    m.find("rec0") = rec;
    rec = record_decision(m, "rec0", "accept", "clean take");
    CHECK(rec.status == Status::accepted);
    CHECK(rec.decision->note == "clean take");

    rec = run_stage(m, rec, Stage::label);
    CHECK(rec.status == Status::labeled);
    for (const auto& c : kHopConfigs) {
        CAPTURE(c.name);
        const auto labels = label::read_labels(dir / artifact::labels(c));
        const auto feats = dsp::read_features(dir / artifact::features(c));
        CHECK(labels.size() == feats.frames);
        CHECK(labels.hop_seconds == doctest::Approx(hop_seconds(c)));
        CHECK(labels.masked_in_count() > labels.size() / 4);
    }
    const auto labels_before = bytes_of(dir / artifact::labels(kHopConfigs[0]));
    CHECK(run_stage(m, rec, Stage::label).status == Status::labeled);
    CHECK(bytes_of(dir / artifact::labels(kHopConfigs[0])) == labels_before);

    auto rejected = rec;
    rejected.status = Status::rejected;
    CHECK_THROWS_AS(run_stage(m, rejected, Stage::features), StatusError);
}

TEST_CASE("missing inputs are reported") {
    Workspace ws(2);
    auto m = ws.load();
    m.find("rec1").stem_path = "nowhere.wav";
    CHECK_THROWS_AS(run_stage(m, m.find("rec1"), Stage::features), MissingInputError);
    auto r = m.find("rec0");
    r.status = Status::features_done;  // claims features it does not have
    CHECK_THROWS_AS(run_stage(m, r, Stage::align), MissingInputError);

    const auto failures = run_stage_all(m, Stage::features);
    REQUIRE(failures.size() == 1);
    CHECK(failures[0].first == "rec1");
    CHECK(ws.load().find("rec0").status == Status::features_done);
    CHECK(ws.load().find("rec1").status == Status::pending);
}

TEST_CASE("visualization bundle") {
    Workspace ws(1);
    auto m = ws.load();
    prepare(m, {"rec0"});
    const auto b = build_visualization(m, m.find("rec0"), 300);
    CHECK(b.envelope.size() == 300);
    CHECK_FALSE(b.f0.empty());
    CHECK_FALSE(b.notes.empty());
    CHECK_FALSE(b.regions.empty());
    CHECK_FALSE(b.wedges.empty());
    for (const auto& n : b.notes) CHECK(n.pitch_hz == doctest::Approx(440.0 * std::pow(2.0, (n.pitch - 69) / 12.0)));
    for (std::size_t i = 1; i < b.regions.size(); ++i) CHECK(b.regions[i].start >= b.regions[i - 1].end - 1e-9);
    for (const auto& [lo, hi] : b.envelope) CHECK(lo <= hi);
    const auto j = b.to_json();
    CHECK(j["envelope"].size() == 300);
    CHECK(j["wedges"][0]["category"] == "crescendo");
    CHECK_THROWS_AS(build_visualization(m, m.find("rec0"), 0), InvalidArgument);

    const std::vector<float> x = {0, 1, -2, 3, 4, -5, 6};
    const auto env = waveform_envelope(x, 3);
    CHECK(env[0] == std::pair{0.0f, 1.0f});
    CHECK(env[1] == std::pair{-2.0f, 3.0f});
    CHECK(env[2] == std::pair{-5.0f, 6.0f});
    CHECK(waveform_envelope(x, 10).size() == 10);
}

TEST_CASE("concurrent decisions are serialized") {
    testutil::TempDir dir;
    Json arr = Json::array();
    for (int i = 0; i < 24; ++i)
        arr.push_back({{"id", "r" + std::to_string(i)}, {"score_path", "s"}, {"audio_path", "a"}, {"status", "aligned"}});
    io::write_file_atomic(dir / "m.json", arr.dump());
    DecisionStore store(Manifest::load(dir / "m.json"));
    std::atomic<int> contested_ok{0}, contested_conflict{0};
    std::vector<std::thread> threads;
    for (int t = 0; t < 4; ++t)
        threads.emplace_back([&, t] {
            for (int i = 1 + t; i < 24; i += 4) store.record_decision("r" + std::to_string(i), i % 2 ? "accept" : "reject", "");
            try {
                store.record_decision("r0", "accept", "", "t" + std::to_string(t));
                ++contested_ok;
            } catch (const StatusError&) {
                ++contested_conflict;
            }
        });
    for (auto& th : threads) th.join();
    CHECK(contested_ok == 1);
    CHECK(contested_conflict == 3);
    const auto saved = Manifest::load(dir / "m.json");
    for (int i = 1; i < 24; ++i)
        CHECK(saved.find("r" + std::to_string(i)).status == (i % 2 ? Status::accepted : Status::rejected));
    CHECK(saved.find("r0").status == Status::accepted);
    CHECK(saved.dump() == store.manifest().dump());
}

TEST_CASE("dataset export") {
    Workspace ws(5);
    auto m = ws.load();
    prepare(m, {"rec1", "rec3"});
    for (const auto& id : {"rec1", "rec3"}) {
        record_decision(m, id, "accept", "");
        m.find(id) = run_stage(m, m.find(id), Stage::label);
    }
    m.save();
    testutil::TempDir out;
    const auto summary = export_dataset(m, out.path());
    CHECK(summary["performances"] == 2);
    CHECK(summary["ids"] == Json::array({"rec1", "rec3"}));
    CHECK(Json::parse(io::read_text_file(out / "summary.json")) == summary);
    for (const auto& c : kHopConfigs) {
        std::vector<label::FrameLabelSequence> files;
        for (const auto& id : {"rec1", "rec3"}) {
            CHECK(fs::exists(out.path() / id / artifact::features(c)));
            files.push_back(label::read_labels(out.path() / id / artifact::labels(c)));
        }
        const auto secs = eval::duration_statistics(files);
        double total = 0;
        for (double s : secs) total += s;
        const auto& cj = summary["configs"][std::string(c.name)];
        CHECK(cj["total_hours"].get<double>() == doctest::Approx(total / 3600.0));
        CHECK(cj["seconds_per_class"]["mf"].get<double>() == doctest::Approx(secs[5]));
    }
    CHECK_FALSE(fs::exists(out.path() / "rec0"));
    CHECK_THROWS_AS(export_dataset(Manifest::parse("[]"), out.path()), InvalidArgument);
}

TEST_CASE("review HTTP API") {
    Workspace ws(3);
    {
        auto m = ws.load();
        prepare(m, {"rec0", "rec1"});
    }
    ReviewServer server(ws.load());
    const int port = server.bind("127.0.0.1", 0);
    std::thread serving([&] { server.serve(); });
    server.wait_until_ready();
    httplib::Client cli("127.0.0.1", port);

    auto res = cli.Get("/api/performances");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto list = Json::parse(res->body);
    CHECK(list.size() == 3);
    CHECK(list[0]["status"] == "aligned");

    res = cli.Post("/api/performances/rec0/decision", R"({"decision":"accept","note":"good","by":"ana"})",
                   "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    res = cli.Get("/api/performances/rec0");
    REQUIRE(res);
    const auto rec = Json::parse(res->body);
    CHECK(rec["status"] == "accepted");
    CHECK(rec["decision"]["by"] == "ana");
    CHECK(ws.load().find("rec0").status == Status::accepted);

    res = cli.Post("/api/performances/rec0/decision", R"({"decision":"reject"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 409);
    CHECK(Json::parse(res->body).contains("error"));

    res = cli.Get("/api/performances/ghost");
    REQUIRE(res);
    CHECK(res->status == 404);
    res = cli.Post("/api/performances/ghost/decision", R"({"decision":"accept"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 404);

    for (const char* body : {"not json", R"({"decision":3})", R"({"decision":"maybe"})", R"([1])",
                             R"({"decision":"accept","note":5})"}) {
        CAPTURE(body);
        res = cli.Post("/api/performances/rec1/decision", body, "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
    }
    CHECK(ws.load().find("rec1").status == Status::aligned);

    res = cli.Get("/api/performances/rec1/visualization?width=50");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto vis = Json::parse(res->body);
    CHECK(vis["envelope"].size() == 50);
    CHECK_FALSE(vis["notes"].empty());
    res = cli.Get("/api/performances/rec1/visualization?width=abc");
    REQUIRE(res);
    CHECK(res->status == 400);
    res = cli.Get("/api/performances/rec2/visualization");
    REQUIRE(res);
    CHECK(res->status == 409);  // not aligned yet, artifacts missing

    res = cli.Get("/api/performances/rec1/audio");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body.substr(0, 4) == "RIFF");

    server.stop();
    serving.join();
}

TEST_CASE("bind address parsing") {
    CHECK(parse_bind_address("127.0.0.1:8080") == std::pair<std::string, int>{"127.0.0.1", 8080});
    CHECK(parse_bind_address("[::1]:0").second == 0);
    CHECK_THROWS_AS(parse_bind_address("localhost"), InvalidArgument);
    CHECK_THROWS_AS(parse_bind_address(":80"), InvalidArgument);
    CHECK_THROWS_AS(parse_bind_address("h:99999"), InvalidArgument);
    CHECK_THROWS_AS(parse_bind_address("h:8x"), InvalidArgument);
}
