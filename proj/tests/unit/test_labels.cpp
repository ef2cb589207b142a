#include <doctest.h>

#include <random>

#include "helpers.hpp"
#include "vocaldyn/label/labels.hpp"

using namespace vocaldyn;
using namespace vocaldyn::label;
using C = score::DynamicCategory;

namespace {

struct Fixture {
    std::vector<align::AlignedNote> aligned;
    std::vector<score::NoteDynamicLabel> labels;

    void add(double on, double off, std::optional<C> cat) {
        align::AlignedNote a;
        a.note_index = aligned.size();
        a.onset_seconds = on;
        a.offset_seconds = off;
        if (cat) {
            score::NoteDynamicLabel l;
            l.note_index = a.note_index;
            l.category = *cat;
            labels.push_back(l);
        }
        aligned.push_back(a);
    }
    FrameLabelSequence frames(double hop, std::size_t n) const { return frames_from_alignment(aligned, labels, hop, n); }
};

std::vector<std::uint8_t> repeat(std::uint8_t v, std::size_t n) { return std::vector<std::uint8_t>(n, v); }

std::vector<std::uint8_t> concat(std::initializer_list<std::vector<std::uint8_t>> parts) {
    std::vector<std::uint8_t> out;
    for (const auto& p : parts) out.insert(out.end(), p.begin(), p.end());
    return out;
}

}  // namespace

TEST_CASE("class mapping") {
    CHECK(category_to_class(C::pppp) == 0);
    CHECK(category_to_class(C::mf) == 5);
    CHECK(category_to_class(C::ffff) == 9);
    for (std::uint8_t k = 0; k < kNumClasses; ++k) CHECK(category_to_class(class_to_category(k)) == k);
    CHECK_THROWS_AS(category_to_class(C::sf), UnresolvedCategoryError);
    CHECK_THROWS_AS(category_to_class(C::crescendo), UnresolvedCategoryError);
    CHECK_THROWS_AS(category_to_class(C::diminuendo), UnresolvedCategoryError);
}

TEST_CASE("frame labels from aligned notes") {
    SUBCASE("one note") {
        Fixture f;
        f.add(0.0, 1.0, C::p);
        const auto l = f.frames(0.1, 15);
        CHECK(l.classes == concat({repeat(3, 10), repeat(kMaskedClass, 5)}));
        CHECK(l.masked_in_count() == 10);
    }
    SUBCASE("no notes") {
        const auto l = Fixture{}.frames(0.1, 7);
        CHECK(l.classes == repeat(kMaskedClass, 7));
    }
    SUBCASE("abutting notes") {
        Fixture f;
        f.add(0.0, 0.5, C::p);
        f.add(0.5, 1.0, C::f);
        CHECK(f.frames(0.1, 10).classes == concat({repeat(3, 5), repeat(6, 5)}));
    }
    SUBCASE("later onset wins an overlap") {
        Fixture f;
        f.add(0.0, 1.0, C::pp);
        f.add(0.3, 0.6, C::ff);
        CHECK(f.frames(0.1, 10).classes == concat({repeat(2, 3), repeat(7, 3), repeat(2, 4)}));
    }
    SUBCASE("sf notes and unlabeled notes are masked") {
        Fixture f;
        f.add(0.0, 0.2, C::mp);
        f.add(0.2, 0.4, C::sf);
        f.add(0.4, 0.6, std::nullopt);
        f.add(0.6, 0.8, C::mp);
        CHECK(f.frames(0.1, 8).classes ==
              std::vector<std::uint8_t>{4, 4, kMaskedClass, kMaskedClass, kMaskedClass, kMaskedClass, 4, 4});
    }
    SUBCASE("wedge flags are carried") {
        Fixture f;
        f.add(0.0, 0.2, C::p);
        f.labels.back().region = score::WedgeRegion::crescendo;
        const auto l = f.frames(0.1, 3);
        CHECK(l.regions == std::vector<RegionFlag>{RegionFlag::crescendo, RegionFlag::crescendo, RegionFlag::none});
    }
}

TEST_CASE("frame label properties") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> len(0.05, 0.8), gap(0.0, 0.3);
    for (int trial = 0; trial < 30; ++trial) {
        Fixture f;
        double t = gap(rng);
        for (int i = 0; i < 15; ++i) {
            const double d = len(rng);
            f.add(t, t + d, static_cast<C>(rng() % 11));
            t += d + gap(rng);
        }
        const double hop = 0.016;
        const std::size_t n = static_cast<std::size_t>(t / hop) + 20;
        const auto l = f.frames(hop, n);
        REQUIRE(l.size() == n);
        REQUIRE(l.regions.size() == n);
        // Notes do not overlap here, so each frame is decided by a direct search.
        for (std::size_t k = 0; k < n; ++k) {
            const double c = static_cast<double>(k) * hop;
            std::uint8_t expect = kMaskedClass;
            for (std::size_t i = 0; i < f.aligned.size(); ++i)
                if (f.aligned[i].onset_seconds <= c && c < f.aligned[i].offset_seconds)
                    expect = score::is_absolute(f.labels[i].category) ? category_to_class(f.labels[i].category)
                                                                      : kMaskedClass;
            CHECK(l.classes[k] == expect);
        }
    }
}

TEST_CASE("hop checks") {
    CHECK_NOTHROW(check_hop(0.016, 0.016 + 1e-12));
    CHECK_THROWS_AS(check_hop(0.016, 0.0174), HopMismatchError);
    dsp::FeatureMatrix feats(dsp::FeatureKind::bark_loudness, 12, 240, 0.016, 48000);
    Fixture f;
    f.add(0.0, 0.1, C::mf);
    CHECK(frames_for_features(f.aligned, f.labels, 0.016, feats).size() == 12);
    CHECK_THROWS_AS(frames_for_features(f.aligned, f.labels, 0.03, feats), HopMismatchError);
}

TEST_CASE("DYNL round-trip and JSON") {
    Fixture f;
    f.add(0.0, 0.3, C::ppp);
    f.add(0.5, 0.7, C::fff);
    const auto l = f.frames(0.1, 9);
    const auto bytes = encode_labels(l);
    CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DYNL");
    CHECK(bytes.size() == 4 + 4 + 4 + 8 + 9);
    const auto back = decode_labels(bytes);
    CHECK(back.classes == l.classes);
    CHECK(back.hop_seconds == l.hop_seconds);

    testutil::TempDir dir;
    write_labels(dir / "a.dynl", l);
    CHECK(read_labels(dir / "a.dynl").classes == l.classes);

    auto bad = bytes;
    bad.pop_back();
    CHECK_THROWS_AS(decode_labels(bad), ParseError);
    bad = bytes;
    bad.back() = 10;
    CHECK_THROWS_AS(decode_labels(bad), ParseError);

    const auto j = to_json(l);
    CHECK(j["classes"][0] == 1);
    CHECK(j["classes"][4].is_null());
    CHECK(j["categories"][5] == "fff");
}
