#include <doctest.h>

#include "helpers.hpp"
#include "vocaldyn/io.hpp"
#include "vocaldyn/score/musicxml.hpp"

using namespace vocaldyn;
using namespace vocaldyn::score;
using C = DynamicCategory;

namespace {

std::string wrap(const std::string& measures, const std::string& divisions = "1") {
    return R"(<?xml version="1.0"?>
<score-partwise version="3.1">
  <part-list><score-part id="P1"><part-name>Voice</part-name></score-part></part-list>
  <part id="P1">
    <measure number="1">
      <attributes><divisions>)" +
           divisions + R"(</divisions></attributes>
)" + measures +
           R"(    </measure>
  </part>
</score-partwise>
)";
}

}  // namespace

TEST_CASE("single quarter note with a dynamic") {
    const auto s = parse_musicxml(wrap(R"(
      <direction><direction-type><dynamics><p/></dynamics></direction-type></direction>
      <note><pitch><step>C</step><octave>4</octave></pitch><duration>1</duration><type>quarter</type></note>
)"));
    REQUIRE(s.parts.size() == 1);
    REQUIRE(s.parts[0].notes.size() == 1);
    CHECK(s.parts[0].role == PartRole::vocal);
    CHECK(s.parts[0].notes[0].pitch == 60);
    CHECK(s.parts[0].notes[0].duration == 1.0);
    REQUIRE(s.markings.size() == 1);
    CHECK(s.markings[0].category == C::p);
}

TEST_CASE("tied half notes merge") {
    const auto s = parse_musicxml(wrap(R"(
      <note><pitch><step>E</step><octave>4</octave></pitch><duration>4</duration><tie type="start"/><type>half</type></note>
      <note><pitch><step>E</step><octave>4</octave></pitch><duration>4</duration><tie type="stop"/><type>half</type></note>
)", "2"));
    REQUIRE(s.parts[0].notes.size() == 1);
    CHECK(s.parts[0].notes[0].pitch == 64);
    CHECK(s.parts[0].notes[0].duration == 4.0);
}

TEST_CASE("notes that are skipped") {
    const auto s = parse_musicxml(wrap(R"(
      <note><grace/><pitch><step>D</step><octave>4</octave></pitch><type>eighth</type></note>
      <note><rest/><duration>1</duration></note>
      <note><pitch><step>F</step><alter>1</alter><octave>4</octave></pitch><duration>1</duration></note>
      <note><chord/><pitch><step>A</step><octave>4</octave></pitch><duration>1</duration></note>
      <note><unpitched><display-step>B</display-step><display-octave>4</display-octave></unpitched><duration>1</duration></note>
)"));
    // Rest and grace dropped, vocal chord reduced to its top note.
    REQUIRE(s.parts[0].notes.size() == 1);
    CHECK(s.parts[0].notes[0].pitch == 69);
    CHECK(s.parts[0].notes[0].onset == 1.0);
}

TEST_CASE("hand-built Lieder fixture") {
    const auto s = read_musicxml(testutil::fixture("lied.musicxml"));
    CHECK(s.metadata.title == "Abendlied");
    CHECK(s.metadata.composer == "Test Composer");
    CHECK(s.metadata.catalogue_id == "Op. 1 No. 2");
    REQUIRE(s.tempo_hint.has_value());
    CHECK(*s.tempo_hint == 72.0);
    REQUIRE(s.parts.size() == 3);
    CHECK(s.parts[0].role == PartRole::vocal);
    CHECK(s.parts[1].role == PartRole::piano_lh);
    CHECK(s.parts[2].role == PartRole::piano_rh);
    CHECK(s.measure_starts == std::vector<double>{0, 4, 8, 12});

    const auto& v = s.parts[0].notes;
    const std::vector<std::pair<int, std::pair<double, double>>> expect = {
        {72, {0, 1}}, {74, {1, 1}}, {76, {2, 2}}, {77, {4, 1}}, {79, {5, 1}}, {81, {6, 2}}, {79, {8, 4}}, {81, {12, 2}}};
    REQUIRE(v.size() == expect.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        CHECK(v[i].pitch == expect[i].first);
        CHECK(v[i].onset == expect[i].second.first);
        CHECK(v[i].duration == expect[i].second.second);
    }
    CHECK(v[6].measure == 3);
    CHECK(s.parts[1].notes.size() == 4);
    CHECK(s.parts[2].notes.size() == 12);

    REQUIRE(s.markings.size() == 4);
    CHECK(s.markings[0].category == C::p);
    CHECK(s.markings[1].category == C::crescendo);
    // The wedge opens at measure 2 and closes at the start of measure 4.
    CHECK(s.markings[1].offset == 4.0);
    CHECK(s.markings[1].span_end - s.markings[1].offset == s.measure_starts[3] - s.measure_starts[1]);
    CHECK(s.markings[2].category == C::mf);
    CHECK(s.markings[2].part == PartRole::piano_lh);
    CHECK(s.markings[3].category == C::f);
    CHECK(s.markings[3].offset == 12.0);
    CHECK(score_passes_filter(s));

    const auto labels = propagate_note_dynamics(s);
    std::vector<C> cats;
    for (const auto& l : labels) cats.push_back(l.category);
    CHECK(cats == std::vector<C>{C::p, C::p, C::p, C::p, C::p, C::p, C::mf, C::f});
    CHECK(labels[3].region == WedgeRegion::crescendo);
    CHECK(labels[6].region == WedgeRegion::crescendo);
    CHECK_FALSE(labels[7].region.has_value());
}

TEST_CASE("part role overrides") {
    MusicXmlOptions o;
    o.part_roles = parse_part_role_overrides("P1=ignore, P2=piano");
    const auto s = read_musicxml(testutil::fixture("lied.musicxml"), o);
    CHECK(s.find_part(PartRole::vocal) == nullptr);
    CHECK(s.find_part(PartRole::piano_rh) != nullptr);
    CHECK_THROWS_AS(parse_part_role_overrides("P1"), InvalidArgument);
    CHECK_THROWS_AS(parse_part_role_overrides("P1=tuba"), InvalidArgument);
}

TEST_CASE("write then parse reproduces the document") {
    const auto s = read_musicxml(testutil::fixture("lied.musicxml"));
    const auto text = write_musicxml(s);
    const auto back = parse_musicxml(text);
    CHECK(back.parts == s.parts);
    CHECK(back.markings == s.markings);
    CHECK(back.metadata == s.metadata);
    CHECK(back.tempo_hint == s.tempo_hint);
    CHECK(back == s);
    CHECK(write_musicxml(back) == text);
}

TEST_CASE("MusicXML errors") {
    SUBCASE("malformed XML reports its line") {
        try {
            parse_musicxml("<score-partwise>\n<part id=\"P1\">\n<measure>\n</part>\n</score-partwise>\n");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 4);
        }
    }
    SUBCASE("bad pitch step") {
        try {
            parse_musicxml(wrap("\n\n<note><pitch><step>H</step><octave>4</octave></pitch><duration>1</duration></note>\n"));
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 9);
        }
    }
    SUBCASE("no parts") {
        CHECK_THROWS_AS(parse_musicxml("<score-partwise><part-list/></score-partwise>"), EmptyScoreError);
    }
    SUBCASE("unsupported layouts") {
        CHECK_THROWS_AS(parse_musicxml("<score-timewise/>"), ParseError);
        CHECK_THROWS_AS(parse_musicxml("<html/>"), ParseError);
        testutil::TempDir dir;
        io::write_file_atomic(dir / "x.mxl", std::string_view("PK"));
        CHECK_THROWS_AS(read_musicxml(dir / "x.mxl"), InvalidArgument);
    }
}
