#include <doctest.h>

#include "helpers.hpp"
#include "vocaldyn/error.hpp"
#include "vocaldyn/io.hpp"

using namespace vocaldyn;

TEST_CASE("byte writer and reader round-trip little-endian values") {
    io::ByteWriter w;
    w.str("ABCD");
    w.u8(7);
    w.u16(0x1234);
    w.u32(0xdeadbeef);
    w.f32(1.5f);
    w.f64(-2.25);
    const auto& d = w.data();
    REQUIRE(d.size() == 4 + 1 + 2 + 4 + 4 + 8);
    CHECK(d[5] == 0x34);
    CHECK(d[6] == 0x12);
    CHECK(d[7] == 0xef);

    io::ByteReader r(d, "test");
    CHECK(r.str(4) == "ABCD");
    CHECK(r.u8() == 7);
    CHECK(r.u16() == 0x1234);
    CHECK(r.u32() == 0xdeadbeefu);
    CHECK(r.f32() == 1.5f);
    CHECK(r.f64() == -2.25);
    CHECK(r.remaining() == 0);
    CHECK_THROWS_AS(r.u8(), ParseError);
}

TEST_CASE("atomic write replaces content and leaves no temporaries") {
    testutil::TempDir dir;
    const auto p = dir / "sub/file.txt";
    io::write_file_atomic(p, std::string_view("one"));
    io::write_file_atomic(p, std::string_view("two"));
    CHECK(io::read_text_file(p) == "two");
    std::size_t n = 0;
    for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(p.parent_path())) ++n;
    CHECK(n == 1);
    CHECK_THROWS_AS(io::read_file(dir / "missing"), Error);
}
