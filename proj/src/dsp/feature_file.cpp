#include "vocaldyn/dsp/feature_file.hpp"

#include "vocaldyn/error.hpp"
#include "vocaldyn/io.hpp"

namespace vocaldyn::dsp {

std::vector<std::uint8_t> encode_features(const FeatureMatrix& f) {
    if (f.values.size() != f.frames * f.bins) throw ShapeError("feature matrix size mismatch");
    io::ByteWriter w;
    w.str("DYNF");
    w.u32(kFeatureFileVersion);
    w.u8(static_cast<std::uint8_t>(f.kind));
    w.u32(static_cast<std::uint32_t>(f.frames));
    w.u32(static_cast<std::uint32_t>(f.bins));
    w.f64(f.hop_seconds);
    w.u32(static_cast<std::uint32_t>(f.source_sample_rate));
    for (float v : f.values) w.f32(v);
    return w.take();
}

FeatureMatrix decode_features(const std::vector<std::uint8_t>& bytes) {
    io::ByteReader r(bytes, "DYNF");
    if (r.str(4) != "DYNF") throw ParseError("DYNF: bad magic");
    const auto version = r.u32();
    if (version != kFeatureFileVersion) throw ParseError("DYNF: unsupported version " + std::to_string(version));
    const auto kind = r.u8();
    if (kind > 2) throw ParseError("DYNF: unknown kind " + std::to_string(kind));
    FeatureMatrix f;
    f.kind = static_cast<FeatureKind>(kind);
    f.frames = r.u32();
    f.bins = r.u32();
    f.hop_seconds = r.f64();
    f.source_sample_rate = static_cast<int>(r.u32());
    if (r.remaining() != f.frames * f.bins * 4) throw ParseError("DYNF: payload size does not match header");
    f.values.resize(f.frames * f.bins);
    for (auto& v : f.values) v = r.f32();
    return f;
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& features) {
    io::write_file_atomic(path, encode_features(features));
}

FeatureMatrix read_features(const std::filesystem::path& path) {
    return decode_features(io::read_file(path));
}

}  // namespace vocaldyn::dsp
