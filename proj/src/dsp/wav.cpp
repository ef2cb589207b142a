#include "vocaldyn/dsp/wav.hpp"

#include <algorithm>
#include <cmath>

#include "vocaldyn/error.hpp"
#include "vocaldyn/io.hpp"

namespace vocaldyn::dsp {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

struct Format {
    std::uint16_t tag = 0;
    std::uint16_t channels = 0;
    std::uint32_t rate = 0;
    std::uint16_t bits = 0;
};

float decode_sample(const std::uint8_t* p, const Format& fmt) {
    if (fmt.tag == kFormatFloat) {
        if (fmt.bits == 32) {
            float v;
            std::memcpy(&v, p, 4);
            return v;
        }
        double v;
        std::memcpy(&v, p, 8);
        return static_cast<float>(v);
    }
    switch (fmt.bits) {
        case 8: return (static_cast<int>(p[0]) - 128) / 128.0f;
        case 16: {
            const auto v = static_cast<std::int16_t>(p[0] | (p[1] << 8));
            return v / 32768.0f;
        }
        case 24: {
            std::int32_t v = p[0] | (p[1] << 8) | (p[2] << 16);
            if (v & 0x800000) v |= ~0xFFFFFF;
            return static_cast<float>(v / 8388608.0);
        }
        case 32: {
            const auto v = static_cast<std::int32_t>(static_cast<std::uint32_t>(p[0]) | (p[1] << 8) |
                                                     (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24));
            return static_cast<float>(v / 2147483648.0);
        }
    }
    throw ParseError("wav: unsupported bit depth " + std::to_string(fmt.bits));
}

}  // namespace

AudioBuffer decode_wav(const std::vector<std::uint8_t>& bytes) {
    io::ByteReader r(bytes, "wav");
    if (r.str(4) != "RIFF") throw ParseError("wav: missing RIFF header");
    r.u32();
    if (r.str(4) != "WAVE") throw ParseError("wav: missing WAVE tag");

    Format fmt;
    bool have_fmt = false;
    while (r.remaining() >= 8) {
        const std::string id = r.str(4);
        const std::uint32_t size = r.u32();
        if (id == "fmt ") {
            if (size < 16) throw ParseError("wav: short fmt chunk");
            fmt.tag = r.u16();
            fmt.channels = r.u16();
            fmt.rate = r.u32();
            r.u32();
            r.u16();
            fmt.bits = r.u16();
            std::size_t consumed = 16;
            if (fmt.tag == kFormatExtensible && size >= 40) {
                r.u16();
                r.u16();
                r.u32();
                fmt.tag = r.u16();  // first two bytes of the subformat GUID
                r.skip(14);
                consumed = 40;
            }
            r.skip(size - consumed + (size & 1));
            have_fmt = true;
        } else if (id == "data") {
            if (!have_fmt) throw ParseError("wav: data chunk before fmt chunk");
            if (fmt.tag != kFormatPcm && fmt.tag != kFormatFloat)
                throw ParseError("wav: unsupported encoding tag " + std::to_string(fmt.tag));
            if (fmt.channels == 0) throw ParseError("wav: zero channels");
            const std::size_t width = fmt.bits / 8;
            const std::size_t frame_bytes = width * fmt.channels;
            const std::size_t avail = std::min<std::size_t>(size, r.remaining());
            const std::size_t n = avail / frame_bytes;
            std::vector<std::uint8_t> raw(n * frame_bytes);
            r.bytes(raw.data(), raw.size());
            std::vector<float> mono(n);
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0;
                for (std::size_t c = 0; c < fmt.channels; ++c)
                    acc += decode_sample(raw.data() + i * frame_bytes + c * width, fmt);
                mono[i] = static_cast<float>(acc / fmt.channels);
            }
            return AudioBuffer(std::move(mono), static_cast<int>(fmt.rate));
        } else {
            r.skip(std::min<std::size_t>(size + (size & 1), r.remaining()));
        }
    }
    throw ParseError("wav: no data chunk");
}

AudioBuffer read_wav(const std::filesystem::path& path) {
    return decode_wav(io::read_file(path));
}

std::vector<std::uint8_t> encode_wav(const AudioBuffer& audio, WavEncoding encoding) {
    const std::uint16_t bits = encoding == WavEncoding::pcm16 ? 16 : encoding == WavEncoding::pcm24 ? 24 : 32;
    const std::uint16_t tag = encoding == WavEncoding::float32 ? kFormatFloat : kFormatPcm;
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(audio.size() * (bits / 8));

    io::ByteWriter w;
    w.str("RIFF");
    w.u32(36 + data_bytes);
    w.str("WAVE");
    w.str("fmt ");
    w.u32(16);
    w.u16(tag);
    w.u16(1);
    w.u32(static_cast<std::uint32_t>(audio.sample_rate()));
    w.u32(static_cast<std::uint32_t>(audio.sample_rate()) * (bits / 8));
    w.u16(bits / 8);
    w.u16(bits);
    w.str("data");
    w.u32(data_bytes);
    for (float s : audio.samples()) {
        const double c = std::clamp<double>(s, -1.0, 1.0);
        if (encoding == WavEncoding::float32) {
            w.f32(s);
        } else if (encoding == WavEncoding::pcm16) {
            w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(std::clamp(std::lround(c * 32768.0), -32768L, 32767L))));
        } else {
            const auto v = static_cast<std::int32_t>(std::clamp(std::lround(c * 8388608.0), -8388608L, 8388607L));
            w.u8(static_cast<std::uint8_t>(v & 0xFF));
            w.u8(static_cast<std::uint8_t>((v >> 8) & 0xFF));
            w.u8(static_cast<std::uint8_t>((v >> 16) & 0xFF));
        }
    }
    return w.take();
}

void write_wav(const std::filesystem::path& path, const AudioBuffer& audio, WavEncoding encoding) {
    io::write_file_atomic(path, encode_wav(audio, encoding));
}

}  // namespace vocaldyn::dsp
