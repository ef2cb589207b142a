#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vocaldyn::io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
std::string read_text_file(const std::filesystem::path& path);

/// Writes to a sibling temporary file and renames it over `path`, so readers
/// observe either the old or the new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// Little-endian append-only byte writer.
class ByteWriter {
public:
    void bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        buf_.insert(buf_.end(), p, p + n);
    }
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u16(std::uint16_t v) { le(v); }
    void u32(std::uint32_t v) { le(v); }
    void f32(float v) { le(v); }
    void f64(double v) { le(v); }
    void str(std::string_view s) { bytes(s.data(), s.size()); }
    const std::vector<std::uint8_t>& data() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
    template <class T>
    void le(T v) {
        std::uint8_t raw[sizeof(T)];
        std::memcpy(raw, &v, sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
        bytes(raw, sizeof(T));
    }
    std::vector<std::uint8_t> buf_;
};

/// Little-endian bounds-checked reader; throws ParseError on truncation.
class ByteReader {
public:
    ByteReader(const std::uint8_t* data, std::size_t size, std::string context)
        : data_(data), size_(size), context_(std::move(context)) {}
    explicit ByteReader(const std::vector<std::uint8_t>& v, std::string context)
        : ByteReader(v.data(), v.size(), std::move(context)) {}

    void bytes(void* out, std::size_t n);
    std::string str(std::size_t n);
    std::uint8_t u8() { return le<std::uint8_t>(); }
    std::uint16_t u16() { return le<std::uint16_t>(); }
    std::uint32_t u32() { return le<std::uint32_t>(); }
    float f32() { return le<float>(); }
    double f64() { return le<double>(); }
    std::size_t remaining() const { return size_ - pos_; }
    std::size_t position() const { return pos_; }
    void skip(std::size_t n);

private:
    template <class T>
    T le() {
        std::uint8_t raw[sizeof(T)];
        bytes(raw, sizeof(T));
        if constexpr (std::endian::native == std::endian::big)
            for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(raw[i], raw[sizeof(T) - 1 - i]);
        T v;
        std::memcpy(&v, raw, sizeof(T));
        return v;
    }
    const std::uint8_t* data_;
    std::size_t size_;
    std::size_t pos_ = 0;
    std::string context_;
};

}  // namespace vocaldyn::io
