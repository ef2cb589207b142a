#include "vocaldyn/io.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <thread>

#include "vocaldyn/error.hpp"

namespace vocaldyn::io {

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open file: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
    static std::atomic<unsigned> counter{0};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000) +
           "." + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot write file: " + tmp.string());
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) throw Error("write failed: " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw Error("cannot replace " + path.string() + ": " + ec.message());
    }
}

void write_file_atomic(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    write_file_atomic(path, std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void ByteReader::bytes(void* out, std::size_t n) {
    if (n > size_ - pos_) throw ParseError(context_ + ": unexpected end of data");
    std::memcpy(out, data_ + pos_, n);
    pos_ += n;
}

std::string ByteReader::str(std::size_t n) {
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
}

void ByteReader::skip(std::size_t n) {
    if (n > size_ - pos_) throw ParseError(context_ + ": unexpected end of data");
    pos_ += n;
}

}  // namespace vocaldyn::io
