#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <string_view>

#include "cok/errors.hpp"

namespace cok {

// Little-endian primitive encoding, independent of host byte order.

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xFF));
    out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline void put_f64(std::string& out, double v) {
    put_u64(out, std::bit_cast<std::uint64_t>(v));
}

inline void put_str(std::string& out, std::string_view s) {
    put_u32(out, static_cast<std::uint32_t>(s.size()));
    out.append(s);
}

// Cursor over an in-memory buffer; throws on truncation.
class ByteReader {
public:
    ByteReader(std::string_view bytes, std::string origin)
        : bytes_(bytes), origin_(std::move(origin)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

    std::uint16_t u16() {
        auto s = take(2);
        return static_cast<std::uint16_t>(byte(s, 0) | (byte(s, 1) << 8));
    }

    std::uint32_t u32() {
        auto s = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte(s, i)) << (8 * i);
        return v;
    }

    std::uint64_t u64() {
        auto s = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte(s, i)) << (8 * i);
        return v;
    }

    double f64() { return std::bit_cast<double>(u64()); }

    std::string str() {
        const std::uint32_t len = u32();
        return std::string(take(len));
    }

    std::string_view raw(std::size_t n) { return take(n); }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }
    bool done() const { return pos_ == bytes_.size(); }

private:
    static std::uint32_t byte(std::string_view s, int i) {
        return static_cast<unsigned char>(s[static_cast<std::size_t>(i)]);
    }

    std::string_view take(std::size_t n) {
        if (pos_ + n > bytes_.size()) {
            throw CorruptCheckpoint(origin_ + ": truncated (wanted " +
                                    std::to_string(n) + " bytes at offset " +
                                    std::to_string(pos_) + ")");
        }
        auto s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    std::string_view bytes_;
    std::string origin_;
    std::size_t pos_ = 0;
};

inline std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    return bytes;
}

inline void write_file_bytes(const std::string& path, std::string_view bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("short write to " + path);
}

}  // namespace cok
