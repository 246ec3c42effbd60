#pragma once

// Little-endian binary encoding helpers and the CRC32 used by file footers.

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include <zlib.h>

#include "vapo/common.hpp"

namespace vapo::binary {

inline std::uint32_t crc32(const unsigned char* data, std::size_t n, std::uint32_t seed = 0) {
    uLong crc = seed;
    while (n > 0) {
        const uInt chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = ::crc32(crc, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

inline std::uint32_t crc32(const std::string& bytes) {
    return crc32(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size());
}

template <class T>
    requires std::is_arithmetic_v<T>
void put(std::string& buf, T v) {
    if constexpr (std::is_same_v<T, double>) {
        put(buf, std::bit_cast<std::uint64_t>(v));
    } else {
        using U = std::make_unsigned_t<T>;
        auto u = static_cast<U>(v);
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            buf.push_back(static_cast<char>(u & 0xFF));
            u = static_cast<U>(u >> 8);
        }
    }
}

/// Sequential reader over an in-memory byte buffer. Running past the end is
/// reported as truncation.
class Reader {
  public:
    Reader(const std::string& bytes, std::string what) : bytes_(bytes), what_(std::move(what)) {}

    template <class T>
        requires std::is_arithmetic_v<T>
    T get() {
        if constexpr (std::is_same_v<T, double>) {
            return std::bit_cast<double>(get<std::uint64_t>());
        } else {
            require(sizeof(T));
            using U = std::make_unsigned_t<T>;
            U u = 0;
            for (std::size_t i = 0; i < sizeof(T); ++i) {
                u = static_cast<U>(u | (static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i)));
            }
            pos_ += sizeof(T);
            return static_cast<T>(u);
        }
    }

    std::string take(std::size_t n) {
        require(n);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }

    void require(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw FormatError(what_ + ": truncated file");
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

  private:
    const std::string& bytes_;
    std::string what_;
    std::size_t pos_ = 0;
};

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open '" + path + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw FormatError("write failed for '" + path + "'");
}

}  // namespace vapo::binary
