#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "fame/error.hpp"

// Little-endian binary readers/writers for the FAME* container formats.
// Multi-byte values are stored LE regardless of host order.

namespace fame {

namespace detail {

inline constexpr bool host_is_little_endian() {
    return std::endian::native == std::endian::little;
}

template <typename T>
inline T byteswap_if_needed(T v) {
    if constexpr (sizeof(T) == 1) return v;
    if (host_is_little_endian()) return v;
    unsigned char* p = reinterpret_cast<unsigned char*>(&v);
    for (size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
    return v;
}

}  // namespace detail

class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u32(uint32_t v) { put(detail::byteswap_if_needed(v)); }
    void i32(int32_t v) { put(detail::byteswap_if_needed(v)); }
    void f32(float v) { put_fp(v); }
    void f64(double v) { put_fp(v); }
    void bytes(std::span<const uint8_t> b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
    void magic(const char (&m)[9]) { buf_.insert(buf_.end(), m, m + 8); }

    const std::vector<uint8_t>& data() const { return buf_; }

private:
    template <typename T>
    void put(T v) {
        uint8_t tmp[sizeof(T)];
        std::memcpy(tmp, &v, sizeof(T));
        buf_.insert(buf_.end(), tmp, tmp + sizeof(T));
    }
    template <typename T>
    void put_fp(T v) {
        // IEEE-754 bit pattern, then LE byte order.
        static_assert(sizeof(T) == 4 || sizeof(T) == 8);
        if constexpr (sizeof(T) == 4) {
            uint32_t bits;
            std::memcpy(&bits, &v, 4);
            put(detail::byteswap_if_needed(bits));
        } else {
            uint64_t bits;
            std::memcpy(&bits, &v, 8);
            put(detail::byteswap_if_needed(bits));
        }
    }

    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(std::span<const uint8_t> data, std::string origin)
        : data_(data), origin_(std::move(origin)) {}

    size_t offset() const { return pos_; }
    size_t remaining() const { return data_.size() - pos_; }

    uint8_t u8() {
        need(1);
        return data_[pos_++];
    }
    uint32_t u32() { return detail::byteswap_if_needed(get<uint32_t>()); }
    int32_t i32() { return detail::byteswap_if_needed(get<int32_t>()); }
    float f32() {
        uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    double f64() {
        uint64_t bits = detail::byteswap_if_needed(get<uint64_t>());
        double v;
        std::memcpy(&v, &bits, 8);
        return v;
    }
    void expect_magic(const char (&m)[9]) {
        need(8);
        if (std::memcmp(data_.data() + pos_, m, 8) != 0)
            throw ParseError(origin_ + ": bad magic at byte offset " + std::to_string(pos_) +
                             ", expected \"" + std::string(m, 8) + "\"");
        pos_ += 8;
    }
    std::span<const uint8_t> bytes(size_t n) {
        need(n);
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    void expect_end() const {
        if (pos_ != data_.size())
            throw ParseError(origin_ + ": trailing bytes at offset " + std::to_string(pos_));
    }

private:
    template <typename T>
    T get() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void need(size_t n) const {
        if (pos_ + n > data_.size())
            throw ParseError(origin_ + ": truncated, need " + std::to_string(n) +
                             " bytes at byte offset " + std::to_string(pos_));
    }

    std::span<const uint8_t> data_;
    std::string origin_;
    size_t pos_ = 0;
};

std::vector<uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const uint8_t> data);
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace fame
