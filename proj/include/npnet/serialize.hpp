#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "npnet/common.hpp"
#include "npnet/matrix.hpp"

namespace npnet {

/// Little-endian binary writer used by the checkpoint container. All integers
/// are fixed-width LE; doubles are IEEE-754 bit patterns.
class BinWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
    }
    void i64(std::int64_t v) { u64(static_cast<std::uint64_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void str(const std::string& s) {
        u64(s.size());
        buf_.insert(buf_.end(), s.begin(), s.end());
    }
    void f64_vec(std::span<const double> v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    void u64_vec(std::span<const std::uint64_t> v) {
        u64(v.size());
        for (std::uint64_t x : v) u64(x);
    }
    void matrix(const Matrix& m) {
        u64(m.rows());
        u64(m.cols());
        for (double x : m.flat()) f64(x);
    }

    const std::vector<char>& bytes() const { return buf_; }

private:
    std::vector<char> buf_;
};

class BinReader {
public:
    explicit BinReader(std::span<const char> data) : data_(data) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
    std::uint32_t u32() {
        auto b = take(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }
    std::uint64_t u64() {
        auto b = take(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(b[i])) << (8 * i);
        return v;
    }
    std::int64_t i64() { return static_cast<std::int64_t>(u64()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string str() {
        const std::uint64_t n = u64();
        auto b = take(n);
        return std::string(b.begin(), b.end());
    }
    std::vector<double> f64_vec() {
        const std::uint64_t n = u64();
        std::vector<double> v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    std::vector<std::uint64_t> u64_vec() {
        const std::uint64_t n = u64();
        std::vector<std::uint64_t> v(n);
        for (auto& x : v) x = u64();
        return v;
    }
    Matrix matrix() {
        const std::uint64_t r = u64();
        const std::uint64_t c = u64();
        Matrix m(r, c);
        for (double& x : m.flat()) x = f64();
        return m;
    }

    std::size_t offset() const { return pos_; }
    bool exhausted() const { return pos_ == data_.size(); }

private:
    std::span<const char> take(std::size_t n) {
        if (pos_ + n > data_.size())
            throw Error("binary read past end at offset " + std::to_string(pos_));
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::span<const char> data_;
    std::size_t pos_ = 0;
};

} // namespace npnet
