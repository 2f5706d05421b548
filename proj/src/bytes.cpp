#include "fairtor/bytes.hpp"

#include "fairtor/errors.hpp"

namespace fairtor {

Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

std::string to_string(ByteView b) {
    return std::string(b.begin(), b.end());
}

std::string to_hex(ByteView b) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(b.size() * 2);
    for (std::uint8_t c : b) {
        out.push_back(digits[c >> 4]);
        out.push_back(digits[c & 0xf]);
    }
    return out;
}

static int hex_val(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    fail(ErrorCode::ParseError, "bad hex digit");
}

Bytes from_hex(std::string_view hex) {
    if (hex.size() % 2 != 0) fail(ErrorCode::ParseError, "odd hex length");
    Bytes out(hex.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = static_cast<std::uint8_t>(hex_val(hex[2 * i]) << 4 |
                                           hex_val(hex[2 * i + 1]));
    }
    return out;
}

void put_u32(Bytes& out, std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v >> 24));
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
}

void put_u64(Bytes& out, std::uint64_t v) {
    put_u32(out, static_cast<std::uint32_t>(v >> 32));
    put_u32(out, static_cast<std::uint32_t>(v));
}

std::uint64_t read_u64(ByteView b) {
    if (b.size() != 8) fail(ErrorCode::ParseError, "u64 field must be 8 bytes");
    std::uint64_t v = 0;
    for (std::uint8_t c : b) v = v << 8 | c;
    return v;
}

void Encoder::field(ByteView payload) {
    put_u32(buf_, static_cast<std::uint32_t>(payload.size()));
    buf_.insert(buf_.end(), payload.begin(), payload.end());
}

void Encoder::u64(std::uint64_t v) {
    Bytes b;
    put_u64(b, v);
    field(b);
}

Bytes Decoder::field() {
    if (in_.size() - pos_ < 4) fail(ErrorCode::ParseError, "truncated length");
    std::uint32_t len = 0;
    for (int i = 0; i < 4; ++i) len = len << 8 | in_[pos_ + i];
    pos_ += 4;
    if (in_.size() - pos_ < len) fail(ErrorCode::ParseError, "truncated field");
    Bytes out(in_.begin() + pos_, in_.begin() + pos_ + len);
    pos_ += len;
    return out;
}

std::uint64_t Decoder::u64() {
    return read_u64(view(field()));
}

void Decoder::expect_done() const {
    if (!done()) fail(ErrorCode::ParseError, "trailing bytes");
}

}  // namespace fairtor
