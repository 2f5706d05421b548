#ifndef FAIRTOR_BYTES_HPP
#define FAIRTOR_BYTES_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace fairtor {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline ByteView view(const Bytes& b) { return ByteView(b.data(), b.size()); }
Bytes to_bytes(std::string_view s);
std::string to_string(ByteView b);
std::string to_hex(ByteView b);
Bytes from_hex(std::string_view hex);

void put_u32(Bytes& out, std::uint32_t v);
void put_u64(Bytes& out, std::uint64_t v);
std::uint64_t read_u64(ByteView b);

// Canonical encoding: every field is a big-endian 4-byte length prefix
// followed by the payload; composite types are ordered field concatenation.
class Encoder {
public:
    void field(ByteView payload);
    void field(const Bytes& payload) { field(view(payload)); }
    void u64(std::uint64_t v);
    const Bytes& bytes() const { return buf_; }
    Bytes take() { return std::move(buf_); }

private:
    Bytes buf_;
};

class Decoder {
public:
    explicit Decoder(ByteView in) : in_(in) {}
    Bytes field();                    // throws ParseError on truncation
    std::uint64_t u64();              // field that must be exactly 8 bytes
    bool done() const { return pos_ == in_.size(); }
    void expect_done() const;         // throws ParseError on trailing bytes

private:
    ByteView in_;
    std::size_t pos_ = 0;
};

}  // namespace fairtor

#endif
