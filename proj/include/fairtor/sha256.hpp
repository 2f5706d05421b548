#ifndef FAIRTOR_SHA256_HPP
#define FAIRTOR_SHA256_HPP

#include <array>
#include <cstdint>

#include "fairtor/bytes.hpp"

namespace fairtor {

using Digest = std::array<std::uint8_t, 32>;

class Sha256 {
public:
    Sha256();
    void update(ByteView data);
    Digest finish();

private:
    void compress(const std::uint8_t* block);
    std::array<std::uint32_t, 8> state_;
    std::array<std::uint8_t, 64> buf_;
    std::size_t buflen_ = 0;
    std::uint64_t total_ = 0;
};

Digest sha256(ByteView data);

}  // namespace fairtor

#endif
