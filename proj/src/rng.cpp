#include "fairtor/rng.hpp"

#include "fairtor/sha256.hpp"

namespace fairtor {

void Rng::fill(std::span<std::uint8_t> out) {
    std::size_t i = 0;
    while (i < out.size()) {
        std::uint64_t w = gen_();
        for (int b = 7; b >= 0 && i < out.size(); --b) {
            out[i++] = static_cast<std::uint8_t>(w >> (8 * b));
        }
    }
}

Bytes Rng::bytes(std::size_t n) {
    Bytes out(n);
    fill(out);
    return out;
}

Rng Rng::fork(std::uint64_t lane) const {
    Bytes input = to_bytes("rng.fork");
    put_u64(input, seed_);
    put_u64(input, lane);
    Digest d = sha256(input);
    std::uint64_t child = 0;
    for (int i = 0; i < 8; ++i) child = child << 8 | d[i];
    return Rng(child);
}

}  // namespace fairtor
