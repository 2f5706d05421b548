#ifndef FAIRTOR_RNG_HPP
#define FAIRTOR_RNG_HPP

#include <cstdint>
#include <random>
#include <span>

#include "fairtor/bytes.hpp"

namespace fairtor {

// Deterministic, portable randomness. mt19937_64 output is fully specified
// by the standard, and all consumers sample through fixed byte-level
// procedures (no std distributions), so a seed reproduces bit-identical
// traces on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }
    void fill(std::span<std::uint8_t> out);
    Bytes bytes(std::size_t n);

    // Independent child stream; deterministic in (this rng's seed, lane).
    Rng fork(std::uint64_t lane) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

}  // namespace fairtor

#endif
