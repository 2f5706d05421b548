#ifndef FAIRTOR_GROUP_HPP
#define FAIRTOR_GROUP_HPP

#include <gmpxx.h>

#include <cstdint>

#include "fairtor/bytes.hpp"
#include "fairtor/rng.hpp"
#include "fairtor/sha256.hpp"

namespace fairtor {

// Schnorr subgroup of prime order q inside Z_p^*, p = 2q + 1 a safe prime.
// g, h and the opener base are independent generators of the order-q
// subgroup; their pairwise discrete logs are unknown for the derived
// parameter sets (hash-to-group from a public seed).
struct GroupParams {
    mpz_class p;        // safe prime modulus
    mpz_class q;        // subgroup order, q = (p-1)/2
    mpz_class g;        // commitment message base
    mpz_class h;        // commitment randomness base / member tag base
    mpz_class opener_base;

    std::size_t element_width() const;  // fixed byte width of elements
    std::size_t scalar_width() const;   // fixed byte width of scalars

    static GroupParams tiny();   // p=23, q=11: brute-forceable test params
    static const GroupParams& desk();  // 512-bit safe prime
    static GroupParams generate(unsigned bits, Rng& rng);
    bool valid() const;
};

struct Scalar {
    mpz_class v;  // in [0, q)
    bool operator==(const Scalar&) const = default;
};

struct GroupElement {
    mpz_class v;  // in [1, p), order dividing q
    bool operator==(const GroupElement&) const = default;
};

bool in_subgroup(const GroupParams& pp, const mpz_class& v);

GroupElement power(const GroupParams& pp, const GroupElement& base, const Scalar& e);
GroupElement mul(const GroupParams& pp, const GroupElement& a, const GroupElement& b);
GroupElement div(const GroupParams& pp, const GroupElement& a, const GroupElement& b);
GroupElement inverse(const GroupParams& pp, const GroupElement& a);
GroupElement generator(const GroupParams& pp);        // g as an element
GroupElement base_h(const GroupParams& pp);
GroupElement base_opener(const GroupParams& pp);

Scalar scalar_from(const GroupParams& pp, const mpz_class& v);  // reduces mod q
Scalar scalar_add(const GroupParams& pp, const Scalar& a, const Scalar& b);
Scalar scalar_sub(const GroupParams& pp, const Scalar& a, const Scalar& b);
Scalar scalar_mul(const GroupParams& pp, const Scalar& a, const Scalar& b);
Scalar scalar_neg(const GroupParams& pp, const Scalar& a);

// Uniform in [1, q); never returns zero.
Scalar random_scalar(const GroupParams& pp, Rng& rng);
// Uniform in [0, bound) by byte rejection sampling.
mpz_class random_below(const mpz_class& bound, Rng& rng);

// Fixed-width big-endian integer bytes (no length prefix).
Bytes mpz_to_fixed(const mpz_class& v, std::size_t width);
mpz_class mpz_from_bytes(ByteView b);

// Length-prefixed canonical field encodings.
Bytes encode_element(const GroupParams& pp, const GroupElement& e);
Bytes encode_scalar(const GroupParams& pp, const Scalar& s);
void encode_element(Encoder& enc, const GroupParams& pp, const GroupElement& e);
void encode_scalar(Encoder& enc, const GroupParams& pp, const Scalar& s);
// Decode + subgroup membership check (SubgroupError on failure).
GroupElement decode_element(const GroupParams& pp, ByteView field_payload);
Scalar decode_scalar(const GroupParams& pp, ByteView field_payload);

// Canonical parameter serialization for key and directory files.
Bytes encode_params(const GroupParams& pp);
GroupParams decode_params(ByteView wire);  // ParseError if not a valid set

// Deterministic map to a subgroup element (cofactor squaring), never 1.
GroupElement hash_to_element(const GroupParams& pp, ByteView label, ByteView data);
// Digest interpreted big-endian, reduced mod q.
Scalar hash_to_scalar(const GroupParams& pp, ByteView label, ByteView data);

}  // namespace fairtor

#endif
