#include "fairtor/group.hpp"

#include <stdexcept>

#include "fairtor/errors.hpp"

namespace fairtor {

namespace {

std::size_t bit_width(const mpz_class& v) {
    return mpz_sizeinbase(v.get_mpz_t(), 2);
}

std::size_t byte_width(const mpz_class& v) {
    return (bit_width(v) + 7) / 8;
}

mpz_class powm(const mpz_class& base, const mpz_class& e, const mpz_class& m) {
    mpz_class out;
    mpz_powm(out.get_mpz_t(), base.get_mpz_t(), e.get_mpz_t(), m.get_mpz_t());
    return out;
}

bool probab_prime(const mpz_class& v) {
    return mpz_probab_prime_p(v.get_mpz_t(), 30) > 0;
}

// Desk modulus: safe prime search upward from a value expanded out of the
// public seed strings "fairtor.group.v1"/"fairtor.group.v2".
const char* kDeskPrimeHex =
    "f3887a4dd985248ff0ae74a108608db23b30e9bedf36f7478f72397e8c07911b"
    "f88d74383cbb5a1c652e774651551e54bcaec5ae63dbe3ba81496ff67598c61f";

}  // namespace

std::size_t GroupParams::element_width() const { return byte_width(p); }
std::size_t GroupParams::scalar_width() const { return byte_width(q); }

bool GroupParams::valid() const {
    if (!probab_prime(p) || !probab_prime(q)) return false;
    if (p != 2 * q + 1) return false;
    for (const mpz_class& b : {g, h, opener_base}) {
        if (b <= 1 || b >= p) return false;
        if (powm(b, q, p) != 1) return false;
    }
    return true;
}

GroupParams GroupParams::tiny() {
    GroupParams pp;
    pp.p = 23;
    pp.q = 11;
    pp.g = 4;
    pp.h = 9;
    pp.opener_base = 2;
    return pp;
}

const GroupParams& GroupParams::desk() {
    static const GroupParams pp = [] {
        GroupParams out;
        out.p.set_str(kDeskPrimeHex, 16);
        out.q = (out.p - 1) / 2;
        out.g = hash_to_element(out, to_bytes("gen.g"), {}).v;
        out.h = hash_to_element(out, to_bytes("gen.h"), {}).v;
        out.opener_base = hash_to_element(out, to_bytes("gen.opener"), {}).v;
        return out;
    }();
    return pp;
}

GroupParams GroupParams::generate(unsigned bits, Rng& rng) {
    if (bits < 8) throw std::invalid_argument("modulus too small");
    mpz_class q = random_below(mpz_class(1) << (bits - 1), rng);
    mpz_setbit(q.get_mpz_t(), bits - 2);  // force width
    q |= 1;
    while (!(probab_prime(q) && probab_prime(2 * q + 1))) q += 2;
    GroupParams pp;
    pp.q = q;
    pp.p = 2 * q + 1;
    pp.g = hash_to_element(pp, to_bytes("gen.g"), {}).v;
    pp.h = hash_to_element(pp, to_bytes("gen.h"), {}).v;
    pp.opener_base = hash_to_element(pp, to_bytes("gen.opener"), {}).v;
    return pp;
}

bool in_subgroup(const GroupParams& pp, const mpz_class& v) {
    if (v < 1 || v >= pp.p) return false;
    return powm(v, pp.q, pp.p) == 1;
}

GroupElement power(const GroupParams& pp, const GroupElement& base, const Scalar& e) {
    return {powm(base.v, e.v, pp.p)};
}

GroupElement mul(const GroupParams& pp, const GroupElement& a, const GroupElement& b) {
    return {a.v * b.v % pp.p};
}

GroupElement inverse(const GroupParams& pp, const GroupElement& a) {
    mpz_class out;
    if (mpz_invert(out.get_mpz_t(), a.v.get_mpz_t(), pp.p.get_mpz_t()) == 0) {
        fail(ErrorCode::SubgroupError, "element not invertible");
    }
    return {out};
}

GroupElement div(const GroupParams& pp, const GroupElement& a, const GroupElement& b) {
    return mul(pp, a, inverse(pp, b));
}

GroupElement generator(const GroupParams& pp) { return {pp.g}; }
GroupElement base_h(const GroupParams& pp) { return {pp.h}; }
GroupElement base_opener(const GroupParams& pp) { return {pp.opener_base}; }

Scalar scalar_from(const GroupParams& pp, const mpz_class& v) {
    mpz_class r = v % pp.q;
    if (r < 0) r += pp.q;
    return {r};
}

Scalar scalar_add(const GroupParams& pp, const Scalar& a, const Scalar& b) {
    return scalar_from(pp, a.v + b.v);
}

Scalar scalar_sub(const GroupParams& pp, const Scalar& a, const Scalar& b) {
    return scalar_from(pp, a.v - b.v);
}

Scalar scalar_mul(const GroupParams& pp, const Scalar& a, const Scalar& b) {
    return scalar_from(pp, a.v * b.v);
}

Scalar scalar_neg(const GroupParams& pp, const Scalar& a) {
    return scalar_from(pp, -a.v);
}

mpz_class random_below(const mpz_class& bound, Rng& rng) {
    if (bound <= 0) throw std::invalid_argument("bound must be positive");
    std::size_t bits = bit_width(bound);
    std::size_t width = (bits + 7) / 8;
    unsigned top_mask = bits % 8 == 0 ? 0xff : (1u << (bits % 8)) - 1;
    for (;;) {
        Bytes buf = rng.bytes(width);
        buf[0] &= static_cast<std::uint8_t>(top_mask);
        mpz_class v = mpz_from_bytes(view(buf));
        if (v < bound) return v;
    }
}

Scalar random_scalar(const GroupParams& pp, Rng& rng) {
    for (;;) {
        mpz_class v = random_below(pp.q, rng);
        if (v != 0) return {v};
    }
}

Bytes mpz_to_fixed(const mpz_class& v, std::size_t width) {
    if (v < 0) throw std::invalid_argument("negative value");
    if (byte_width(v) > width) throw std::invalid_argument("value too wide");
    Bytes out(width, 0);
    std::size_t count = 0;
    mpz_export(out.data() + (width - byte_width(v)), &count, 1, 1, 1, 0,
               v.get_mpz_t());
    return out;
}

mpz_class mpz_from_bytes(ByteView b) {
    mpz_class v;
    if (!b.empty()) {
        mpz_import(v.get_mpz_t(), b.size(), 1, 1, 1, 0, b.data());
    }
    return v;
}

Bytes encode_element(const GroupParams& pp, const GroupElement& e) {
    Encoder enc;
    encode_element(enc, pp, e);
    return enc.take();
}

Bytes encode_scalar(const GroupParams& pp, const Scalar& s) {
    Encoder enc;
    encode_scalar(enc, pp, s);
    return enc.take();
}

void encode_element(Encoder& enc, const GroupParams& pp, const GroupElement& e) {
    enc.field(mpz_to_fixed(e.v, pp.element_width()));
}

void encode_scalar(Encoder& enc, const GroupParams& pp, const Scalar& s) {
    enc.field(mpz_to_fixed(s.v, pp.scalar_width()));
}

GroupElement decode_element(const GroupParams& pp, ByteView field_payload) {
    if (field_payload.size() != pp.element_width()) {
        fail(ErrorCode::ParseError, "element width mismatch");
    }
    mpz_class v = mpz_from_bytes(field_payload);
    if (!in_subgroup(pp, v)) fail(ErrorCode::SubgroupError);
    return {v};
}

Scalar decode_scalar(const GroupParams& pp, ByteView field_payload) {
    if (field_payload.size() != pp.scalar_width()) {
        fail(ErrorCode::ParseError, "scalar width mismatch");
    }
    mpz_class v = mpz_from_bytes(field_payload);
    if (v >= pp.q) fail(ErrorCode::ParseError, "scalar out of range");
    return {v};
}

Bytes encode_params(const GroupParams& pp) {
    Encoder enc;
    enc.field(mpz_to_fixed(pp.p, pp.element_width()));
    enc.field(mpz_to_fixed(pp.q, byte_width(pp.q)));
    enc.field(mpz_to_fixed(pp.g, pp.element_width()));
    enc.field(mpz_to_fixed(pp.h, pp.element_width()));
    enc.field(mpz_to_fixed(pp.opener_base, pp.element_width()));
    return enc.take();
}

GroupParams decode_params(ByteView wire) {
    Decoder dec(wire);
    GroupParams pp;
    pp.p = mpz_from_bytes(view(dec.field()));
    pp.q = mpz_from_bytes(view(dec.field()));
    pp.g = mpz_from_bytes(view(dec.field()));
    pp.h = mpz_from_bytes(view(dec.field()));
    pp.opener_base = mpz_from_bytes(view(dec.field()));
    dec.expect_done();
    if (!pp.valid()) fail(ErrorCode::ParseError, "invalid group parameters");
    return pp;
}

GroupElement hash_to_element(const GroupParams& pp, ByteView label, ByteView data) {
    // Expand to modulus width in counter mode, reduce mod p, square into
    // the order-q subgroup (cofactor 2), retry while the result is 1.
    std::size_t width = pp.element_width();
    for (std::uint64_t attempt = 0;; ++attempt) {
        Bytes material;
        std::uint64_t block = 0;
        while (material.size() < width) {
            Bytes input;
            put_u32(input, static_cast<std::uint32_t>(label.size()));
            input.insert(input.end(), label.begin(), label.end());
            put_u64(input, attempt);
            put_u64(input, block++);
            input.insert(input.end(), data.begin(), data.end());
            Digest d = sha256(view(input));
            material.insert(material.end(), d.begin(), d.end());
        }
        material.resize(width);
        mpz_class v = mpz_from_bytes(view(material)) % pp.p;
        mpz_class e = v * v % pp.p;
        if (e != 0 && e != 1) return {e};
    }
}

Scalar hash_to_scalar(const GroupParams& pp, ByteView label, ByteView data) {
    Bytes input;
    put_u32(input, static_cast<std::uint32_t>(label.size()));
    input.insert(input.end(), label.begin(), label.end());
    input.insert(input.end(), data.begin(), data.end());
    Digest d = sha256(view(input));
    return scalar_from(pp, mpz_from_bytes(ByteView(d.data(), d.size())));
}

}  // namespace fairtor
