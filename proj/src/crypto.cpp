#include "fairtor/crypto.hpp"

#include <algorithm>
#include <cstring>

#include "fairtor/errors.hpp"

namespace fairtor {

Digest hash(ByteView label, ByteView data) {
    Sha256 ctx;
    Bytes prefix;
    put_u32(prefix, static_cast<std::uint32_t>(label.size()));
    ctx.update(view(prefix));
    ctx.update(label);
    ctx.update(data);
    return ctx.finish();
}

Bytes digest_bytes(const Digest& d) {
    return Bytes(d.begin(), d.end());
}

DhKeyPair dh_keygen(const GroupParams& pp, Rng& rng) {
    Scalar x = random_scalar(pp, rng);
    return {x, power(pp, generator(pp), x)};
}

GroupElement dh_shared(const GroupParams& pp, const Scalar& x, const GroupElement& Y) {
    if (!in_subgroup(pp, Y.v)) fail(ErrorCode::SubgroupError);
    return power(pp, Y, x);
}

DerivedKeys derive_keys(const GroupParams& pp, const GroupElement& shared,
                        ByteView transcript) {
    Bytes input = encode_element(pp, shared);
    input.insert(input.end(), transcript.begin(), transcript.end());
    DerivedKeys out;
    Digest k = hash(to_bytes("key"), view(input));
    std::memcpy(out.key.k.data(), k.data(), k.size());
    out.confirmation = hash(to_bytes("confirm"), view(input));
    return out;
}

namespace {

// Keystream block i = H("aead.stream", key || nonce || be64(i)).
void xor_stream(const SymmetricKey& k, const std::array<std::uint8_t, 16>& nonce,
                Bytes& data) {
    Bytes seed(k.k.begin(), k.k.end());
    seed.insert(seed.end(), nonce.begin(), nonce.end());
    std::uint64_t block = 0;
    for (std::size_t off = 0; off < data.size(); off += 32, ++block) {
        Bytes input = seed;
        put_u64(input, block);
        Digest ks = hash(to_bytes("aead.stream"), view(input));
        std::size_t n = std::min<std::size_t>(32, data.size() - off);
        for (std::size_t i = 0; i < n; ++i) data[off + i] ^= ks[i];
    }
}

Digest mac_tag(const SymmetricKey& k, const std::array<std::uint8_t, 16>& nonce,
               ByteView ciphertext) {
    Bytes input(k.k.begin(), k.k.end());
    input.insert(input.end(), nonce.begin(), nonce.end());
    input.insert(input.end(), ciphertext.begin(), ciphertext.end());
    return hash(to_bytes("aead.mac"), view(input));
}

Sealed seal_with_nonce(const SymmetricKey& k,
                       const std::array<std::uint8_t, 16>& nonce,
                       ByteView plaintext) {
    Sealed out;
    out.nonce = nonce;
    out.ciphertext.assign(plaintext.begin(), plaintext.end());
    xor_stream(k, nonce, out.ciphertext);
    out.tag = mac_tag(k, nonce, view(out.ciphertext));
    return out;
}

}  // namespace

Sealed seal(const SymmetricKey& k, ByteView plaintext, Rng& rng) {
    std::array<std::uint8_t, 16> nonce;
    rng.fill(nonce);
    return seal_with_nonce(k, nonce, plaintext);
}

Sealed seal_at_seq(const SymmetricKey& k, std::uint64_t seq, ByteView plaintext) {
    std::array<std::uint8_t, 16> nonce{};
    for (int i = 0; i < 8; ++i) {
        nonce[8 + i] = static_cast<std::uint8_t>(seq >> (56 - 8 * i));
    }
    return seal_with_nonce(k, nonce, plaintext);
}

Bytes open_sealed(const SymmetricKey& k, const Sealed& box) {
    Digest expect = mac_tag(k, box.nonce, view(box.ciphertext));
    if (expect != box.tag) fail(ErrorCode::AuthError);
    Bytes out = box.ciphertext;
    xor_stream(k, box.nonce, out);
    return out;
}

Bytes Sealed::encode() const {
    Encoder enc;
    enc.field(ByteView(nonce.data(), nonce.size()));
    enc.field(ciphertext);
    enc.field(ByteView(tag.data(), tag.size()));
    return enc.take();
}

Sealed Sealed::decode(ByteView wire) {
    Decoder dec(wire);
    Sealed out;
    Bytes n = dec.field();
    if (n.size() != out.nonce.size()) fail(ErrorCode::ParseError, "bad nonce");
    std::memcpy(out.nonce.data(), n.data(), n.size());
    out.ciphertext = dec.field();
    Bytes t = dec.field();
    if (t.size() != out.tag.size()) fail(ErrorCode::ParseError, "bad tag");
    std::memcpy(out.tag.data(), t.data(), t.size());
    dec.expect_done();
    return out;
}

HybridCiphertext hybrid_encrypt(const GroupParams& pp, const GroupElement& pk,
                                ByteView plaintext, Rng& rng) {
    if (!in_subgroup(pp, pk.v)) fail(ErrorCode::SubgroupError);
    DhKeyPair eph = dh_keygen(pp, rng);
    GroupElement shared = power(pp, pk, eph.secret);
    Bytes transcript = encode_element(pp, eph.share);
    Bytes pk_enc = encode_element(pp, pk);
    transcript.insert(transcript.end(), pk_enc.begin(), pk_enc.end());
    DerivedKeys keys = derive_keys(pp, shared, view(transcript));
    return {eph.share, seal(keys.key, plaintext, rng)};
}

Bytes hybrid_decrypt(const GroupParams& pp, const Scalar& sk,
                     const HybridCiphertext& ct) {
    if (!in_subgroup(pp, ct.eph_share.v)) fail(ErrorCode::SubgroupError);
    GroupElement shared = power(pp, ct.eph_share, sk);
    GroupElement pk = power(pp, generator(pp), sk);
    Bytes transcript = encode_element(pp, ct.eph_share);
    Bytes pk_enc = encode_element(pp, pk);
    transcript.insert(transcript.end(), pk_enc.begin(), pk_enc.end());
    DerivedKeys keys = derive_keys(pp, shared, view(transcript));
    return open_sealed(keys.key, ct.sealed);
}

Bytes HybridCiphertext::encode(const GroupParams& pp) const {
    Encoder enc;
    encode_element(enc, pp, eph_share);
    enc.field(sealed.encode());
    return enc.take();
}

HybridCiphertext HybridCiphertext::decode(const GroupParams& pp, ByteView wire) {
    Decoder dec(wire);
    HybridCiphertext out;
    out.eph_share = decode_element(pp, view(dec.field()));
    out.sealed = Sealed::decode(view(dec.field()));
    dec.expect_done();
    return out;
}

Commitment commit(const GroupParams& pp, const Scalar& m, const Scalar& r) {
    return {mul(pp, power(pp, generator(pp), m), power(pp, base_h(pp), r))};
}

Commitment commit_bytes(const GroupParams& pp, ByteView msg, const Scalar& r) {
    return commit(pp, hash_to_scalar(pp, to_bytes("commit.msg"), msg), r);
}

bool open_commit(const GroupParams& pp, const Commitment& c, const Scalar& m,
                 const Scalar& r) {
    return commit(pp, m, r) == c;
}

bool open_commit_bytes(const GroupParams& pp, const Commitment& c, ByteView msg,
                       const Scalar& r) {
    return commit_bytes(pp, msg, r) == c;
}

Bytes encode_commitment(const GroupParams& pp, const Commitment& c) {
    return encode_element(pp, c.c);
}

ElGamalCt elgamal_encrypt(const GroupParams& pp, const GroupElement& enc_base,
                          const GroupElement& pub, const GroupElement& msg,
                          const Scalar& rho) {
    return {power(pp, enc_base, rho), mul(pp, msg, power(pp, pub, rho))};
}

GroupElement elgamal_decrypt(const GroupParams& pp, const Scalar& secret,
                             const ElGamalCt& ct) {
    return div(pp, ct.c2, power(pp, ct.c1, secret));
}

DleqStatement EncEqStatement::to_dleq(const GroupParams& pp) const {
    return {enc_base, div(pp, a.c1, b.c1), pub, div(pp, a.c2, b.c2)};
}

namespace {

const char* kind_label(SigmaKind k) {
    switch (k) {
        case SigmaKind::Dlog: return "sigma.dlog";
        case SigmaKind::Dleq: return "sigma.dleq";
        case SigmaKind::EncEq: return "sigma.enceq";
    }
    return "sigma";
}

SigmaKind kind_of(const SigmaStatement& st) {
    if (std::holds_alternative<DlogStatement>(st)) return SigmaKind::Dlog;
    if (std::holds_alternative<DleqStatement>(st)) return SigmaKind::Dleq;
    return SigmaKind::EncEq;
}

void encode_statement(Encoder& enc, const GroupParams& pp, const SigmaStatement& st) {
    if (const auto* d = std::get_if<DlogStatement>(&st)) {
        encode_element(enc, pp, d->base);
        encode_element(enc, pp, d->value);
    } else if (const auto* d = std::get_if<DleqStatement>(&st)) {
        encode_element(enc, pp, d->base1);
        encode_element(enc, pp, d->value1);
        encode_element(enc, pp, d->base2);
        encode_element(enc, pp, d->value2);
    } else {
        const auto& e = std::get<EncEqStatement>(st);
        encode_element(enc, pp, e.enc_base);
        encode_element(enc, pp, e.pub);
        encode_element(enc, pp, e.a.c1);
        encode_element(enc, pp, e.a.c2);
        encode_element(enc, pp, e.b.c1);
        encode_element(enc, pp, e.b.c2);
    }
}

Scalar sigma_challenge(const GroupParams& pp, SigmaKind kind,
                       const SigmaStatement& st,
                       const std::vector<GroupElement>& commitments,
                       ByteView aux) {
    Encoder enc;
    encode_statement(enc, pp, st);
    for (const auto& c : commitments) encode_element(enc, pp, c);
    enc.field(aux);
    return hash_to_scalar(pp, to_bytes(kind_label(kind)), view(enc.bytes()));
}

// The DLEQ form covers all three kinds: DLOG is a single-base DLEQ, and
// ENC_EQ reduces to a DLEQ on ciphertext ratios.
std::vector<std::pair<GroupElement, GroupElement>> bases_and_values(
    const GroupParams& pp, const SigmaStatement& st) {
    if (const auto* d = std::get_if<DlogStatement>(&st)) {
        return {{d->base, d->value}};
    }
    DleqStatement dl = std::holds_alternative<DleqStatement>(st)
                           ? std::get<DleqStatement>(st)
                           : std::get<EncEqStatement>(st).to_dleq(pp);
    return {{dl.base1, dl.value1}, {dl.base2, dl.value2}};
}

}  // namespace

SigmaProof sigma_prove(const GroupParams& pp, const SigmaStatement& st,
                       const Scalar& witness, ByteView aux, Rng& rng) {
    auto pairs = bases_and_values(pp, st);
    for (const auto& [base, value] : pairs) {
        if (power(pp, base, witness) != value) fail(ErrorCode::WitnessMismatch);
    }
    SigmaProof proof;
    proof.kind = kind_of(st);
    Scalar nonce = random_scalar(pp, rng);
    for (const auto& pair : pairs) {
        proof.commitments.push_back(power(pp, pair.first, nonce));
    }
    proof.challenge = sigma_challenge(pp, proof.kind, st, proof.commitments, aux);
    // z = nonce + c*w mod q
    proof.responses.push_back(
        scalar_add(pp, nonce, scalar_mul(pp, proof.challenge, witness)));
    return proof;
}

bool sigma_verify(const GroupParams& pp, const SigmaStatement& st,
                  const SigmaProof& proof, ByteView aux) {
    if (proof.kind != kind_of(st)) return false;
    auto pairs = bases_and_values(pp, st);
    if (proof.commitments.size() != pairs.size()) return false;
    if (proof.responses.size() != 1) return false;
    Scalar expect = sigma_challenge(pp, proof.kind, st, proof.commitments, aux);
    if (!(expect == proof.challenge)) return false;
    const Scalar& z = proof.responses[0];
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        // base^z == commitment * value^c
        GroupElement lhs = power(pp, pairs[i].first, z);
        GroupElement rhs = mul(pp, proof.commitments[i],
                               power(pp, pairs[i].second, proof.challenge));
        if (!(lhs == rhs)) return false;
    }
    return true;
}

Bytes SigmaProof::encode(const GroupParams& pp) const {
    Encoder enc;
    enc.u64(static_cast<std::uint64_t>(kind));
    enc.u64(commitments.size());
    for (const auto& c : commitments) encode_element(enc, pp, c);
    encode_scalar(enc, pp, challenge);
    enc.u64(responses.size());
    for (const auto& r : responses) encode_scalar(enc, pp, r);
    return enc.take();
}

SigmaProof SigmaProof::decode(const GroupParams& pp, ByteView wire) {
    Decoder dec(wire);
    SigmaProof out;
    std::uint64_t kind = dec.u64();
    if (kind < 1 || kind > 3) fail(ErrorCode::ParseError, "bad sigma kind");
    out.kind = static_cast<SigmaKind>(kind);
    std::uint64_t nc = dec.u64();
    if (nc > 4) fail(ErrorCode::ParseError, "too many commitments");
    for (std::uint64_t i = 0; i < nc; ++i) {
        out.commitments.push_back(decode_element(pp, view(dec.field())));
    }
    out.challenge = decode_scalar(pp, view(dec.field()));
    std::uint64_t nr = dec.u64();
    if (nr > 4) fail(ErrorCode::ParseError, "too many responses");
    for (std::uint64_t i = 0; i < nr; ++i) {
        out.responses.push_back(decode_scalar(pp, view(dec.field())));
    }
    dec.expect_done();
    return out;
}

}  // namespace fairtor
