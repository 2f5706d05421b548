#include "fairtor/blindsig.hpp"

#include <stdexcept>

#include "fairtor/errors.hpp"

namespace fairtor {

namespace {

std::size_t byte_width(const mpz_class& v) {
    return (mpz_sizeinbase(v.get_mpz_t(), 2) + 7) / 8;
}

mpz_class powm(const mpz_class& base, const mpz_class& e, const mpz_class& m) {
    mpz_class out;
    mpz_powm(out.get_mpz_t(), base.get_mpz_t(), e.get_mpz_t(), m.get_mpz_t());
    return out;
}

mpz_class random_prime(unsigned bits, Rng& rng) {
    mpz_class start = random_below(mpz_class(1) << (bits - 1), rng);
    mpz_setbit(start.get_mpz_t(), bits - 1);
    mpz_setbit(start.get_mpz_t(), bits - 2);  // keep the product full width
    mpz_class prime;
    mpz_nextprime(prime.get_mpz_t(), start.get_mpz_t());
    return prime;
}

Bytes record_body(const EpochPublicKey& key) {
    Encoder enc;
    enc.u64(key.epoch);
    enc.field(encode_mpz(key.n));
    enc.field(encode_mpz(key.pub));
    return enc.take();
}

}  // namespace

Bytes encode_mpz(const mpz_class& v) { return mpz_to_fixed(v, byte_width(v)); }

mpz_class decode_mpz(ByteView payload) {
    if (payload.empty()) fail(ErrorCode::ParseError, "empty integer");
    if (payload.size() > 1 && payload[0] == 0) {
        fail(ErrorCode::ParseError, "non-minimal integer");
    }
    return mpz_from_bytes(payload);
}

EpochSignerKeys bgs_setup_epoch(std::uint64_t epoch, Rng& rng) {
    return bgs_setup_epoch(epoch, kDefaultRsaBits, rng);
}

EpochSignerKeys bgs_setup_epoch(std::uint64_t epoch, unsigned bits, Rng& rng) {
    if (bits < kMinRsaBits) {
        throw std::invalid_argument("modulus below minimum width");
    }
    EpochSignerKeys keys;
    keys.epoch = epoch;
    keys.pub = 65537;
    for (;;) {
        mpz_class p = random_prime(bits / 2, rng);
        mpz_class q = random_prime(bits - bits / 2, rng);
        if (p == q) continue;
        mpz_class lambda;
        mpz_lcm(lambda.get_mpz_t(), mpz_class(p - 1).get_mpz_t(),
                mpz_class(q - 1).get_mpz_t());
        if (mpz_invert(keys.priv.get_mpz_t(), keys.pub.get_mpz_t(),
                       lambda.get_mpz_t()) == 0) {
            continue;
        }
        keys.n = p * q;
        return keys;
    }
}

Bytes EpochKeyRecord::encode(const GroupParams& pp) const {
    Encoder enc;
    enc.field(record_body(key));
    enc.field(directory_sig.encode(pp));
    return enc.take();
}

EpochKeyRecord EpochKeyRecord::decode(const GroupParams& pp, ByteView wire) {
    Decoder dec(wire);
    Bytes body = dec.field();
    EpochKeyRecord rec;
    Decoder body_dec(view(body));
    rec.key.epoch = body_dec.u64();
    rec.key.n = decode_mpz(view(body_dec.field()));
    rec.key.pub = decode_mpz(view(body_dec.field()));
    body_dec.expect_done();
    rec.directory_sig = SigmaProof::decode(pp, view(dec.field()));
    dec.expect_done();
    return rec;
}

EpochKeyRecord sign_epoch_record(const GroupParams& pp, const EpochPublicKey& key,
                                 const Scalar& directory_secret, Rng& rng) {
    EpochKeyRecord rec;
    rec.key = key;
    GroupElement dir_pub = power(pp, generator(pp), directory_secret);
    rec.directory_sig =
        sigma_prove(pp, DlogStatement{generator(pp), dir_pub}, directory_secret,
                    view(record_body(key)), rng);
    return rec;
}

bool verify_epoch_record(const GroupParams& pp, const EpochKeyRecord& rec,
                         const GroupElement& directory_pub) {
    return sigma_verify(pp, DlogStatement{generator(pp), directory_pub},
                        rec.directory_sig, view(record_body(rec.key)));
}

void EpochKeyStore::add(const GroupParams& pp, const EpochKeyRecord& rec,
                        const GroupElement& directory_pub) {
    if (!verify_epoch_record(pp, rec, directory_pub)) {
        fail(ErrorCode::ProofInvalid, "bad directory signature on epoch key");
    }
    add_unchecked(rec.key);
}

void EpochKeyStore::add_unchecked(const EpochPublicKey& key) {
    keys[key.epoch].push_back(key);
}

const std::vector<EpochPublicKey>& EpochKeyStore::at(std::uint64_t epoch) const {
    auto it = keys.find(epoch);
    if (it == keys.end()) fail(ErrorCode::UnknownEpoch);
    return it->second;
}

mpz_class fdh_to_modulus(const EpochPublicKey& key, ByteView com_encoding) {
    std::size_t width = byte_width(key.n);
    Bytes seed;
    put_u64(seed, key.epoch);
    seed.insert(seed.end(), com_encoding.begin(), com_encoding.end());
    for (std::uint64_t attempt = 0;; ++attempt) {
        Bytes material;
        std::uint64_t block = 0;
        while (material.size() < width) {
            Bytes input;
            put_u64(input, attempt);
            put_u64(input, block++);
            input.insert(input.end(), seed.begin(), seed.end());
            Digest d = hash(to_bytes("bgs.fdh"), view(input));
            material.insert(material.end(), d.begin(), d.end());
        }
        material.resize(width);
        mpz_class v = mpz_from_bytes(view(material));
        if (v < key.n) return v;
    }
}

mpz_class blind_value(const EpochPublicKey& key, const mpz_class& fdh,
                      const mpz_class& r2) {
    return fdh * powm(r2, key.pub, key.n) % key.n;
}

Digest bind_blinded(const EpochPublicKey& key, const mpz_class& beta,
                    ByteView transcript) {
    Encoder enc;
    enc.u64(key.epoch);
    enc.field(encode_mpz(beta));
    enc.field(transcript);
    return hash(to_bytes("bgs.bind"), view(enc.bytes()));
}

BlindResult bgs_blind(const GroupParams& pp, const Commitment& com,
                      const EpochPublicKey& key, ByteView transcript, Rng& rng) {
    mpz_class fdh = fdh_to_modulus(key, view(encode_commitment(pp, com)));
    BlindResult out;
    for (;;) {
        out.secret.r2 = random_below(key.n, rng);
        if (out.secret.r2 < 2) continue;
        mpz_class g;
        mpz_gcd(g.get_mpz_t(), out.secret.r2.get_mpz_t(), key.n.get_mpz_t());
        if (g == 1) break;
    }
    out.beta = blind_value(key, fdh, out.secret.r2);
    out.pi = bind_blinded(key, out.beta, transcript);
    return out;
}

mpz_class bgs_sign_blinded(const mpz_class& beta, const EpochSignerKeys& sbk) {
    return powm(beta, sbk.priv, sbk.n);
}

BlindToken bgs_unblind(const mpz_class& beta_tilde, const BlindingSecret& secret,
                       const EpochPublicKey& key) {
    mpz_class inv;
    if (mpz_invert(inv.get_mpz_t(), secret.r2.get_mpz_t(), key.n.get_mpz_t()) == 0) {
        fail(ErrorCode::NonInvertible);
    }
    return {key.epoch, beta_tilde * inv % key.n};
}

TokenCheck bgs_check(const GroupParams& pp, const BlindToken& token,
                     const Commitment& com, const EpochKeyStore& store,
                     std::uint64_t current_epoch, std::uint64_t window) {
    const auto& candidates = store.at(token.epoch);
    if (token.epoch > current_epoch || current_epoch - token.epoch > window) {
        return TokenCheck::Expired;
    }
    Bytes com_enc = encode_commitment(pp, com);
    for (const auto& key : candidates) {
        if (token.sig < 0 || token.sig >= key.n) continue;
        if (powm(token.sig, key.pub, key.n) == fdh_to_modulus(key, view(com_enc))) {
            return TokenCheck::Ok;
        }
    }
    return TokenCheck::BadSignature;
}

bool bgs_verify(const GroupParams& pp, const BlindToken& token,
                const Commitment& com, const EpochKeyStore& store,
                std::uint64_t current_epoch, std::uint64_t window) {
    return bgs_check(pp, token, com, store, current_epoch, window) ==
           TokenCheck::Ok;
}

bool token_matches_key(const GroupParams& pp, const EpochPublicKey& key,
                       const BlindToken& token, const Commitment& com) {
    if (token.epoch != key.epoch) return false;
    if (token.sig < 0 || token.sig >= key.n) return false;
    return powm(token.sig, key.pub, key.n) ==
           fdh_to_modulus(key, view(encode_commitment(pp, com)));
}

Bytes BlindToken::encode() const {
    Encoder enc;
    enc.u64(epoch);
    enc.field(encode_mpz(sig));
    return enc.take();
}

BlindToken BlindToken::decode(ByteView wire) {
    Decoder dec(wire);
    BlindToken out;
    out.epoch = dec.u64();
    out.sig = decode_mpz(view(dec.field()));
    dec.expect_done();
    return out;
}

}  // namespace fairtor
