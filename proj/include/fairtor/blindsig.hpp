#ifndef FAIRTOR_BLINDSIG_HPP
#define FAIRTOR_BLINDSIG_HPP

#include <gmpxx.h>

#include <cstdint>
#include <map>
#include <vector>

#include "fairtor/crypto.hpp"
#include "fairtor/group.hpp"

namespace fairtor {

// Blind RSA-FDH over commitment encodings, keyed per epoch. Entry nodes sign
// blinded commitments during the entry handshake; the unblinded token is the
// exit ticket and expires with its epoch key.

inline constexpr unsigned kMinRsaBits = 1024;
inline constexpr unsigned kDefaultRsaBits = 1024;

// Minimal-width big-endian integer bytes; decode rejects leading zeros.
Bytes encode_mpz(const mpz_class& v);
mpz_class decode_mpz(ByteView payload);

struct EpochPublicKey {
    std::uint64_t epoch = 0;
    mpz_class n;
    mpz_class pub;
};

struct EpochSignerKeys {
    std::uint64_t epoch = 0;
    mpz_class n;
    mpz_class pub;
    mpz_class priv;
    std::uint64_t window = 1;  // accepted age of issued tokens, in epochs

    EpochPublicKey public_part() const { return {epoch, n, pub}; }
};

// Enforces the kMinRsaBits floor; toy moduli are assembled directly in tests.
EpochSignerKeys bgs_setup_epoch(std::uint64_t epoch, Rng& rng);
EpochSignerKeys bgs_setup_epoch(std::uint64_t epoch, unsigned bits, Rng& rng);

// Published key record, signed by the directory (Schnorr over the body).
struct EpochKeyRecord {
    EpochPublicKey key;
    SigmaProof directory_sig;

    Bytes encode(const GroupParams& pp) const;
    static EpochKeyRecord decode(const GroupParams& pp, ByteView wire);
};

EpochKeyRecord sign_epoch_record(const GroupParams& pp, const EpochPublicKey& key,
                                 const Scalar& directory_secret, Rng& rng);
bool verify_epoch_record(const GroupParams& pp, const EpochKeyRecord& rec,
                         const GroupElement& directory_pub);

// Verifier-side key set. Several keys may share an epoch when entry nodes
// use per-node keys instead of the shared entry-group key.
struct EpochKeyStore {
    std::map<std::uint64_t, std::vector<EpochPublicKey>> keys;

    // Errors: ProofInvalid if the directory signature does not verify.
    void add(const GroupParams& pp, const EpochKeyRecord& rec,
             const GroupElement& directory_pub);
    void add_unchecked(const EpochPublicKey& key);
    bool has(std::uint64_t epoch) const { return keys.count(epoch) != 0; }
    // Errors: UnknownEpoch.
    const std::vector<EpochPublicKey>& at(std::uint64_t epoch) const;
};

struct BlindingSecret {
    mpz_class r2;  // in [2, n), coprime with n
};

struct BlindResult {
    mpz_class beta;
    Digest pi{};  // digest binding beta to the handshake transcript
    BlindingSecret secret;
};

struct BlindToken {
    std::uint64_t epoch = 0;
    mpz_class sig;

    Bytes encode() const;
    static BlindToken decode(ByteView wire);
    bool operator==(const BlindToken&) const = default;
};

// Full-domain hash of the canonical commitment encoding, epoch-labelled,
// rejection-sampled below n.
mpz_class fdh_to_modulus(const EpochPublicKey& key, ByteView com_encoding);

// beta = fdh * r2^pub mod n; the pure arithmetic step of bgs_blind.
mpz_class blind_value(const EpochPublicKey& key, const mpz_class& fdh,
                      const mpz_class& r2);

BlindResult bgs_blind(const GroupParams& pp, const Commitment& com,
                      const EpochPublicKey& key, ByteView transcript, Rng& rng);
Digest bind_blinded(const EpochPublicKey& key, const mpz_class& beta,
                    ByteView transcript);

mpz_class bgs_sign_blinded(const mpz_class& beta, const EpochSignerKeys& sbk);

// Errors: NonInvertible if gcd(r2, n) != 1.
BlindToken bgs_unblind(const mpz_class& beta_tilde, const BlindingSecret& secret,
                       const EpochPublicKey& key);

enum class TokenCheck { Ok, Expired, BadSignature };

// Epoch window first, then the RSA-FDH equation against any key published
// for the token's epoch. Errors: UnknownEpoch.
TokenCheck bgs_check(const GroupParams& pp, const BlindToken& token,
                     const Commitment& com, const EpochKeyStore& store,
                     std::uint64_t current_epoch, std::uint64_t window);
bool bgs_verify(const GroupParams& pp, const BlindToken& token,
                const Commitment& com, const EpochKeyStore& store,
                std::uint64_t current_epoch, std::uint64_t window);

// The bare RSA-FDH equation against one key, no epoch policy.
bool token_matches_key(const GroupParams& pp, const EpochPublicKey& key,
                       const BlindToken& token, const Commitment& com);

}  // namespace fairtor

#endif
