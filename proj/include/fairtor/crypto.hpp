#ifndef FAIRTOR_CRYPTO_HPP
#define FAIRTOR_CRYPTO_HPP

#include <array>
#include <cstdint>
#include <variant>
#include <vector>

#include "fairtor/bytes.hpp"
#include "fairtor/group.hpp"
#include "fairtor/rng.hpp"
#include "fairtor/sha256.hpp"

namespace fairtor {

// Domain-separated hash: SHA-256 over be32(len(label)) || label || data.
Digest hash(ByteView label, ByteView data);
Bytes digest_bytes(const Digest& d);

struct DhKeyPair {
    Scalar secret;
    GroupElement share;
};

DhKeyPair dh_keygen(const GroupParams& pp, Rng& rng);
// K = Y^x; SubgroupError if Y is outside the order-q subgroup.
GroupElement dh_shared(const GroupParams& pp, const Scalar& x, const GroupElement& Y);

struct SymmetricKey {
    std::array<std::uint8_t, 32> k{};
    bool operator==(const SymmetricKey&) const = default;
};

struct DerivedKeys {
    SymmetricKey key;
    Digest confirmation;
};

DerivedKeys derive_keys(const GroupParams& pp, const GroupElement& shared,
                        ByteView transcript);

// nonce || ciphertext || tag, encrypt-then-MAC over a hash-derived stream.
struct Sealed {
    std::array<std::uint8_t, 16> nonce{};
    Bytes ciphertext;
    Digest tag{};

    Bytes encode() const;
    static Sealed decode(ByteView wire);
    bool operator==(const Sealed&) const = default;
};

Sealed seal(const SymmetricKey& k, ByteView plaintext, Rng& rng);
// Deterministic nonce from a sequence number; safe when the key is unique
// to the stream and sequence numbers never repeat.
Sealed seal_at_seq(const SymmetricKey& k, std::uint64_t seq, ByteView plaintext);
Bytes open_sealed(const SymmetricKey& k, const Sealed& box);  // AuthError

struct HybridCiphertext {
    GroupElement eph_share;
    Sealed sealed;

    Bytes encode(const GroupParams& pp) const;
    static HybridCiphertext decode(const GroupParams& pp, ByteView wire);
};

HybridCiphertext hybrid_encrypt(const GroupParams& pp, const GroupElement& pk,
                                ByteView plaintext, Rng& rng);
Bytes hybrid_decrypt(const GroupParams& pp, const Scalar& sk,
                     const HybridCiphertext& ct);

struct Commitment {
    GroupElement c;
    bool operator==(const Commitment&) const = default;
};

// Pedersen: c = g^m h^r mod p.
Commitment commit(const GroupParams& pp, const Scalar& m, const Scalar& r);
Commitment commit_bytes(const GroupParams& pp, ByteView msg, const Scalar& r);
bool open_commit(const GroupParams& pp, const Commitment& c, const Scalar& m,
                 const Scalar& r);
bool open_commit_bytes(const GroupParams& pp, const Commitment& c, ByteView msg,
                       const Scalar& r);
Bytes encode_commitment(const GroupParams& pp, const Commitment& c);

// ---------------------------------------------------------------------------
// Fiat-Shamir sigma protocols
// ---------------------------------------------------------------------------

struct ElGamalCt {
    GroupElement c1, c2;
    bool operator==(const ElGamalCt&) const = default;
};

ElGamalCt elgamal_encrypt(const GroupParams& pp, const GroupElement& enc_base,
                          const GroupElement& pub, const GroupElement& msg,
                          const Scalar& rho);
GroupElement elgamal_decrypt(const GroupParams& pp, const Scalar& secret,
                             const ElGamalCt& ct);

// know x with value = base^x
struct DlogStatement {
    GroupElement base, value;
};

// know w with value1 = base1^w and value2 = base2^w (Chaum-Pedersen)
struct DleqStatement {
    GroupElement base1, value1, base2, value2;
};

// two ciphertexts under (enc_base, pub) encrypt the same plaintext;
// reduced to a DLEQ on the component-wise ratio, witness rho_a - rho_b
struct EncEqStatement {
    GroupElement enc_base, pub;
    ElGamalCt a, b;

    DleqStatement to_dleq(const GroupParams& pp) const;
};

using SigmaStatement = std::variant<DlogStatement, DleqStatement, EncEqStatement>;

enum class SigmaKind : std::uint8_t { Dlog = 1, Dleq = 2, EncEq = 3 };

struct SigmaProof {
    SigmaKind kind;
    std::vector<GroupElement> commitments;
    Scalar challenge;
    std::vector<Scalar> responses;

    Bytes encode(const GroupParams& pp) const;
    static SigmaProof decode(const GroupParams& pp, ByteView wire);
};

// aux is folded into the challenge hash; it binds the proof to caller
// context (a signed message, a puzzle, ...). WitnessMismatch if the witness
// does not satisfy the statement.
SigmaProof sigma_prove(const GroupParams& pp, const SigmaStatement& st,
                       const Scalar& witness, ByteView aux, Rng& rng);
bool sigma_verify(const GroupParams& pp, const SigmaStatement& st,
                  const SigmaProof& proof, ByteView aux);

}  // namespace fairtor

#endif
