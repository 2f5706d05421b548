#ifndef FAIRTOR_HANDSHAKE_HPP
#define FAIRTOR_HANDSHAKE_HPP

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "fairtor/blindsig.hpp"
#include "fairtor/crypto.hpp"
#include "fairtor/groupsig.hpp"
#include "fairtor/parallel.hpp"

namespace fairtor {

// Entry handshake: the user proves group membership on g^{x1} and has the
// entry node blindly sign a commitment to a second group signature on g^{x2}.
// The "same member, well-formed blinding" statement is realized by
// cut-and-choose over k instances: all but a survivor are opened and checked,
// and the blinded survivor becomes the exit token. Exit handshake: the user
// reveals the survivor (g^{x2}, sigma2, r1) plus the unblinded token.

struct HandshakeConfig {
    std::size_t k = 16;            // cut-and-choose instances, 4..64 advised
    std::uint64_t gk_window = 2;   // accepted allowed-set version skew
    std::uint64_t epoch_window = 1;
    bool interactive = false;      // verifier-chosen survivor (two rounds)
};

enum class MsgTag : std::uint8_t {
    EntryRequest = 1,
    EntryResponse = 2,
    ExitRequest = 3,
    ExitResponse = 4,
    PlainRequest = 5,
    PlainResponse = 6,
    EntryRound1 = 7,
    SurvivorChallenge = 8,
    EntryRound2 = 9,
    Relay = 10,
};

Bytes wrap_wire(MsgTag tag, ByteView body);
std::pair<MsgTag, Bytes> unwrap_wire(ByteView wire);  // ParseError

struct EntryInstance {
    mpz_class beta;
    Digest pi{};  // binds beta to (epoch, sigma1, g^{x1})
};

struct InstanceOpening {
    GroupElement x2_share;
    GroupSignature sigma2;  // over encoded x2_share
    Scalar r1;
    mpz_class r2;
    SigmaProof same_member;  // ENC_EQ between sigma1's and sigma2's ciphertexts
};

struct EntryRequestBody {
    GroupElement x1_share;
    GroupSignature sigma1;  // over encoded x1_share
    std::vector<EntryInstance> instances;
    std::uint64_t survivor = 0;
    std::vector<InstanceOpening> openings;  // instance order, survivor skipped

    Bytes encode(const GroupParams& pp) const;
    static EntryRequestBody decode(const GroupParams& pp, ByteView wire);
};

struct EntryRequest {
    HybridCiphertext body;  // to the entry node's public key

    Bytes encode(const GroupParams& pp) const;  // tagged wire form
    static EntryRequest decode(const GroupParams& pp, ByteView wire);
};

struct EntryResponse {
    GroupElement y1_share;
    mpz_class beta_tilde;  // blind signature on the survivor instance
    Digest confirmation{};

    Bytes encode(const GroupParams& pp) const;
    static EntryResponse decode(const GroupParams& pp, ByteView wire);
};

struct ExitRequestBody {
    GroupElement x2_share;
    GroupSignature sigma2;
    Scalar r1;  // opening for the commitment the token signs
    BlindToken token;

    Bytes encode(const GroupParams& pp) const;
    static ExitRequestBody decode(const GroupParams& pp, ByteView wire);
};

struct ExitRequest {
    HybridCiphertext body;

    Bytes encode(const GroupParams& pp) const;
    static ExitRequest decode(const GroupParams& pp, ByteView wire);
};

struct ExitResponse {
    GroupElement y2_share;
    Digest confirmation{};

    Bytes encode(const GroupParams& pp) const;
    static ExitResponse decode(const GroupParams& pp, ByteView wire);
};

// Secrets of one prepared instance, user side.
struct InstanceSecrets {
    Scalar x2;
    GroupElement x2_share;
    GroupSignature sigma2;
    Scalar sigma2_rho;
    Scalar r1;
    Commitment com;
    BlindingSecret r2;
    mpz_class beta;
    Digest pi{};
};

struct UserEntryState {
    HandshakeConfig cfg;
    GroupParams params;
    EpochPublicKey epoch_key;
    GroupElement opk;  // opener public key, kept for deferred openings
    Scalar x1;
    GroupElement x1_share;
    GroupSignature sigma1;
    Scalar sigma1_rho;
    InstanceSecrets survivor;      // populated once the survivor is fixed
    std::uint64_t survivor_index = 0;
    bool have_survivor = false;
    // Interactive mode keeps every instance until the challenge arrives.
    std::vector<InstanceSecrets> pending;
    Bytes round1_digest;
    // After user_finish_entry:
    SymmetricKey k1{};
    BlindToken token;
    bool have_token = false;
};

struct EntryLogRecord {
    GroupElement x1_share;
    GroupSignature sigma1;
    std::uint64_t epoch = 0;
    mpz_class issued_beta;
};

struct EntryAccept {
    EntryResponse response;
    SymmetricKey key{};  // node-side K1
    EntryLogRecord record;
};

struct EntryOutcome {
    SymmetricKey key{};  // user-side K1
    BlindToken token;
    bool verified = false;  // token satisfies the epoch key equation
};

// Errors: NotInAllowedSet, MinInstances.
std::pair<EntryRequest, UserEntryState> build_entry_request(
    const MemberKey& mk, const GroupKey& gk, const EpochPublicKey& epoch_key,
    const GroupElement& en_pub, const HandshakeConfig& cfg, Rng& rng);

// Errors: DecryptFailed, StaleVersion, SigInvalid, CutAndChooseMismatch.
EntryAccept en_process_entry_request(const EntryRequest& req,
                                     const Scalar& node_secret,
                                     const GroupKey& gk,
                                     const EpochSignerKeys& sbk,
                                     const HandshakeConfig& cfg, Rng& rng);

// Errors: ConfirmMismatch, NonInvertible.
EntryOutcome user_finish_entry(const EntryResponse& resp, UserEntryState& state);

// ---- interactive (verifier-chosen survivor) variant ----

struct EntryRound1Body {
    GroupElement x1_share;
    GroupSignature sigma1;
    std::vector<EntryInstance> instances;

    Bytes encode(const GroupParams& pp) const;
    static EntryRound1Body decode(const GroupParams& pp, ByteView wire);
};

struct EntryRound1 {
    HybridCiphertext body;

    Bytes encode(const GroupParams& pp) const;
    static EntryRound1 decode(const GroupParams& pp, ByteView wire);
};

struct SurvivorChallenge {
    Digest binding{};  // digest of the round-1 body
    std::uint64_t survivor = 0;

    Bytes encode() const;
    static SurvivorChallenge decode(ByteView wire);
};

struct EntryRound2Body {
    Digest binding{};
    std::uint64_t survivor = 0;
    std::vector<InstanceOpening> openings;

    Bytes encode(const GroupParams& pp) const;
    static EntryRound2Body decode(const GroupParams& pp, ByteView wire);
};

struct EntryRound2 {
    HybridCiphertext body;

    Bytes encode(const GroupParams& pp) const;
    static EntryRound2 decode(const GroupParams& pp, ByteView wire);
};

struct PendingEntry {
    EntryRound1Body body;
    Digest binding{};
    std::uint64_t survivor = 0;
};

std::pair<EntryRound1, UserEntryState> build_entry_round1(
    const MemberKey& mk, const GroupKey& gk, const EpochPublicKey& epoch_key,
    const GroupElement& en_pub, const HandshakeConfig& cfg, Rng& rng);

// Checks sigma1 and the instance count, then commits to a survivor choice.
// Errors: DecryptFailed, StaleVersion, SigInvalid, CutAndChooseMismatch.
std::pair<SurvivorChallenge, PendingEntry> en_process_entry_round1(
    const EntryRound1& req, const Scalar& node_secret, const GroupKey& gk,
    const HandshakeConfig& cfg, Rng& rng);

// Errors: CutAndChooseMismatch if the challenge does not match round 1.
EntryRound2 build_entry_round2(UserEntryState& state,
                               const SurvivorChallenge& challenge,
                               const GroupElement& en_pub, Rng& rng);

EntryAccept en_process_entry_round2(const EntryRound2& req,
                                    const PendingEntry& pending,
                                    const Scalar& node_secret,
                                    const GroupKey& gk,
                                    const EpochSignerKeys& sbk,
                                    const HandshakeConfig& cfg, Rng& rng);

// ---- exit handshake ----

class ReplayCache {
public:
    // False (and no insert) when the commitment was already seen.
    bool check_and_insert(const Bytes& com_encoding, std::uint64_t epoch);
    void purge(std::uint64_t current_epoch, std::uint64_t window);
    std::size_t size() const { return seen_.size(); }

private:
    std::map<Bytes, std::uint64_t> seen_;
};

struct ExitHandshakeOutput {
    GroupElement x2_share;
    GroupElement y2_share;
    Scalar y2_secret;  // witness for the denunciation key proof
    GroupElement k2_shared;
    SymmetricKey key{};  // derived K2
    GroupSignature sigma2;
    Commitment com;
    Scalar r1;  // commitment randomness, retained for the exit log
    std::uint64_t token_epoch = 0;
};

struct ExitAccept {
    ExitResponse response;
    ExitHandshakeOutput output;
};

// Errors: NoToken until user_finish_entry succeeded.
ExitRequest build_exit_request(const UserEntryState& state,
                               const GroupElement& ex_pub, Rng& rng);

// Errors: DecryptFailed, SigInvalid, TokenExpired, TokenInvalid, Replayed.
ExitAccept ex_process_exit_request(const ExitRequest& req,
                                   const Scalar& node_secret,
                                   const GroupKey& gk,
                                   const EpochKeyStore& store,
                                   ReplayCache& cache,
                                   std::uint64_t current_epoch,
                                   const HandshakeConfig& cfg, Rng& rng);

// Errors: ConfirmMismatch.
SymmetricKey user_finish_exit(const ExitResponse& resp,
                              const UserEntryState& state);

// ---- plain middle-hop handshake and onion layering ----

struct PlainInit {
    Scalar secret;
    GroupElement share;
};

struct PlainResponse {
    GroupElement share;
    Digest confirmation{};

    Bytes encode(const GroupParams& pp) const;
    static PlainResponse decode(const GroupParams& pp, ByteView wire);
};

PlainInit plain_initiate(const GroupParams& pp, Rng& rng);
std::pair<PlainResponse, SymmetricKey> plain_respond(const GroupParams& pp,
                                                     const GroupElement& peer,
                                                     Rng& rng);
// Errors: ConfirmMismatch.
SymmetricKey plain_finish(const GroupParams& pp, const PlainInit& init,
                          const PlainResponse& resp);
// Both sides at once, for tests.
std::pair<SymmetricKey, SymmetricKey> plain_handshake(const GroupParams& pp,
                                                      Rng& rng);

// keys[0] is the outermost (entry) layer; the cell is sealed inner-first so
// each relay strips exactly one layer.
Bytes onion_wrap(ByteView cell, const std::vector<SymmetricKey>& keys, Rng& rng);
Bytes onion_unwrap_layer(const SymmetricKey& key, ByteView wire);  // AuthError

enum class HopRole : std::uint8_t { Entry, Middle, Exit };

struct CircuitHop {
    std::uint64_t node = 0;
    HopRole role = HopRole::Middle;
    SymmetricKey key{};
};

struct CircuitState {
    std::vector<CircuitHop> hops;
    UserEntryState entry;
};

}  // namespace fairtor

#endif
