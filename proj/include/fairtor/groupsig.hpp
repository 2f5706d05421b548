#ifndef FAIRTOR_GROUPSIG_HPP
#define FAIRTOR_GROUPSIG_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "fairtor/crypto.hpp"
#include "fairtor/group.hpp"
#include "fairtor/parallel.hpp"

namespace fairtor {

// Group signatures over an explicit allowed set: a signature is an ElGamal
// encryption of the member's tag under the opener key plus a one-of-N proof
// that the encrypted tag is in the allowed set and that the signer knows its
// discrete log. Revocation removes the tag from the set, so verification
// against the current set realizes blocking.

inline constexpr unsigned kDefaultPowDifficulty = 16;

struct PowPuzzle {
    Bytes challenge;
    unsigned difficulty = kDefaultPowDifficulty;  // leading zero bits
};

struct PowSolution {
    std::uint64_t nonce = 0;
};

PowSolution pow_solve(const PowPuzzle& puzzle);
PowSolution pow_solve(const PowPuzzle& puzzle, par::Mode mode);
bool pow_verify(const PowPuzzle& puzzle, const PowSolution& sol);

struct AllowedSetVersion {
    std::uint64_t version = 0;
    std::vector<GroupElement> tags;
    Digest digest{};  // hash("gk.version", be64(version) || encoded tags)
};

Digest allowed_set_digest(const GroupParams& pp, std::uint64_t version,
                          const std::vector<GroupElement>& tags);

struct RegistryEntry {
    std::uint64_t id = 0;
    GroupElement tag;
};

struct GroupManagerKey {
    GroupParams params;
    Scalar opener_secret;
    std::vector<RegistryEntry> registry;
    std::vector<PowPuzzle> outstanding;  // issued, not yet consumed by a join
    unsigned pow_difficulty = kDefaultPowDifficulty;
    std::vector<GroupElement> revoked;  // published revocation list, in order
    std::uint64_t version = 0;          // mirrors the published GK version
    std::uint64_t next_id = 1;
};

struct GroupKey {
    GroupParams params;
    GroupElement opk;  // opener public key, g_op^z
    std::vector<AllowedSetVersion> history;  // history[v].version == v

    const AllowedSetVersion& current() const { return history.back(); }
    std::uint64_t version() const { return current().version; }
    const std::vector<GroupElement>& allowed_set() const { return current().tags; }
    const Digest& version_digest() const { return current().digest; }
    // nullptr if v was never published.
    const AllowedSetVersion* at_version(std::uint64_t v) const;

    Bytes encode() const;
    static GroupKey decode(ByteView wire);
};

struct MemberKey {
    Scalar secret;
    GroupElement tag;  // h^secret
    std::uint64_t id = 0;
};

struct GroupSignature {
    ElGamalCt ct;  // (g_op^rho, T_i * OPK^rho)
    std::uint64_t version = 0;
    Digest version_digest{};
    // One branch per allowed-set slot; challenges sum to the Fiat-Shamir
    // challenge mod q. Branch commitments are recomputed at verify time.
    std::vector<Scalar> challenges;
    std::vector<Scalar> rho_responses;
    std::vector<Scalar> tag_responses;

    Bytes encode(const GroupParams& pp) const;
    static GroupSignature decode(const GroupParams& pp, ByteView wire);
};

std::pair<GroupManagerKey, GroupKey> gs_setup(const GroupParams& pp, Rng& rng);

PowPuzzle gs_issue_puzzle(GroupManagerKey& mk, Rng& rng);

struct JoinRequest {
    GroupElement tag;
    SigmaProof proof;  // knowledge of log_h(tag), bound to the puzzle challenge
    Bytes challenge;   // which issued puzzle this answers
    PowSolution solution;

    Bytes encode(const GroupParams& pp) const;
    static JoinRequest decode(const GroupParams& pp, ByteView wire);
};

JoinRequest make_join_request(const GroupParams& pp, const Scalar& secret,
                              const PowPuzzle& puzzle, const PowSolution& sol,
                              Rng& rng);
// Manager side; returns the assigned member id.
// Errors: PowInvalid, ProofInvalid, DuplicateTag.
std::uint64_t gs_process_join(GroupManagerKey& mk, GroupKey& gk,
                              const JoinRequest& req);
// Both sides in one call, for tests and the simulator.
MemberKey gs_join(GroupManagerKey& mk, GroupKey& gk, const Scalar& secret,
                  const PowPuzzle& puzzle, const PowSolution& sol, Rng& rng);

// Errors: NotInAllowedSet if the member's tag is not in gk's current set.
// rho_out, when given, receives the ciphertext randomness so the caller can
// later prove relations between two of its own signatures.
GroupSignature gs_sign(ByteView msg, const MemberKey& mk_i, const GroupKey& gk,
                       Rng& rng, Scalar* rho_out = nullptr);

// True iff the proof verifies against the allowed set of sig.version, that
// version is within `window` of current, and every tag of that set is still
// allowed (so a revocation retroactively invalidates the window).
bool gs_verify(const GroupSignature& sig, ByteView msg, const GroupKey& gk,
               std::uint64_t window);
bool gs_verify(const GroupSignature& sig, ByteView msg, const GroupKey& gk,
               std::uint64_t window, par::Mode mode);
// Verification pinned to the signature's own version, with no window or
// revocation constraint; evidence checks on old signatures use this.
bool gs_verify_historic(const GroupSignature& sig, ByteView msg,
                        const GroupKey& gk);

// Errors: UnknownTag if decryption yields a non-registered element.
GroupElement gs_open(const GroupSignature& sig, const GroupManagerKey& mk);
bool gs_trace(const GroupSignature& sig, const GroupManagerKey& mk,
              const GroupElement& target);

// Errors: NotFound, AlreadyRevoked.
void gs_revoke(GroupManagerKey& mk, GroupKey& gk, const GroupElement& tag);

// One tag per record, preceded by the version at publication time.
Bytes encode_revocation_list(const GroupParams& pp, std::uint64_t version,
                             const std::vector<GroupElement>& tags);
std::pair<std::uint64_t, std::vector<GroupElement>> decode_revocation_list(
    const GroupParams& pp, ByteView wire);

namespace detail {
// Recomputed branch commitments (a1, a2, a3 per slot) for a signature's
// scalars against the given tag list; exposed for the parallel kernel tests.
std::vector<GroupElement> gs_branch_commitments(
    const GroupParams& pp, const GroupElement& opk,
    const std::vector<GroupElement>& tags, const GroupSignature& sig,
    par::Mode mode);
}  // namespace detail

}  // namespace fairtor

#endif
