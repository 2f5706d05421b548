#ifndef FAIRTOR_FAIRNESS_HPP
#define FAIRTOR_FAIRNESS_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <vector>

#include "fairtor/bytes.hpp"
#include "fairtor/crypto.hpp"
#include "fairtor/errors.hpp"
#include "fairtor/groupsig.hpp"
#include "fairtor/handshake.hpp"
#include "fairtor/rng.hpp"

namespace fairtor {

// How many epochs exit evidence is retained; a record created at epoch e
// expires at e + retention and is purged once the clock reaches expiry.
inline constexpr std::uint64_t kDefaultRetentionEpochs = 24;

// Everything an exit node must keep to later substantiate a denunciation:
// the circuit's key material, the signature that admitted it, and each
// relayed message sealed under the circuit key with its sequence number.
struct ExitLogRecord {
    std::uint64_t circuit_id = 0;
    GroupElement x2_share;
    GroupElement y2_share;
    Scalar y2_secret;
    GroupElement k2_shared;
    SymmetricKey key{};  // stream key derived from k2_shared
    GroupSignature sigma2;
    Scalar r1;
    std::vector<Sealed> messages;  // index doubles as the sequence number
    std::uint64_t created = 0;     // epoch
    std::uint64_t expiry = 0;      // created + retention, inclusive
};

class LogStore {
public:
    explicit LogStore(std::uint64_t retention = kDefaultRetentionEpochs)
        : retention_(retention) {}

    ExitLogRecord& log_exit_record(std::uint64_t circuit_id,
                                   const ExitHandshakeOutput& output,
                                   std::uint64_t current_epoch);

    // Seals msg under the record's stream key; returns the sequence number.
    // Errors: NotFound.
    std::uint64_t record_message(std::uint64_t circuit_id, ByteView msg);

    const ExitLogRecord* find(std::uint64_t circuit_id) const;
    ExitLogRecord& at(std::uint64_t circuit_id);  // NotFound

    // Removes every record with expiry <= current_epoch; returns the count.
    std::size_t purge_expired(std::uint64_t current_epoch);

    std::size_t size() const { return records_.size(); }
    std::uint64_t retention() const { return retention_; }

private:
    std::uint64_t retention_;
    std::map<std::uint64_t, ExitLogRecord> records_;
};

// Self-contained evidence that a specific plaintext crossed a specific
// circuit: the sealed message, the circuit key material, the admitting
// signature, and a proof that the submitter knows the exit share y2 with
// y2_share = g^{y2} and k2 = x2_share^{y2}.
struct DenunciationBundle {
    Sealed sealed_msg;
    GroupElement k2;
    GroupElement x2_share;
    GroupElement y2_share;
    GroupSignature sigma2;
    SigmaProof dleq;
    Bytes claimed_msg;

    Bytes encode(const GroupParams& pp) const;
    static DenunciationBundle decode(const GroupParams& pp, ByteView wire);
};

// On-disk form: "FTDN" magic, one format version byte, canonical body.
Bytes encode_bundle_file(const GroupParams& pp, const DenunciationBundle& b);
// Errors: ParseError.
DenunciationBundle decode_bundle_file(const GroupParams& pp, ByteView data);

struct Verdict {
    bool accepted = false;
    ErrorCode reason = ErrorCode::None;  // first failing check when rejected
    std::optional<GroupElement> opened_tag;  // set only by apply_revocation
};

// Errors: Expired if the record's retention has lapsed, SeqOutOfRange.
DenunciationBundle build_denunciation(const GroupParams& pp,
                                      const ExitLogRecord& record,
                                      ByteView claimed_msg, std::uint64_t seq,
                                      std::uint64_t current_epoch, Rng& rng);

// Public checks only — no manager key involved. Checks, in order: the sealed
// message opens under the key derived from (k2, x2_share, y2_share) to the
// claimed plaintext (DecryptMismatch); sigma2 verifies over x2_share at its
// embedded version (SigInvalid); the key proof verifies (DleqInvalid).
Verdict verify_denunciation(const GroupParams& pp,
                            const DenunciationBundle& bundle,
                            const GroupKey& gk);

// Decides whether an accepted denunciation leads to revocation; default
// (empty) policy always revokes.
using RevocationPolicy = std::function<bool(const Verdict&)>;

// Errors: VerifyFailed if the bundle does not verify, plus anything
// gs_open / gs_revoke raise (UnknownTag, NotFound, AlreadyRevoked).
Verdict apply_revocation(const DenunciationBundle& bundle, GroupManagerKey& mk,
                         GroupKey& gk, const RevocationPolicy& policy = {});

}  // namespace fairtor

#endif
