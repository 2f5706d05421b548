#include "fairtor/fairness.hpp"

namespace fairtor {

namespace {

constexpr std::uint8_t kBundleFileVersion = 1;

Bytes circuit_transcript(const GroupParams& pp, const GroupElement& x2_share,
                         const GroupElement& y2_share) {
    Encoder enc;
    encode_element(enc, pp, x2_share);
    encode_element(enc, pp, y2_share);
    return enc.take();
}

DleqStatement key_statement(const GroupParams& pp,
                            const GroupElement& x2_share,
                            const GroupElement& y2_share,
                            const GroupElement& k2) {
    return {generator(pp), y2_share, x2_share, k2};
}

}  // namespace

ExitLogRecord& LogStore::log_exit_record(std::uint64_t circuit_id,
                                         const ExitHandshakeOutput& output,
                                         std::uint64_t current_epoch) {
    ExitLogRecord rec;
    rec.circuit_id = circuit_id;
    rec.x2_share = output.x2_share;
    rec.y2_share = output.y2_share;
    rec.y2_secret = output.y2_secret;
    rec.k2_shared = output.k2_shared;
    rec.key = output.key;
    rec.sigma2 = output.sigma2;
    rec.r1 = output.r1;
    rec.created = current_epoch;
    rec.expiry = current_epoch + retention_;
    auto [it, inserted] = records_.insert_or_assign(circuit_id, std::move(rec));
    (void)inserted;
    return it->second;
}

std::uint64_t LogStore::record_message(std::uint64_t circuit_id, ByteView msg) {
    ExitLogRecord& rec = at(circuit_id);
    std::uint64_t seq = rec.messages.size();
    rec.messages.push_back(seal_at_seq(rec.key, seq, msg));
    return seq;
}

const ExitLogRecord* LogStore::find(std::uint64_t circuit_id) const {
    auto it = records_.find(circuit_id);
    return it == records_.end() ? nullptr : &it->second;
}

ExitLogRecord& LogStore::at(std::uint64_t circuit_id) {
    auto it = records_.find(circuit_id);
    if (it == records_.end()) fail(ErrorCode::NotFound, "no such circuit");
    return it->second;
}

std::size_t LogStore::purge_expired(std::uint64_t current_epoch) {
    std::size_t purged = 0;
    for (auto it = records_.begin(); it != records_.end();) {
        if (it->second.expiry <= current_epoch) {
            it = records_.erase(it);
            ++purged;
        } else {
            ++it;
        }
    }
    return purged;
}

Bytes DenunciationBundle::encode(const GroupParams& pp) const {
    Encoder enc;
    enc.field(sealed_msg.encode());
    encode_element(enc, pp, k2);
    encode_element(enc, pp, x2_share);
    encode_element(enc, pp, y2_share);
    enc.field(sigma2.encode(pp));
    enc.field(dleq.encode(pp));
    enc.field(claimed_msg);
    return enc.take();
}

DenunciationBundle DenunciationBundle::decode(const GroupParams& pp,
                                              ByteView wire) {
    Decoder dec(wire);
    DenunciationBundle b;
    b.sealed_msg = Sealed::decode(view(dec.field()));
    b.k2 = decode_element(pp, view(dec.field()));
    b.x2_share = decode_element(pp, view(dec.field()));
    b.y2_share = decode_element(pp, view(dec.field()));
    b.sigma2 = GroupSignature::decode(pp, view(dec.field()));
    b.dleq = SigmaProof::decode(pp, view(dec.field()));
    b.claimed_msg = dec.field();
    dec.expect_done();
    return b;
}

Bytes encode_bundle_file(const GroupParams& pp, const DenunciationBundle& b) {
    Bytes out = {'F', 'T', 'D', 'N', kBundleFileVersion};
    Bytes body = b.encode(pp);
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

DenunciationBundle decode_bundle_file(const GroupParams& pp, ByteView data) {
    if (data.size() < 5 || data[0] != 'F' || data[1] != 'T' || data[2] != 'D' ||
        data[3] != 'N') {
        fail(ErrorCode::ParseError, "not a denunciation bundle");
    }
    if (data[4] != kBundleFileVersion) {
        fail(ErrorCode::ParseError, "unsupported bundle format");
    }
    return DenunciationBundle::decode(pp, data.subspan(5));
}

DenunciationBundle build_denunciation(const GroupParams& pp,
                                      const ExitLogRecord& record,
                                      ByteView claimed_msg, std::uint64_t seq,
                                      std::uint64_t current_epoch, Rng& rng) {
    if (record.expiry <= current_epoch) {
        fail(ErrorCode::Expired, "evidence retention lapsed");
    }
    if (seq >= record.messages.size()) fail(ErrorCode::SeqOutOfRange);
    DenunciationBundle b;
    b.sealed_msg = record.messages[seq];
    b.k2 = record.k2_shared;
    b.x2_share = record.x2_share;
    b.y2_share = record.y2_share;
    b.sigma2 = record.sigma2;
    b.dleq = sigma_prove(
        pp, key_statement(pp, record.x2_share, record.y2_share, record.k2_shared),
        record.y2_secret, ByteView{}, rng);
    b.claimed_msg = Bytes(claimed_msg.begin(), claimed_msg.end());
    return b;
}

Verdict verify_denunciation(const GroupParams& pp,
                            const DenunciationBundle& bundle,
                            const GroupKey& gk) {
    Verdict v;
    DerivedKeys dk = derive_keys(
        pp, bundle.k2,
        view(circuit_transcript(pp, bundle.x2_share, bundle.y2_share)));
    try {
        Bytes plain = open_sealed(dk.key, bundle.sealed_msg);
        if (plain != bundle.claimed_msg) {
            v.reason = ErrorCode::DecryptMismatch;
            return v;
        }
    } catch (const Error&) {
        v.reason = ErrorCode::DecryptMismatch;
        return v;
    }
    if (!gs_verify_historic(bundle.sigma2,
                            view(encode_element(pp, bundle.x2_share)), gk)) {
        v.reason = ErrorCode::SigInvalid;
        return v;
    }
    if (!sigma_verify(pp,
                      key_statement(pp, bundle.x2_share, bundle.y2_share,
                                    bundle.k2),
                      bundle.dleq, ByteView{})) {
        v.reason = ErrorCode::DleqInvalid;
        return v;
    }
    v.accepted = true;
    return v;
}

Verdict apply_revocation(const DenunciationBundle& bundle, GroupManagerKey& mk,
                         GroupKey& gk, const RevocationPolicy& policy) {
    Verdict v = verify_denunciation(gk.params, bundle, gk);
    if (!v.accepted) fail(ErrorCode::VerifyFailed, "bundle did not verify");
    if (policy && !policy(v)) return v;
    GroupElement tag = gs_open(bundle.sigma2, mk);
    gs_revoke(mk, gk, tag);
    v.opened_tag = tag;
    return v;
}

}  // namespace fairtor
