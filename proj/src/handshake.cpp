#include "fairtor/handshake.hpp"

#include <algorithm>

#include "fairtor/errors.hpp"

namespace fairtor {

namespace {

Bytes entry_transcript(const GroupParams& pp, const GroupElement& x1_share,
                       const GroupSignature& sigma1) {
    Encoder enc;
    encode_element(enc, pp, x1_share);
    enc.field(sigma1.encode(pp));
    return enc.take();
}

std::uint64_t survivor_index(const GroupParams& pp, const GroupSignature& sigma1,
                             const GroupElement& x1_share,
                             const std::vector<EntryInstance>& instances,
                             std::uint64_t k) {
    Encoder enc;
    enc.field(sigma1.encode(pp));
    encode_element(enc, pp, x1_share);
    for (const auto& inst : instances) enc.field(encode_mpz(inst.beta));
    Digest d = hash(to_bytes("cc"), view(enc.bytes()));
    mpz_class v = mpz_from_bytes(ByteView(d.data(), d.size())) % k;
    return v.get_ui();
}

Bytes same_member_aux(const GroupParams& pp, const GroupElement& x1_share,
                      const GroupElement& x2_share, std::uint64_t index) {
    Encoder enc;
    encode_element(enc, pp, x1_share);
    encode_element(enc, pp, x2_share);
    enc.u64(index);
    return enc.take();
}

Scalar sig2_scalar(const GroupParams& pp, const GroupSignature& sigma2) {
    return hash_to_scalar(pp, to_bytes("hs.sig2"), view(sigma2.encode(pp)));
}

InstanceSecrets build_instance(const MemberKey& mk, const GroupKey& gk,
                               const EpochPublicKey& key, ByteView transcript,
                               Rng& rng) {
    const GroupParams& pp = gk.params;
    InstanceSecrets inst;
    inst.x2 = random_scalar(pp, rng);
    inst.x2_share = power(pp, generator(pp), inst.x2);
    inst.sigma2 = gs_sign(view(encode_element(pp, inst.x2_share)), mk, gk, rng,
                          &inst.sigma2_rho);
    inst.r1 = random_scalar(pp, rng);
    inst.com = commit(pp, sig2_scalar(pp, inst.sigma2), inst.r1);
    BlindResult blind = bgs_blind(pp, inst.com, key, transcript, rng);
    inst.r2 = blind.secret;
    inst.beta = blind.beta;
    inst.pi = blind.pi;
    return inst;
}

InstanceOpening open_instance(const GroupParams& pp, const GroupElement& opk,
                              const GroupSignature& sigma1,
                              const Scalar& sigma1_rho,
                              const GroupElement& x1_share,
                              const InstanceSecrets& inst, std::uint64_t index,
                              Rng& rng) {
    InstanceOpening opening;
    opening.x2_share = inst.x2_share;
    opening.sigma2 = inst.sigma2;
    opening.r1 = inst.r1;
    opening.r2 = inst.r2.r2;
    EncEqStatement st{base_opener(pp), opk, sigma1.ct, inst.sigma2.ct};
    opening.same_member =
        sigma_prove(pp, st, scalar_sub(pp, sigma1_rho, inst.sigma2_rho),
                    view(same_member_aux(pp, x1_share, inst.x2_share, index)),
                    rng);
    return opening;
}

void check_sigma1(const GroupSignature& sigma1, const GroupElement& x1_share,
                  const GroupKey& gk, const HandshakeConfig& cfg) {
    const AllowedSetVersion* snap = gk.at_version(sigma1.version);
    if (snap == nullptr || gk.version() - sigma1.version > cfg.gk_window) {
        fail(ErrorCode::StaleVersion);
    }
    if (!gs_verify(sigma1, view(encode_element(gk.params, x1_share)), gk,
                   cfg.gk_window)) {
        fail(ErrorCode::SigInvalid);
    }
}

bool check_opening(const GroupParams& pp, const GroupKey& gk,
                   const EpochPublicKey& key, const GroupSignature& sigma1,
                   const GroupElement& x1_share, const EntryInstance& inst,
                   const InstanceOpening& opening, std::uint64_t index,
                   const HandshakeConfig& cfg) {
    if (!gs_verify(opening.sigma2, view(encode_element(pp, opening.x2_share)),
                   gk, cfg.gk_window, par::Mode::Serial)) {
        return false;
    }
    EncEqStatement st{base_opener(pp), gk.opk, sigma1.ct, opening.sigma2.ct};
    if (!sigma_verify(pp, st, opening.same_member,
                      view(same_member_aux(pp, x1_share, opening.x2_share,
                                           index)))) {
        return false;
    }
    if (opening.r2 < 2 || opening.r2 >= key.n) return false;
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), opening.r2.get_mpz_t(), key.n.get_mpz_t());
    if (g != 1) return false;
    Commitment com = commit(pp, sig2_scalar(pp, opening.sigma2), opening.r1);
    mpz_class fdh = fdh_to_modulus(key, view(encode_commitment(pp, com)));
    return blind_value(key, fdh, opening.r2) == inst.beta;
}

// Shared by the one-shot and two-round paths; when fiat_shamir is set the
// survivor index is recomputed from the request, otherwise the caller has
// already pinned it.
void verify_entry_body(const EntryRequestBody& body, const GroupKey& gk,
                       const EpochPublicKey& key, const HandshakeConfig& cfg,
                       bool fiat_shamir) {
    const GroupParams& pp = gk.params;
    if (cfg.k < 2) fail(ErrorCode::MinInstances);
    if (body.instances.size() != cfg.k || body.survivor >= cfg.k ||
        body.openings.size() != cfg.k - 1) {
        fail(ErrorCode::CutAndChooseMismatch, "instance count");
    }
    check_sigma1(body.sigma1, body.x1_share, gk, cfg);
    if (fiat_shamir &&
        body.survivor != survivor_index(pp, body.sigma1, body.x1_share,
                                        body.instances, cfg.k)) {
        fail(ErrorCode::CutAndChooseMismatch, "survivor index");
    }
    Bytes transcript = entry_transcript(pp, body.x1_share, body.sigma1);
    for (const auto& inst : body.instances) {
        if (inst.beta < 0 || inst.beta >= key.n ||
            inst.pi != bind_blinded(key, inst.beta, view(transcript))) {
            fail(ErrorCode::CutAndChooseMismatch, "instance binding");
        }
    }
    bool ok = par::parallel_all(
        body.openings.size(), par::default_mode(), [&](std::size_t o) {
            std::uint64_t j = o < body.survivor ? o : o + 1;
            return check_opening(pp, gk, key, body.sigma1, body.x1_share,
                                 body.instances[j], body.openings[o], j, cfg);
        });
    if (!ok) fail(ErrorCode::CutAndChooseMismatch, "opening check");
}

EntryAccept finish_entry_accept(const EntryRequestBody& body,
                                const EpochSignerKeys& sbk, Rng& rng,
                                const GroupParams& pp) {
    EntryAccept out;
    out.response.beta_tilde =
        bgs_sign_blinded(body.instances[body.survivor].beta, sbk);
    DhKeyPair y1 = dh_keygen(pp, rng);
    out.response.y1_share = y1.share;
    GroupElement shared = power(pp, body.x1_share, y1.secret);
    Encoder hs;
    encode_element(hs, pp, body.x1_share);
    encode_element(hs, pp, y1.share);
    DerivedKeys dk = derive_keys(pp, shared, view(hs.bytes()));
    out.response.confirmation = dk.confirmation;
    out.key = dk.key;
    out.record = {body.x1_share, body.sigma1, sbk.epoch,
                  body.instances[body.survivor].beta};
    return out;
}

template <typename Body>
Body decrypt_body(const GroupParams& pp, const Scalar& node_secret,
                  const HybridCiphertext& ct) {
    Bytes plain;
    try {
        plain = hybrid_decrypt(pp, node_secret, ct);
    } catch (const Error&) {
        fail(ErrorCode::DecryptFailed);
    }
    try {
        return Body::decode(pp, view(plain));
    } catch (const Error&) {
        fail(ErrorCode::DecryptFailed, "malformed request body");
    }
}

void encode_digest(Encoder& enc, const Digest& d) {
    enc.field(ByteView(d.data(), d.size()));
}

Digest decode_digest(ByteView payload) {
    Digest d;
    if (payload.size() != d.size()) fail(ErrorCode::ParseError, "bad digest");
    std::copy(payload.begin(), payload.end(), d.begin());
    return d;
}

void encode_opening(Encoder& enc, const GroupParams& pp,
                    const InstanceOpening& o) {
    encode_element(enc, pp, o.x2_share);
    enc.field(o.sigma2.encode(pp));
    encode_scalar(enc, pp, o.r1);
    enc.field(encode_mpz(o.r2));
    enc.field(o.same_member.encode(pp));
}

InstanceOpening decode_opening(const GroupParams& pp, Decoder& dec) {
    InstanceOpening o;
    o.x2_share = decode_element(pp, view(dec.field()));
    o.sigma2 = GroupSignature::decode(pp, view(dec.field()));
    o.r1 = decode_scalar(pp, view(dec.field()));
    o.r2 = decode_mpz(view(dec.field()));
    o.same_member = SigmaProof::decode(pp, view(dec.field()));
    return o;
}

constexpr std::uint64_t kMaxInstances = 1024;

}  // namespace

Bytes wrap_wire(MsgTag tag, ByteView body) {
    Bytes out;
    out.push_back(static_cast<std::uint8_t>(tag));
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

std::pair<MsgTag, Bytes> unwrap_wire(ByteView wire) {
    if (wire.empty()) fail(ErrorCode::ParseError, "empty message");
    std::uint8_t tag = wire[0];
    if (tag < 1 || tag > 10) fail(ErrorCode::ParseError, "unknown message tag");
    return {static_cast<MsgTag>(tag), Bytes(wire.begin() + 1, wire.end())};
}

namespace {

Bytes expect_tag(MsgTag want, ByteView wire) {
    auto [tag, body] = unwrap_wire(wire);
    if (tag != want) fail(ErrorCode::ParseError, "unexpected message tag");
    return body;
}

}  // namespace

Bytes EntryRequestBody::encode(const GroupParams& pp) const {
    Encoder enc;
    encode_element(enc, pp, x1_share);
    enc.field(sigma1.encode(pp));
    enc.u64(instances.size());
    for (const auto& inst : instances) {
        enc.field(encode_mpz(inst.beta));
        encode_digest(enc, inst.pi);
    }
    enc.u64(survivor);
    enc.u64(openings.size());
    for (const auto& o : openings) encode_opening(enc, pp, o);
    return enc.take();
}

EntryRequestBody EntryRequestBody::decode(const GroupParams& pp, ByteView wire) {
    Decoder dec(wire);
    EntryRequestBody body;
    body.x1_share = decode_element(pp, view(dec.field()));
    body.sigma1 = GroupSignature::decode(pp, view(dec.field()));
    std::uint64_t n = dec.u64();
    if (n == 0 || n > kMaxInstances) fail(ErrorCode::ParseError, "bad instances");
    for (std::uint64_t i = 0; i < n; ++i) {
        EntryInstance inst;
        inst.beta = decode_mpz(view(dec.field()));
        inst.pi = decode_digest(view(dec.field()));
        body.instances.push_back(std::move(inst));
    }
    body.survivor = dec.u64();
    std::uint64_t m = dec.u64();
    if (m > kMaxInstances) fail(ErrorCode::ParseError, "bad openings");
    for (std::uint64_t i = 0; i < m; ++i) {
        body.openings.push_back(decode_opening(pp, dec));
    }
    dec.expect_done();
    return body;
}

Bytes EntryRequest::encode(const GroupParams& pp) const {
    return wrap_wire(MsgTag::EntryRequest, view(body.encode(pp)));
}

EntryRequest EntryRequest::decode(const GroupParams& pp, ByteView wire) {
    Bytes body = expect_tag(MsgTag::EntryRequest, wire);
    return {HybridCiphertext::decode(pp, view(body))};
}

Bytes EntryResponse::encode(const GroupParams& pp) const {
    Encoder enc;
    encode_element(enc, pp, y1_share);
    enc.field(encode_mpz(beta_tilde));
    encode_digest(enc, confirmation);
    return wrap_wire(MsgTag::EntryResponse, view(enc.bytes()));
}

EntryResponse EntryResponse::decode(const GroupParams& pp, ByteView wire) {
    Bytes payload = expect_tag(MsgTag::EntryResponse, wire);
    Decoder dec(view(payload));
    EntryResponse resp;
    resp.y1_share = decode_element(pp, view(dec.field()));
    resp.beta_tilde = decode_mpz(view(dec.field()));
    resp.confirmation = decode_digest(view(dec.field()));
    dec.expect_done();
    return resp;
}

Bytes ExitRequestBody::encode(const GroupParams& pp) const {
    Encoder enc;
    encode_element(enc, pp, x2_share);
    enc.field(sigma2.encode(pp));
    encode_scalar(enc, pp, r1);
    enc.field(token.encode());
    return enc.take();
}

ExitRequestBody ExitRequestBody::decode(const GroupParams& pp, ByteView wire) {
    Decoder dec(wire);
    ExitRequestBody body;
    body.x2_share = decode_element(pp, view(dec.field()));
    body.sigma2 = GroupSignature::decode(pp, view(dec.field()));
    body.r1 = decode_scalar(pp, view(dec.field()));
    body.token = BlindToken::decode(view(dec.field()));
    dec.expect_done();
    return body;
}

Bytes ExitRequest::encode(const GroupParams& pp) const {
    return wrap_wire(MsgTag::ExitRequest, view(body.encode(pp)));
}

ExitRequest ExitRequest::decode(const GroupParams& pp, ByteView wire) {
    Bytes body = expect_tag(MsgTag::ExitRequest, wire);
    return {HybridCiphertext::decode(pp, view(body))};
}

Bytes ExitResponse::encode(const GroupParams& pp) const {
    Encoder enc;
    encode_element(enc, pp, y2_share);
    encode_digest(enc, confirmation);
    return wrap_wire(MsgTag::ExitResponse, view(enc.bytes()));
}

ExitResponse ExitResponse::decode(const GroupParams& pp, ByteView wire) {
    Bytes payload = expect_tag(MsgTag::ExitResponse, wire);
    Decoder dec(view(payload));
    ExitResponse resp;
    resp.y2_share = decode_element(pp, view(dec.field()));
    resp.confirmation = decode_digest(view(dec.field()));
    dec.expect_done();
    return resp;
}

std::pair<EntryRequest, UserEntryState> build_entry_request(
    const MemberKey& mk, const GroupKey& gk, const EpochPublicKey& epoch_key,
    const GroupElement& en_pub, const HandshakeConfig& cfg, Rng& rng) {
    const GroupParams& pp = gk.params;
    if (cfg.k < 2 || cfg.k > 64) {
        fail(ErrorCode::MinInstances, "instance count out of range");
    }
    UserEntryState state;
    state.cfg = cfg;
    state.params = pp;
    state.epoch_key = epoch_key;
    state.opk = gk.opk;

    DhKeyPair x1 = dh_keygen(pp, rng);
    state.x1 = x1.secret;
    state.x1_share = x1.share;
    state.sigma1 = gs_sign(view(encode_element(pp, x1.share)), mk, gk, rng,
                           &state.sigma1_rho);
    Bytes transcript = entry_transcript(pp, state.x1_share, state.sigma1);

    std::vector<InstanceSecrets> secrets;
    EntryRequestBody body;
    body.x1_share = state.x1_share;
    body.sigma1 = state.sigma1;
    for (std::size_t j = 0; j < cfg.k; ++j) {
        secrets.push_back(
            build_instance(mk, gk, epoch_key, view(transcript), rng));
        body.instances.push_back({secrets.back().beta, secrets.back().pi});
    }
    body.survivor =
        survivor_index(pp, state.sigma1, state.x1_share, body.instances, cfg.k);
    for (std::size_t j = 0; j < cfg.k; ++j) {
        if (j == body.survivor) continue;
        body.openings.push_back(open_instance(pp, gk.opk, state.sigma1,
                                              state.sigma1_rho, state.x1_share,
                                              secrets[j], j, rng));
    }
    state.survivor = secrets[body.survivor];
    state.survivor_index = body.survivor;
    state.have_survivor = true;

    EntryRequest req{hybrid_encrypt(pp, en_pub, view(body.encode(pp)), rng)};
    return {std::move(req), std::move(state)};
}

EntryAccept en_process_entry_request(const EntryRequest& req,
                                     const Scalar& node_secret,
                                     const GroupKey& gk,
                                     const EpochSignerKeys& sbk,
                                     const HandshakeConfig& cfg, Rng& rng) {
    const GroupParams& pp = gk.params;
    auto body = decrypt_body<EntryRequestBody>(pp, node_secret, req.body);
    verify_entry_body(body, gk, sbk.public_part(), cfg, /*fiat_shamir=*/true);
    return finish_entry_accept(body, sbk, rng, pp);
}

EntryOutcome user_finish_entry(const EntryResponse& resp, UserEntryState& state) {
    const GroupParams& pp = state.params;
    GroupElement shared = dh_shared(pp, state.x1, resp.y1_share);
    Encoder hs;
    encode_element(hs, pp, state.x1_share);
    encode_element(hs, pp, resp.y1_share);
    DerivedKeys dk = derive_keys(pp, shared, view(hs.bytes()));
    if (dk.confirmation != resp.confirmation) fail(ErrorCode::ConfirmMismatch);
    EntryOutcome out;
    out.key = dk.key;
    out.token = bgs_unblind(resp.beta_tilde, state.survivor.r2, state.epoch_key);
    out.verified =
        token_matches_key(pp, state.epoch_key, out.token, state.survivor.com);
    state.k1 = dk.key;
    state.token = out.token;
    state.have_token = true;
    return out;
}

Bytes EntryRound1Body::encode(const GroupParams& pp) const {
    Encoder enc;
    encode_element(enc, pp, x1_share);
    enc.field(sigma1.encode(pp));
    enc.u64(instances.size());
    for (const auto& inst : instances) {
        enc.field(encode_mpz(inst.beta));
        encode_digest(enc, inst.pi);
    }
    return enc.take();
}

EntryRound1Body EntryRound1Body::decode(const GroupParams& pp, ByteView wire) {
    Decoder dec(wire);
    EntryRound1Body body;
    body.x1_share = decode_element(pp, view(dec.field()));
    body.sigma1 = GroupSignature::decode(pp, view(dec.field()));
    std::uint64_t n = dec.u64();
    if (n == 0 || n > kMaxInstances) fail(ErrorCode::ParseError, "bad instances");
    for (std::uint64_t i = 0; i < n; ++i) {
        EntryInstance inst;
        inst.beta = decode_mpz(view(dec.field()));
        inst.pi = decode_digest(view(dec.field()));
        body.instances.push_back(std::move(inst));
    }
    dec.expect_done();
    return body;
}

Bytes EntryRound1::encode(const GroupParams& pp) const {
    return wrap_wire(MsgTag::EntryRound1, view(body.encode(pp)));
}

EntryRound1 EntryRound1::decode(const GroupParams& pp, ByteView wire) {
    Bytes body = expect_tag(MsgTag::EntryRound1, wire);
    return {HybridCiphertext::decode(pp, view(body))};
}

Bytes SurvivorChallenge::encode() const {
    Encoder enc;
    encode_digest(enc, binding);
    enc.u64(survivor);
    return wrap_wire(MsgTag::SurvivorChallenge, view(enc.bytes()));
}

SurvivorChallenge SurvivorChallenge::decode(ByteView wire) {
    Bytes payload = expect_tag(MsgTag::SurvivorChallenge, wire);
    Decoder dec(view(payload));
    SurvivorChallenge out;
    out.binding = decode_digest(view(dec.field()));
    out.survivor = dec.u64();
    dec.expect_done();
    return out;
}

Bytes EntryRound2Body::encode(const GroupParams& pp) const {
    Encoder enc;
    encode_digest(enc, binding);
    enc.u64(survivor);
    enc.u64(openings.size());
    for (const auto& o : openings) encode_opening(enc, pp, o);
    return enc.take();
}

EntryRound2Body EntryRound2Body::decode(const GroupParams& pp, ByteView wire) {
    Decoder dec(wire);
    EntryRound2Body body;
    body.binding = decode_digest(view(dec.field()));
    body.survivor = dec.u64();
    std::uint64_t m = dec.u64();
    if (m > kMaxInstances) fail(ErrorCode::ParseError, "bad openings");
    for (std::uint64_t i = 0; i < m; ++i) {
        body.openings.push_back(decode_opening(pp, dec));
    }
    dec.expect_done();
    return body;
}

Bytes EntryRound2::encode(const GroupParams& pp) const {
    return wrap_wire(MsgTag::EntryRound2, view(body.encode(pp)));
}

EntryRound2 EntryRound2::decode(const GroupParams& pp, ByteView wire) {
    Bytes body = expect_tag(MsgTag::EntryRound2, wire);
    return {HybridCiphertext::decode(pp, view(body))};
}

std::pair<EntryRound1, UserEntryState> build_entry_round1(
    const MemberKey& mk, const GroupKey& gk, const EpochPublicKey& epoch_key,
    const GroupElement& en_pub, const HandshakeConfig& cfg, Rng& rng) {
    const GroupParams& pp = gk.params;
    if (cfg.k < 2 || cfg.k > 64) {
        fail(ErrorCode::MinInstances, "instance count out of range");
    }
    UserEntryState state;
    state.cfg = cfg;
    state.params = pp;
    state.epoch_key = epoch_key;
    state.opk = gk.opk;

    DhKeyPair x1 = dh_keygen(pp, rng);
    state.x1 = x1.secret;
    state.x1_share = x1.share;
    state.sigma1 = gs_sign(view(encode_element(pp, x1.share)), mk, gk, rng,
                           &state.sigma1_rho);
    Bytes transcript = entry_transcript(pp, state.x1_share, state.sigma1);

    EntryRound1Body body;
    body.x1_share = state.x1_share;
    body.sigma1 = state.sigma1;
    for (std::size_t j = 0; j < cfg.k; ++j) {
        state.pending.push_back(
            build_instance(mk, gk, epoch_key, view(transcript), rng));
        body.instances.push_back({state.pending.back().beta,
                                  state.pending.back().pi});
    }
    state.round1_digest = digest_bytes(sha256(view(body.encode(pp))));

    EntryRound1 req{hybrid_encrypt(pp, en_pub, view(body.encode(pp)), rng)};
    return {std::move(req), std::move(state)};
}

std::pair<SurvivorChallenge, PendingEntry> en_process_entry_round1(
    const EntryRound1& req, const Scalar& node_secret, const GroupKey& gk,
    const HandshakeConfig& cfg, Rng& rng) {
    const GroupParams& pp = gk.params;
    auto body = decrypt_body<EntryRound1Body>(pp, node_secret, req.body);
    if (cfg.k < 2) fail(ErrorCode::MinInstances);
    if (body.instances.size() != cfg.k) {
        fail(ErrorCode::CutAndChooseMismatch, "instance count");
    }
    check_sigma1(body.sigma1, body.x1_share, gk, cfg);
    PendingEntry pending;
    pending.binding = sha256(view(body.encode(pp)));
    pending.survivor = rng.next_u64() % cfg.k;
    pending.body = std::move(body);
    SurvivorChallenge challenge{pending.binding, pending.survivor};
    return {challenge, std::move(pending)};
}

EntryRound2 build_entry_round2(UserEntryState& state,
                               const SurvivorChallenge& challenge,
                               const GroupElement& en_pub, Rng& rng) {
    const GroupParams& pp = state.params;
    if (state.pending.size() != state.cfg.k) {
        fail(ErrorCode::CutAndChooseMismatch, "no pending instances");
    }
    if (digest_bytes(challenge.binding) != state.round1_digest) {
        fail(ErrorCode::CutAndChooseMismatch, "challenge binding");
    }
    if (challenge.survivor >= state.cfg.k) {
        fail(ErrorCode::CutAndChooseMismatch, "survivor index");
    }
    EntryRound2Body body;
    body.binding = challenge.binding;
    body.survivor = challenge.survivor;
    for (std::size_t j = 0; j < state.cfg.k; ++j) {
        if (j == challenge.survivor) continue;
        body.openings.push_back(open_instance(pp, state.opk, state.sigma1,
                                              state.sigma1_rho, state.x1_share,
                                              state.pending[j], j, rng));
    }
    state.survivor = state.pending[challenge.survivor];
    state.survivor_index = challenge.survivor;
    state.have_survivor = true;
    state.pending.clear();
    return {hybrid_encrypt(pp, en_pub, view(body.encode(pp)), rng)};
}

EntryAccept en_process_entry_round2(const EntryRound2& req,
                                    const PendingEntry& pending,
                                    const Scalar& node_secret,
                                    const GroupKey& gk,
                                    const EpochSignerKeys& sbk,
                                    const HandshakeConfig& cfg, Rng& rng) {
    const GroupParams& pp = gk.params;
    auto round2 = decrypt_body<EntryRound2Body>(pp, node_secret, req.body);
    if (round2.binding != pending.binding ||
        round2.survivor != pending.survivor) {
        fail(ErrorCode::CutAndChooseMismatch, "challenge binding");
    }
    EntryRequestBody body;
    body.x1_share = pending.body.x1_share;
    body.sigma1 = pending.body.sigma1;
    body.instances = pending.body.instances;
    body.survivor = pending.survivor;
    body.openings = std::move(round2.openings);
    verify_entry_body(body, gk, sbk.public_part(), cfg, /*fiat_shamir=*/false);
    return finish_entry_accept(body, sbk, rng, pp);
}

bool ReplayCache::check_and_insert(const Bytes& com_encoding,
                                   std::uint64_t epoch) {
    auto [it, inserted] = seen_.try_emplace(com_encoding, epoch);
    return inserted;
}

void ReplayCache::purge(std::uint64_t current_epoch, std::uint64_t window) {
    for (auto it = seen_.begin(); it != seen_.end();) {
        if (current_epoch > it->second && current_epoch - it->second > window) {
            it = seen_.erase(it);
        } else {
            ++it;
        }
    }
}

ExitRequest build_exit_request(const UserEntryState& state,
                               const GroupElement& ex_pub, Rng& rng) {
    if (!state.have_token) fail(ErrorCode::NoToken);
    const GroupParams& pp = state.params;
    ExitRequestBody body;
    body.x2_share = state.survivor.x2_share;
    body.sigma2 = state.survivor.sigma2;
    body.r1 = state.survivor.r1;
    body.token = state.token;
    return {hybrid_encrypt(pp, ex_pub, view(body.encode(pp)), rng)};
}

ExitAccept ex_process_exit_request(const ExitRequest& req,
                                   const Scalar& node_secret,
                                   const GroupKey& gk,
                                   const EpochKeyStore& store,
                                   ReplayCache& cache,
                                   std::uint64_t current_epoch,
                                   const HandshakeConfig& cfg, Rng& rng) {
    const GroupParams& pp = gk.params;
    auto body = decrypt_body<ExitRequestBody>(pp, node_secret, req.body);
    if (!gs_verify(body.sigma2, view(encode_element(pp, body.x2_share)), gk,
                   cfg.gk_window)) {
        fail(ErrorCode::SigInvalid);
    }
    Commitment com = commit(pp, sig2_scalar(pp, body.sigma2), body.r1);
    TokenCheck check = TokenCheck::BadSignature;
    try {
        check = bgs_check(pp, body.token, com, store, current_epoch,
                          cfg.epoch_window);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::UnknownEpoch) fail(ErrorCode::TokenExpired);
        throw;
    }
    if (check == TokenCheck::Expired) fail(ErrorCode::TokenExpired);
    if (check == TokenCheck::BadSignature) fail(ErrorCode::TokenInvalid);
    if (!cache.check_and_insert(encode_commitment(pp, com), current_epoch)) {
        fail(ErrorCode::Replayed);
    }

    ExitAccept out;
    DhKeyPair y2 = dh_keygen(pp, rng);
    GroupElement shared = power(pp, body.x2_share, y2.secret);
    Encoder hs;
    encode_element(hs, pp, body.x2_share);
    encode_element(hs, pp, y2.share);
    DerivedKeys dk = derive_keys(pp, shared, view(hs.bytes()));
    out.response = {y2.share, dk.confirmation};
    out.output = {body.x2_share, y2.share,    y2.secret, shared,
                  dk.key,        body.sigma2, com,       body.r1,
                  body.token.epoch};
    return out;
}

SymmetricKey user_finish_exit(const ExitResponse& resp,
                              const UserEntryState& state) {
    const GroupParams& pp = state.params;
    GroupElement shared = dh_shared(pp, state.survivor.x2, resp.y2_share);
    Encoder hs;
    encode_element(hs, pp, state.survivor.x2_share);
    encode_element(hs, pp, resp.y2_share);
    DerivedKeys dk = derive_keys(pp, shared, view(hs.bytes()));
    if (dk.confirmation != resp.confirmation) fail(ErrorCode::ConfirmMismatch);
    return dk.key;
}

Bytes PlainResponse::encode(const GroupParams& pp) const {
    Encoder enc;
    encode_element(enc, pp, share);
    encode_digest(enc, confirmation);
    return wrap_wire(MsgTag::PlainResponse, view(enc.bytes()));
}

PlainResponse PlainResponse::decode(const GroupParams& pp, ByteView wire) {
    Bytes payload = expect_tag(MsgTag::PlainResponse, wire);
    Decoder dec(view(payload));
    PlainResponse resp;
    resp.share = decode_element(pp, view(dec.field()));
    resp.confirmation = decode_digest(view(dec.field()));
    dec.expect_done();
    return resp;
}

PlainInit plain_initiate(const GroupParams& pp, Rng& rng) {
    DhKeyPair kp = dh_keygen(pp, rng);
    return {kp.secret, kp.share};
}

std::pair<PlainResponse, SymmetricKey> plain_respond(const GroupParams& pp,
                                                     const GroupElement& peer,
                                                     Rng& rng) {
    DhKeyPair kp = dh_keygen(pp, rng);
    GroupElement shared = dh_shared(pp, kp.secret, peer);
    Encoder hs;
    encode_element(hs, pp, peer);
    encode_element(hs, pp, kp.share);
    DerivedKeys dk = derive_keys(pp, shared, view(hs.bytes()));
    return {{kp.share, dk.confirmation}, dk.key};
}

SymmetricKey plain_finish(const GroupParams& pp, const PlainInit& init,
                          const PlainResponse& resp) {
    GroupElement shared = dh_shared(pp, init.secret, resp.share);
    Encoder hs;
    encode_element(hs, pp, init.share);
    encode_element(hs, pp, resp.share);
    DerivedKeys dk = derive_keys(pp, shared, view(hs.bytes()));
    if (dk.confirmation != resp.confirmation) fail(ErrorCode::ConfirmMismatch);
    return dk.key;
}

std::pair<SymmetricKey, SymmetricKey> plain_handshake(const GroupParams& pp,
                                                      Rng& rng) {
    PlainInit init = plain_initiate(pp, rng);
    auto [resp, node_key] = plain_respond(pp, init.share, rng);
    SymmetricKey user_key = plain_finish(pp, init, resp);
    return {user_key, node_key};
}

Bytes onion_wrap(ByteView cell, const std::vector<SymmetricKey>& keys,
                 Rng& rng) {
    Bytes data(cell.begin(), cell.end());
    for (auto it = keys.rbegin(); it != keys.rend(); ++it) {
        data = seal(*it, view(data), rng).encode();
    }
    return data;
}

Bytes onion_unwrap_layer(const SymmetricKey& key, ByteView wire) {
    return open_sealed(key, Sealed::decode(wire));
}

}  // namespace fairtor
