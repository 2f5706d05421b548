#include "fairtor/groupsig.hpp"

#include <algorithm>
#include <limits>

#include "fairtor/errors.hpp"

namespace fairtor {

namespace {

bool pow_check(ByteView challenge, std::uint64_t nonce, unsigned difficulty) {
    Bytes input(challenge.begin(), challenge.end());
    put_u64(input, nonce);
    Digest d = hash(to_bytes("pow"), view(input));
    unsigned zeros = 0;
    for (std::uint8_t byte : d) {
        if (byte == 0) {
            zeros += 8;
            continue;
        }
        for (int bit = 7; bit >= 0 && !(byte >> bit & 1); --bit) ++zeros;
        break;
    }
    return zeros >= difficulty;
}

Scalar uniform_scalar(const GroupParams& pp, Rng& rng) {
    return {random_below(pp.q, rng)};
}

// Branch j of the membership proof: commitments recomputed from the stored
// challenge/response scalars.
//   a1 = g_op^{z_rho} / C1^{c},  a2 = OPK^{z_rho} / (C2/T_j)^{c},
//   a3 = h^{z_s} / T_j^{c}
void branch_commitments(const GroupParams& pp, const GroupElement& opk,
                        const GroupElement& tag, const ElGamalCt& ct,
                        const Scalar& c, const Scalar& z_rho, const Scalar& z_s,
                        GroupElement* out) {
    GroupElement ratio = div(pp, ct.c2, tag);
    out[0] = div(pp, power(pp, base_opener(pp), z_rho), power(pp, ct.c1, c));
    out[1] = div(pp, power(pp, opk, z_rho), power(pp, ratio, c));
    out[2] = div(pp, power(pp, base_h(pp), z_s), power(pp, tag, c));
}

Scalar proof_challenge(const GroupParams& pp, const ElGamalCt& ct,
                       std::uint64_t version, const Digest& digest, ByteView msg,
                       const std::vector<GroupElement>& commitments) {
    Encoder enc;
    encode_element(enc, pp, ct.c1);
    encode_element(enc, pp, ct.c2);
    enc.u64(version);
    enc.field(ByteView(digest.data(), digest.size()));
    enc.field(msg);
    for (const auto& a : commitments) encode_element(enc, pp, a);
    return hash_to_scalar(pp, to_bytes("gs.challenge"), view(enc.bytes()));
}

bool proof_verifies(const GroupParams& pp, const GroupElement& opk,
                    const std::vector<GroupElement>& tags,
                    const GroupSignature& sig, ByteView msg, par::Mode mode) {
    std::size_t n = tags.size();
    if (n == 0) return false;
    if (sig.challenges.size() != n || sig.rho_responses.size() != n ||
        sig.tag_responses.size() != n) {
        return false;
    }
    if (!in_subgroup(pp, sig.ct.c1.v) || !in_subgroup(pp, sig.ct.c2.v)) {
        return false;
    }
    auto commitments =
        detail::gs_branch_commitments(pp, opk, tags, sig, mode);
    Scalar expect = proof_challenge(pp, sig.ct, sig.version, sig.version_digest,
                                    msg, commitments);
    Scalar sum{0};
    for (const auto& c : sig.challenges) sum = scalar_add(pp, sum, c);
    return sum == expect;
}

bool contains_tag(const std::vector<GroupElement>& tags, const GroupElement& t) {
    return std::find(tags.begin(), tags.end(), t) != tags.end();
}

void publish_version(GroupManagerKey& mk, GroupKey& gk,
                     std::vector<GroupElement> tags) {
    AllowedSetVersion next;
    next.version = gk.version() + 1;
    next.tags = std::move(tags);
    next.digest = allowed_set_digest(gk.params, next.version, next.tags);
    gk.history.push_back(std::move(next));
    mk.version = gk.version();
}

}  // namespace

PowSolution pow_solve(const PowPuzzle& puzzle) {
    return pow_solve(puzzle, par::default_mode());
}

PowSolution pow_solve(const PowPuzzle& puzzle, par::Mode mode) {
    ByteView challenge = view(puzzle.challenge);
    if (mode == par::Mode::Serial) {
        for (std::uint64_t nonce = 0;; ++nonce) {
            if (pow_check(challenge, nonce, puzzle.difficulty)) return {nonce};
        }
    }
    // Chunked scan keeping the smallest qualifying nonce, so the answer
    // matches the sequential search exactly.
    constexpr std::uint64_t kChunk = 1 << 13;
    constexpr std::uint64_t kMiss = std::numeric_limits<std::uint64_t>::max();
    for (std::uint64_t base = 0;; base += kChunk) {
        std::uint64_t best = kMiss;
#if defined(_OPENMP)
#pragma omp parallel for schedule(static) reduction(min : best)
#endif
        for (long long i = 0; i < static_cast<long long>(kChunk); ++i) {
            std::uint64_t nonce = base + static_cast<std::uint64_t>(i);
            if (pow_check(challenge, nonce, puzzle.difficulty) && nonce < best) {
                best = nonce;
            }
        }
        if (best != kMiss) return {best};
    }
}

bool pow_verify(const PowPuzzle& puzzle, const PowSolution& sol) {
    return pow_check(view(puzzle.challenge), sol.nonce, puzzle.difficulty);
}

Digest allowed_set_digest(const GroupParams& pp, std::uint64_t version,
                          const std::vector<GroupElement>& tags) {
    Bytes input;
    put_u64(input, version);
    for (const auto& t : tags) {
        Bytes enc = encode_element(pp, t);
        input.insert(input.end(), enc.begin(), enc.end());
    }
    return hash(to_bytes("gk.version"), view(input));
}

const AllowedSetVersion* GroupKey::at_version(std::uint64_t v) const {
    if (v >= history.size()) return nullptr;
    return &history[v];
}

Bytes GroupKey::encode() const {
    Encoder enc;
    enc.field(encode_params(params));
    encode_element(enc, params, opk);
    enc.u64(history.size());
    for (const auto& snap : history) {
        enc.u64(snap.version);
        enc.field(ByteView(snap.digest.data(), snap.digest.size()));
        enc.u64(snap.tags.size());
        for (const auto& t : snap.tags) encode_element(enc, params, t);
    }
    return enc.take();
}

GroupKey GroupKey::decode(ByteView wire) {
    Decoder dec(wire);
    GroupKey gk;
    gk.params = decode_params(view(dec.field()));
    gk.opk = decode_element(gk.params, view(dec.field()));
    std::uint64_t count = dec.u64();
    if (count == 0 || count > 1u << 20) fail(ErrorCode::ParseError, "bad history");
    for (std::uint64_t v = 0; v < count; ++v) {
        AllowedSetVersion snap;
        snap.version = dec.u64();
        if (snap.version != v) fail(ErrorCode::ParseError, "version gap");
        Bytes digest = dec.field();
        if (digest.size() != snap.digest.size()) {
            fail(ErrorCode::ParseError, "bad digest");
        }
        std::copy(digest.begin(), digest.end(), snap.digest.begin());
        std::uint64_t tags = dec.u64();
        if (tags > 1u << 20) fail(ErrorCode::ParseError, "bad tag count");
        for (std::uint64_t i = 0; i < tags; ++i) {
            snap.tags.push_back(decode_element(gk.params, view(dec.field())));
        }
        if (snap.digest != allowed_set_digest(gk.params, snap.version, snap.tags)) {
            fail(ErrorCode::ParseError, "digest mismatch");
        }
        gk.history.push_back(std::move(snap));
    }
    dec.expect_done();
    return gk;
}

std::pair<GroupManagerKey, GroupKey> gs_setup(const GroupParams& pp, Rng& rng) {
    GroupManagerKey mk;
    mk.params = pp;
    mk.opener_secret = random_scalar(pp, rng);
    GroupKey gk;
    gk.params = pp;
    gk.opk = power(pp, base_opener(pp), mk.opener_secret);
    AllowedSetVersion v0;
    v0.version = 0;
    v0.digest = allowed_set_digest(pp, 0, {});
    gk.history.push_back(std::move(v0));
    return {std::move(mk), std::move(gk)};
}

PowPuzzle gs_issue_puzzle(GroupManagerKey& mk, Rng& rng) {
    PowPuzzle puzzle;
    puzzle.challenge = rng.bytes(32);
    puzzle.difficulty = mk.pow_difficulty;
    mk.outstanding.push_back(puzzle);
    return puzzle;
}

Bytes JoinRequest::encode(const GroupParams& pp) const {
    Encoder enc;
    encode_element(enc, pp, tag);
    enc.field(proof.encode(pp));
    enc.field(challenge);
    enc.u64(solution.nonce);
    return enc.take();
}

JoinRequest JoinRequest::decode(const GroupParams& pp, ByteView wire) {
    Decoder dec(wire);
    JoinRequest req;
    req.tag = decode_element(pp, view(dec.field()));
    req.proof = SigmaProof::decode(pp, view(dec.field()));
    req.challenge = dec.field();
    req.solution.nonce = dec.u64();
    dec.expect_done();
    return req;
}

JoinRequest make_join_request(const GroupParams& pp, const Scalar& secret,
                              const PowPuzzle& puzzle, const PowSolution& sol,
                              Rng& rng) {
    JoinRequest req;
    req.tag = power(pp, base_h(pp), secret);
    req.proof = sigma_prove(pp, DlogStatement{base_h(pp), req.tag}, secret,
                            view(puzzle.challenge), rng);
    req.challenge = puzzle.challenge;
    req.solution = sol;
    return req;
}

std::uint64_t gs_process_join(GroupManagerKey& mk, GroupKey& gk,
                              const JoinRequest& req) {
    auto issued = std::find_if(
        mk.outstanding.begin(), mk.outstanding.end(),
        [&](const PowPuzzle& p) { return p.challenge == req.challenge; });
    if (issued == mk.outstanding.end()) {
        fail(ErrorCode::PowInvalid, "puzzle was not issued");
    }
    if (!pow_verify(*issued, req.solution)) fail(ErrorCode::PowInvalid);
    if (!in_subgroup(mk.params, req.tag.v) ||
        !sigma_verify(mk.params, DlogStatement{base_h(mk.params), req.tag},
                      req.proof, view(req.challenge))) {
        fail(ErrorCode::ProofInvalid);
    }
    for (const auto& entry : mk.registry) {
        if (entry.tag == req.tag) fail(ErrorCode::DuplicateTag);
    }
    mk.outstanding.erase(issued);
    std::uint64_t id = mk.next_id++;
    mk.registry.push_back({id, req.tag});
    std::vector<GroupElement> tags = gk.allowed_set();
    tags.push_back(req.tag);
    publish_version(mk, gk, std::move(tags));
    return id;
}

MemberKey gs_join(GroupManagerKey& mk, GroupKey& gk, const Scalar& secret,
                  const PowPuzzle& puzzle, const PowSolution& sol, Rng& rng) {
    JoinRequest req = make_join_request(gk.params, secret, puzzle, sol, rng);
    std::uint64_t id = gs_process_join(mk, gk, req);
    return {secret, req.tag, id};
}

GroupSignature gs_sign(ByteView msg, const MemberKey& mk_i, const GroupKey& gk,
                       Rng& rng, Scalar* rho_out) {
    const GroupParams& pp = gk.params;
    const auto& tags = gk.allowed_set();
    auto self = std::find(tags.begin(), tags.end(), mk_i.tag);
    if (self == tags.end()) fail(ErrorCode::NotInAllowedSet);
    std::size_t mine = static_cast<std::size_t>(self - tags.begin());
    std::size_t n = tags.size();

    GroupSignature sig;
    sig.version = gk.version();
    sig.version_digest = gk.version_digest();
    Scalar rho = random_scalar(pp, rng);
    if (rho_out != nullptr) *rho_out = rho;
    sig.ct = elgamal_encrypt(pp, base_opener(pp), gk.opk, mk_i.tag, rho);
    sig.challenges.resize(n);
    sig.rho_responses.resize(n);
    sig.tag_responses.resize(n);

    // Simulated branches pick responses first and derive commitments; the
    // real branch commits honestly and answers whatever challenge is left.
    std::vector<GroupElement> commitments(3 * n);
    for (std::size_t j = 0; j < n; ++j) {
        if (j == mine) continue;
        sig.challenges[j] = uniform_scalar(pp, rng);
        sig.rho_responses[j] = uniform_scalar(pp, rng);
        sig.tag_responses[j] = uniform_scalar(pp, rng);
        branch_commitments(pp, gk.opk, tags[j], sig.ct, sig.challenges[j],
                           sig.rho_responses[j], sig.tag_responses[j],
                           &commitments[3 * j]);
    }
    Scalar u = uniform_scalar(pp, rng);
    Scalar v = uniform_scalar(pp, rng);
    commitments[3 * mine] = power(pp, base_opener(pp), u);
    commitments[3 * mine + 1] = power(pp, gk.opk, u);
    commitments[3 * mine + 2] = power(pp, base_h(pp), v);

    Scalar total = proof_challenge(pp, sig.ct, sig.version, sig.version_digest,
                                   msg, commitments);
    Scalar others{0};
    for (std::size_t j = 0; j < n; ++j) {
        if (j != mine) others = scalar_add(pp, others, sig.challenges[j]);
    }
    Scalar mine_c = scalar_sub(pp, total, others);
    sig.challenges[mine] = mine_c;
    sig.rho_responses[mine] = scalar_add(pp, u, scalar_mul(pp, mine_c, rho));
    sig.tag_responses[mine] =
        scalar_add(pp, v, scalar_mul(pp, mine_c, mk_i.secret));
    return sig;
}

bool gs_verify(const GroupSignature& sig, ByteView msg, const GroupKey& gk,
               std::uint64_t window) {
    return gs_verify(sig, msg, gk, window, par::default_mode());
}

bool gs_verify(const GroupSignature& sig, ByteView msg, const GroupKey& gk,
               std::uint64_t window, par::Mode mode) {
    const AllowedSetVersion* snap = gk.at_version(sig.version);
    if (snap == nullptr) return false;
    if (gk.version() - sig.version > window) return false;
    if (sig.version_digest != snap->digest) return false;
    // A signature from an older set stays valid only while every tag of that
    // set is still allowed; revocation therefore takes effect immediately,
    // window or not.
    for (const auto& t : snap->tags) {
        if (!contains_tag(gk.allowed_set(), t)) return false;
    }
    return proof_verifies(gk.params, gk.opk, snap->tags, sig, msg, mode);
}

bool gs_verify_historic(const GroupSignature& sig, ByteView msg,
                        const GroupKey& gk) {
    const AllowedSetVersion* snap = gk.at_version(sig.version);
    if (snap == nullptr) return false;
    if (sig.version_digest != snap->digest) return false;
    return proof_verifies(gk.params, gk.opk, snap->tags, sig, msg,
                          par::default_mode());
}

GroupElement gs_open(const GroupSignature& sig, const GroupManagerKey& mk) {
    if (!in_subgroup(mk.params, sig.ct.c1.v) ||
        !in_subgroup(mk.params, sig.ct.c2.v)) {
        fail(ErrorCode::UnknownTag, "malformed ciphertext");
    }
    GroupElement tag = elgamal_decrypt(mk.params, mk.opener_secret, sig.ct);
    for (const auto& entry : mk.registry) {
        if (entry.tag == tag) return tag;
    }
    fail(ErrorCode::UnknownTag);
}

bool gs_trace(const GroupSignature& sig, const GroupManagerKey& mk,
              const GroupElement& target) {
    try {
        return gs_open(sig, mk) == target;
    } catch (const Error& e) {
        if (e.code() == ErrorCode::UnknownTag) return false;
        throw;
    }
}

void gs_revoke(GroupManagerKey& mk, GroupKey& gk, const GroupElement& tag) {
    bool registered = false;
    for (const auto& entry : mk.registry) registered |= entry.tag == tag;
    if (!registered) fail(ErrorCode::NotFound);
    std::vector<GroupElement> tags = gk.allowed_set();
    auto it = std::find(tags.begin(), tags.end(), tag);
    if (it == tags.end()) fail(ErrorCode::AlreadyRevoked);
    tags.erase(it);
    publish_version(mk, gk, std::move(tags));
    mk.revoked.push_back(tag);
}

Bytes encode_revocation_list(const GroupParams& pp, std::uint64_t version,
                             const std::vector<GroupElement>& tags) {
    Encoder enc;
    enc.u64(version);
    enc.u64(tags.size());
    for (const auto& t : tags) encode_element(enc, pp, t);
    return enc.take();
}

std::pair<std::uint64_t, std::vector<GroupElement>> decode_revocation_list(
    const GroupParams& pp, ByteView wire) {
    Decoder dec(wire);
    std::uint64_t version = dec.u64();
    std::uint64_t count = dec.u64();
    if (count > 1u << 20) fail(ErrorCode::ParseError, "bad tag count");
    std::vector<GroupElement> tags;
    for (std::uint64_t i = 0; i < count; ++i) {
        tags.push_back(decode_element(pp, view(dec.field())));
    }
    dec.expect_done();
    return {version, std::move(tags)};
}

Bytes GroupSignature::encode(const GroupParams& pp) const {
    Encoder enc;
    encode_element(enc, pp, ct.c1);
    encode_element(enc, pp, ct.c2);
    enc.u64(version);
    enc.field(ByteView(version_digest.data(), version_digest.size()));
    enc.u64(challenges.size());
    for (std::size_t j = 0; j < challenges.size(); ++j) {
        encode_scalar(enc, pp, challenges[j]);
        encode_scalar(enc, pp, rho_responses[j]);
        encode_scalar(enc, pp, tag_responses[j]);
    }
    return enc.take();
}

GroupSignature GroupSignature::decode(const GroupParams& pp, ByteView wire) {
    Decoder dec(wire);
    GroupSignature sig;
    sig.ct.c1 = decode_element(pp, view(dec.field()));
    sig.ct.c2 = decode_element(pp, view(dec.field()));
    sig.version = dec.u64();
    Bytes digest = dec.field();
    if (digest.size() != sig.version_digest.size()) {
        fail(ErrorCode::ParseError, "bad digest");
    }
    std::copy(digest.begin(), digest.end(), sig.version_digest.begin());
    std::uint64_t n = dec.u64();
    if (n == 0 || n > 1u << 16) fail(ErrorCode::ParseError, "bad branch count");
    for (std::uint64_t j = 0; j < n; ++j) {
        sig.challenges.push_back(decode_scalar(pp, view(dec.field())));
        sig.rho_responses.push_back(decode_scalar(pp, view(dec.field())));
        sig.tag_responses.push_back(decode_scalar(pp, view(dec.field())));
    }
    dec.expect_done();
    return sig;
}

namespace detail {

std::vector<GroupElement> gs_branch_commitments(
    const GroupParams& pp, const GroupElement& opk,
    const std::vector<GroupElement>& tags, const GroupSignature& sig,
    par::Mode mode) {
    std::vector<GroupElement> out(3 * tags.size());
    par::parallel_for(tags.size(), mode, [&](std::size_t j) {
        branch_commitments(pp, opk, tags[j], sig.ct, sig.challenges[j],
                           sig.rho_responses[j], sig.tag_responses[j],
                           &out[3 * j]);
    });
    return out;
}

}  // namespace detail

}  // namespace fairtor
