#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>

#include "fairtor/crypto.hpp"
#include "fairtor/errors.hpp"
#include "fairtor/group.hpp"
#include "fairtor/rng.hpp"
#include "fairtor/sha256.hpp"
#include "oracle.hpp"
#include "test_support.hpp"

using namespace fairtor;

namespace {

std::string hex_digest(const Digest& d) {
    return to_hex(ByteView(d.data(), d.size()));
}

std::uint64_t u64_of(const GroupElement& e) { return e.v.get_ui(); }

}  // namespace

TEST_CASE("sha256 standard vectors") {
    CHECK(hex_digest(sha256({})) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    Bytes abc = to_bytes("abc");
    CHECK(hex_digest(sha256(view(abc))) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");

    // One million 'a' bytes, fed in uneven chunks to exercise buffering.
    Sha256 st;
    Bytes chunk(997, 'a');
    std::size_t total = 0;
    while (total + chunk.size() <= 1000000) {
        st.update(view(chunk));
        total += chunk.size();
    }
    Bytes rest(1000000 - total, 'a');
    st.update(view(rest));
    CHECK(hex_digest(st.finish()) ==
          "cdc76e5c9914fb9281a1c7e284d73e67f1809a48a497200e046d39ccc7112cd0");
}

TEST_CASE("labelled hash is length-prefixed") {
    CHECK(hex_digest(hash({}, {})) ==
          "df3f619804a92fdb4057192dc43dd748ea778adc52bc498ce80524c014b81119");
    Bytes key = to_bytes("key");
    CHECK(hex_digest(hash(view(key), {})) ==
          "7e8a5cb1e89d0bd77e124e67116aab8793b2b3735886d8730d3f70e9550602c6");
    Bytes label = to_bytes("fairtor");
    Bytes abc = to_bytes("abc");
    CHECK(hex_digest(hash(view(label), view(abc))) ==
          "69d6325e05b21c740473a2bb6c0fee65d87eaed13575016915b865e3af3450a9");

    // The length prefix keeps (label, data) splits apart.
    Bytes ab = to_bytes("ab"), c = to_bytes("c"), a = to_bytes("a"),
          bc = to_bytes("bc");
    CHECK(hash(view(ab), view(c)) != hash(view(a), view(bc)));
}

TEST_CASE("hex codec") {
    Bytes b = {0x00, 0x7f, 0xff, 0x10};
    CHECK(to_hex(view(b)) == "007fff10");
    CHECK(from_hex("007fff10") == b);
    CHECK(from_hex("") == Bytes{});
    CHECK_THROWS_AS(from_hex("0g"), Error);
    CHECK_THROWS_AS(from_hex("abc"), Error);  // odd length
}

TEST_CASE("length-prefixed encoder round trips and rejects damage") {
    Encoder enc;
    enc.field(to_bytes("hello"));
    enc.u64(0x0123456789abcdefULL);
    enc.field(Bytes{});
    Bytes wire = enc.take();

    Decoder dec(view(wire));
    CHECK(dec.field() == to_bytes("hello"));
    CHECK(dec.u64() == 0x0123456789abcdefULL);
    CHECK(dec.field() == Bytes{});
    CHECK(dec.done());
    dec.expect_done();

    Bytes cut(wire.begin(), wire.end() - 1);
    Decoder dtrunc(view(cut));
    dtrunc.field();
    dtrunc.u64();
    CHECK_THROWS_AS(dtrunc.field(), Error);

    Bytes extra = wire;
    extra.push_back(0);
    Decoder dtrail(view(extra));
    dtrail.field();
    dtrail.u64();
    dtrail.field();
    CHECK_FALSE(dtrail.done());
    CHECK_THROWS_AS(dtrail.expect_done(), Error);

    Bytes lone = {9};  // not even a length prefix
    Decoder dshort(view(lone));
    CHECK_THROWS_AS(dshort.field(), Error);
}

TEST_CASE("deterministic rng streams and forks") {
    Rng a(42), b(42), c(43);
    CHECK(a.next_u64() == b.next_u64());
    CHECK(a.bytes(16) == b.bytes(16));
    CHECK(a.next_u64() != c.next_u64());

    Rng p(7);
    CHECK(p.fork(1).next_u64() == Rng(7).fork(1).next_u64());
    CHECK(p.fork(1).next_u64() != p.fork(2).next_u64());
    // Forking does not disturb the parent stream.
    Rng q(7);
    (void)q.fork(9);
    CHECK(q.next_u64() == Rng(7).next_u64());
}

TEST_CASE("small group arithmetic matches the integer oracle") {
    GroupParams pp = GroupParams::tiny();
    REQUIRE(pp.p == 23);
    REQUIRE(pp.q == 11);
    CHECK(pp.valid());
    CHECK(pp.element_width() == 1);
    CHECK(pp.scalar_width() == 1);

    CHECK(u64_of(power(pp, generator(pp), scalar_from(pp, 5))) ==
          oracle::powmod(4, 5, 23));
    CHECK(u64_of(power(pp, GroupElement{16}, scalar_from(pp, 3))) == 2);
    CHECK(u64_of(mul(pp, GroupElement{12}, GroupElement{9})) ==
          oracle::mulmod(12, 9, 23));
    CHECK(u64_of(inverse(pp, GroupElement{9})) == oracle::modinv(9, 23));

    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        Scalar a = random_scalar(pp, rng);
        Scalar b = random_scalar(pp, rng);
        std::uint64_t ua = a.v.get_ui(), ub = b.v.get_ui();
        GroupElement ga = power(pp, generator(pp), a);
        CHECK(u64_of(ga) == oracle::powmod(4, ua, 23));
        CHECK(u64_of(power(pp, ga, b)) ==
              oracle::powmod(oracle::powmod(4, ua, 23), ub, 23));
        CHECK(u64_of(div(pp, ga, base_h(pp))) ==
              oracle::mulmod(u64_of(ga), oracle::modinv(9, 23), 23));
        CHECK(scalar_add(pp, a, b).v.get_ui() == (ua + ub) % 11);
        CHECK(scalar_mul(pp, a, b).v.get_ui() == oracle::mulmod(ua, ub, 11));
    }
}

TEST_CASE("subgroup membership") {
    GroupParams pp = GroupParams::tiny();
    // Quadratic residues mod 23 form the order-11 subgroup.
    std::uint64_t members = 0;
    for (std::uint64_t v = 1; v < 23; ++v) {
        bool expect = oracle::powmod(v, 11, 23) == 1;
        CHECK(in_subgroup(pp, mpz_class(static_cast<unsigned long>(v))) == expect);
        members += expect;
    }
    CHECK(members == 11);
    CHECK_FALSE(in_subgroup(pp, 0));
    CHECK_FALSE(in_subgroup(pp, 23));
    CHECK_FALSE(in_subgroup(pp, 5));

    CHECK(in_subgroup(pp, pp.g));
    CHECK(in_subgroup(pp, pp.h));
    CHECK(in_subgroup(pp, pp.opener_base));
}

TEST_CASE("fixed generators of the shipped parameter sets") {
    for (const GroupParams& pp : {GroupParams::tiny(), GroupParams::desk()}) {
        CHECK(pp.valid());
        for (const GroupElement& e :
             {generator(pp), base_h(pp), base_opener(pp)}) {
            CHECK(in_subgroup(pp, e.v));
            CHECK(e.v != 1);
            CHECK(u64_of(power(pp, e, Scalar{pp.q})) == 1);
        }
        GroupElement he = hash_to_element(pp, view(to_bytes("x")), view(to_bytes("y")));
        CHECK(in_subgroup(pp, he.v));
        Scalar hs = hash_to_scalar(pp, view(to_bytes("x")), view(to_bytes("y")));
        CHECK(hs.v < pp.q);
        CHECK(hash_to_element(pp, view(to_bytes("x")), view(to_bytes("y"))).v == he.v);
        CHECK(hash_to_element(pp, view(to_bytes("x")), view(to_bytes("z"))).v != he.v);
    }
    CHECK(GroupParams::tiny().g == 4);
    CHECK(GroupParams::tiny().h == 9);
    CHECK(GroupParams::tiny().opener_base == 2);
}

TEST_CASE("fixed-width integer codec") {
    GroupParams pp = GroupParams::desk();
    Rng rng(5);
    for (int i = 0; i < 20; ++i) {
        Scalar s = random_scalar(pp, rng);
        Bytes raw = mpz_to_fixed(s.v, pp.scalar_width());
        CHECK(raw.size() == pp.scalar_width());
        CHECK(mpz_from_bytes(view(raw)) == s.v);
    }
    CHECK(mpz_from_bytes(view(mpz_to_fixed(0, 4))) == 0);

    Bytes one_wide = mpz_to_fixed(7, 1);
    CHECK(one_wide == Bytes{7});
    CHECK_THROWS_AS(mpz_to_fixed(256, 1), std::invalid_argument);  // too wide
}

TEST_CASE("element and scalar codecs reject out-of-group values") {
    GroupParams pp = GroupParams::tiny();
    GroupElement e{13};
    Bytes payload = mpz_to_fixed(e.v, pp.element_width());
    CHECK(decode_element(pp, view(payload)).v == 13);

    Bytes bad = mpz_to_fixed(5, pp.element_width());  // not a residue
    CHECK_THROWS_AS(decode_element(pp, view(bad)), Error);
    Bytes wide(2, 0);
    CHECK_THROWS_AS(decode_element(pp, view(wide)), Error);

    Bytes s = mpz_to_fixed(10, pp.scalar_width());
    CHECK(decode_scalar(pp, view(s)).v == 10);
    Bytes big = mpz_to_fixed(11, pp.scalar_width());  // == q
    CHECK_THROWS_AS(decode_scalar(pp, view(big)), Error);
}

TEST_CASE("group parameter codec round trips") {
    for (const GroupParams& pp : {GroupParams::tiny(), GroupParams::desk()}) {
        Bytes wire = encode_params(pp);
        GroupParams back = decode_params(view(wire));
        CHECK(back.p == pp.p);
        CHECK(back.q == pp.q);
        CHECK(back.g == pp.g);
        CHECK(back.h == pp.h);
        CHECK(back.opener_base == pp.opener_base);
    }
    CHECK_THROWS_AS(decode_params(view(to_bytes("junk"))), Error);
}

TEST_CASE("generated parameters are valid and deterministic per seed") {
    Rng rng(11);
    GroupParams pp = GroupParams::generate(64, rng);
    CHECK(pp.valid());
    Rng rng2(11);
    GroupParams pp2 = GroupParams::generate(64, rng2);
    CHECK(pp.p == pp2.p);
    CHECK(pp.g == pp2.g);
}

TEST_CASE("diffie-hellman agreement") {
    for (const GroupParams& pp : {GroupParams::tiny(), GroupParams::desk()}) {
        Rng rng(3);
        DhKeyPair a = dh_keygen(pp, rng);
        DhKeyPair b = dh_keygen(pp, rng);
        GroupElement kab = dh_shared(pp, a.secret, b.share);
        GroupElement kba = dh_shared(pp, b.secret, a.share);
        CHECK(kab.v == kba.v);
        CHECK(in_subgroup(pp, kab.v));
    }

    GroupParams tiny = GroupParams::tiny();
    Rng rng(3);
    DhKeyPair a = dh_keygen(tiny, rng);
    std::uint64_t sa = a.secret.v.get_ui();
    DhKeyPair b = dh_keygen(tiny, rng);
    std::uint64_t sb = b.secret.v.get_ui();
    CHECK(u64_of(dh_shared(tiny, a.secret, b.share)) ==
          oracle::powmod(4, oracle::mulmod(sa, sb, 11), 23));
    CHECK_THROWS_AS(dh_shared(tiny, a.secret, GroupElement{5}), Error);
}

TEST_CASE("key derivation is deterministic and transcript-bound") {
    GroupParams pp = GroupParams::tiny();
    GroupElement shared{8};
    Bytes t1 = to_bytes("transcript-1"), t2 = to_bytes("transcript-2");
    DerivedKeys a = derive_keys(pp, shared, view(t1));
    DerivedKeys b = derive_keys(pp, shared, view(t1));
    CHECK(a.key == b.key);
    CHECK(a.confirmation == b.confirmation);
    DerivedKeys c = derive_keys(pp, shared, view(t2));
    CHECK_FALSE(a.key == c.key);
    DerivedKeys d = derive_keys(pp, GroupElement{9}, view(t1));
    CHECK_FALSE(a.key == d.key);
    CHECK(a.key.k != Digest{});  // not the all-zero key
}

TEST_CASE("authenticated sealing") {
    SymmetricKey k;
    k.k.fill(0x11);
    Rng rng(9);
    Bytes msg = to_bytes("attack at dawn");
    Sealed box = seal(k, view(msg), rng);
    CHECK(open_sealed(k, box) == msg);
    CHECK(box.ciphertext.size() == msg.size());
    CHECK(box.ciphertext != msg);

    Sealed wrong = box;
    wrong.ciphertext[0] ^= 1;
    CHECK_THROWS_AS(open_sealed(k, wrong), Error);
    wrong = box;
    wrong.tag[0] ^= 1;
    CHECK_THROWS_AS(open_sealed(k, wrong), Error);
    wrong = box;
    wrong.nonce[0] ^= 1;
    CHECK_THROWS_AS(open_sealed(k, wrong), Error);

    SymmetricKey other;
    other.k.fill(0x22);
    CHECK_THROWS_AS(open_sealed(other, box), Error);

    Sealed empty = seal(k, {}, rng);
    CHECK(open_sealed(k, empty).empty());

    Bytes wire = box.encode();
    Sealed back = Sealed::decode(view(wire));
    CHECK(back == box);
    Bytes cut(wire.begin(), wire.end() - 1);
    CHECK_THROWS_AS(Sealed::decode(view(cut)), Error);
}

TEST_CASE("sequence-numbered sealing is deterministic") {
    SymmetricKey k;
    k.k.fill(0x33);
    Bytes msg = to_bytes("record");
    Sealed a = seal_at_seq(k, 5, view(msg));
    Sealed b = seal_at_seq(k, 5, view(msg));
    CHECK(a == b);
    CHECK(open_sealed(k, a) == msg);

    // Nonce is eight zero bytes then the big-endian sequence number.
    for (int i = 0; i < 8; ++i) CHECK(a.nonce[i] == 0);
    CHECK(a.nonce[15] == 5);
    Sealed c = seal_at_seq(k, 6, view(msg));
    CHECK_FALSE(a == c);
}

TEST_CASE("hybrid encryption round trips") {
    for (const GroupParams& pp : {GroupParams::tiny(), GroupParams::desk()}) {
        Rng rng(13);
        DhKeyPair node = dh_keygen(pp, rng);
        Bytes msg = to_bytes("payload bytes");
        HybridCiphertext ct = hybrid_encrypt(pp, node.share, view(msg), rng);
        CHECK(hybrid_decrypt(pp, node.secret, ct) == msg);

        HybridCiphertext bad = ct;
        bad.sealed.ciphertext[0] ^= 1;
        CHECK_THROWS_AS(hybrid_decrypt(pp, node.secret, bad), Error);
        CHECK_THROWS_AS(hybrid_decrypt(pp, random_scalar(pp, rng), ct), Error);

        Bytes wire = ct.encode(pp);
        HybridCiphertext back = HybridCiphertext::decode(pp, view(wire));
        CHECK(back.eph_share.v == ct.eph_share.v);
        CHECK(back.sealed == ct.sealed);
    }
}

TEST_CASE("pedersen commitment against hand values") {
    GroupParams pp = GroupParams::tiny();
    Commitment c = commit(pp, scalar_from(pp, 5), scalar_from(pp, 7));
    CHECK(u64_of(c.c) == 2);  // 4^5 * 9^7 mod 23
    CHECK(open_commit(pp, c, scalar_from(pp, 5), scalar_from(pp, 7)));
    CHECK_FALSE(open_commit(pp, c, scalar_from(pp, 6), scalar_from(pp, 7)));
    CHECK_FALSE(open_commit(pp, c, scalar_from(pp, 5), scalar_from(pp, 8)));

    Bytes msg = to_bytes("m");
    Commitment cb = commit_bytes(pp, view(msg), scalar_from(pp, 3));
    CHECK(open_commit_bytes(pp, cb, view(msg), scalar_from(pp, 3)));
    Bytes other = to_bytes("n");
    CHECK_FALSE(open_commit_bytes(pp, cb, view(other), scalar_from(pp, 3)));
    CHECK(encode_commitment(pp, cb).size() > 0);
}

TEST_CASE("pedersen collisions all lie on the dlog line") {
    // h = g^8 in the 23-element group, so c(m, r) = g^{m + 8r}; two openings
    // collide exactly when m + 8r matches mod 11. Binding is therefore as
    // hard as that discrete log, and the exhaustive table confirms the
    // collision structure has no other escape hatches.
    GroupParams pp = GroupParams::tiny();
    REQUIRE(oracle::dlog(4, 9, 23, 11) == 8);
    for (std::uint64_t m = 0; m < 11; ++m) {
        for (std::uint64_t r = 0; r < 11; ++r) {
            Commitment c = commit(pp, scalar_from(pp, m), scalar_from(pp, r));
            CHECK(u64_of(c.c) == oracle::powmod(4, (m + 8 * r) % 11, 23));
        }
    }
}

TEST_CASE("elgamal against hand values") {
    GroupParams pp = GroupParams::tiny();
    GroupElement enc_base = base_opener(pp);  // 2
    Scalar secret = scalar_from(pp, 4);
    GroupElement pub = power(pp, enc_base, secret);  // 2^4 = 16
    GroupElement msg{8};
    ElGamalCt ct = elgamal_encrypt(pp, enc_base, pub, msg, scalar_from(pp, 3));
    CHECK(u64_of(ct.c1) == 8);   // 2^3
    CHECK(u64_of(ct.c2) == 16);  // 8 * 16^3 mod 23
    CHECK(u64_of(elgamal_decrypt(pp, secret, ct)) == 8);
    CHECK(u64_of(elgamal_decrypt(pp, scalar_from(pp, 5), ct)) != 8);
}

TEST_CASE("sigma proofs complete and reject damage") {
    for (const GroupParams& pp : {GroupParams::tiny(), GroupParams::desk()}) {
        Rng rng(17);
        Bytes aux = to_bytes("context");
        Scalar w = random_scalar(pp, rng);
        DlogStatement st{generator(pp), power(pp, generator(pp), w)};
        SigmaProof proof = sigma_prove(pp, st, w, view(aux), rng);
        CHECK(sigma_verify(pp, st, proof, view(aux)));

        Bytes other_aux = to_bytes("other");
        CHECK_FALSE(sigma_verify(pp, st, proof, view(other_aux)));

        SigmaProof bad = proof;
        bad.challenge = scalar_add(pp, bad.challenge, scalar_from(pp, 1));
        CHECK_FALSE(sigma_verify(pp, st, bad, view(aux)));
        bad = proof;
        bad.responses[0] = scalar_add(pp, bad.responses[0], scalar_from(pp, 1));
        CHECK_FALSE(sigma_verify(pp, st, bad, view(aux)));
        bad = proof;
        bad.commitments[0] = mul(pp, bad.commitments[0], generator(pp));
        CHECK_FALSE(sigma_verify(pp, st, bad, view(aux)));

        DlogStatement wrong{generator(pp),
                            mul(pp, st.value, generator(pp))};
        CHECK_FALSE(sigma_verify(pp, wrong, proof, view(aux)));
        CHECK_THROWS_AS(sigma_prove(pp, wrong, w, view(aux), rng), Error);

        Bytes wire = proof.encode(pp);
        SigmaProof back = SigmaProof::decode(pp, view(wire));
        CHECK(sigma_verify(pp, st, back, view(aux)));
        Bytes cut(wire.begin(), wire.end() - 1);
        CHECK_THROWS_AS(SigmaProof::decode(pp, view(cut)), Error);
    }
}

TEST_CASE("dleq proofs bind both bases") {
    GroupParams pp = GroupParams::desk();
    Rng rng(19);
    Scalar w = random_scalar(pp, rng);
    DleqStatement st{generator(pp), power(pp, generator(pp), w), base_h(pp),
                     power(pp, base_h(pp), w)};
    Bytes aux = to_bytes("dleq");
    SigmaProof proof = sigma_prove(pp, st, w, view(aux), rng);
    CHECK(sigma_verify(pp, st, proof, view(aux)));

    // Same first leg, unrelated second leg: the proof must not transfer.
    DleqStatement forged = st;
    forged.value2 = power(pp, base_h(pp), random_scalar(pp, rng));
    CHECK_FALSE(sigma_verify(pp, forged, proof, view(aux)));
    CHECK_THROWS_AS(sigma_prove(pp, forged, w, view(aux), rng), Error);

    // A proof of the wrong kind never verifies and never throws.
    DlogStatement dlog{generator(pp), st.value1};
    CHECK_FALSE(sigma_verify(pp, dlog, proof, view(aux)));
}

TEST_CASE("ciphertext-equality proofs") {
    GroupParams pp = GroupParams::tiny();
    Rng rng(23);
    GroupElement enc_base = base_opener(pp);
    Scalar secret = random_scalar(pp, rng);
    GroupElement pub = power(pp, enc_base, secret);
    GroupElement msg = power(pp, base_h(pp), scalar_from(pp, 5));

    Scalar rho_a = random_scalar(pp, rng);
    Scalar rho_b = random_scalar(pp, rng);
    ElGamalCt a = elgamal_encrypt(pp, enc_base, pub, msg, rho_a);
    ElGamalCt b = elgamal_encrypt(pp, enc_base, pub, msg, rho_b);
    EncEqStatement st{enc_base, pub, a, b};
    Scalar w = scalar_sub(pp, rho_a, rho_b);
    Bytes aux = to_bytes("enceq");
    SigmaProof proof = sigma_prove(pp, st, w, view(aux), rng);
    CHECK(sigma_verify(pp, st, proof, view(aux)));
    CHECK(proof.kind == SigmaKind::EncEq);

    // Different plaintexts: the witness equation cannot hold.
    GroupElement msg2 = power(pp, base_h(pp), scalar_from(pp, 6));
    ElGamalCt c = elgamal_encrypt(pp, enc_base, pub, msg2, rho_b);
    EncEqStatement bad{enc_base, pub, a, c};
    CHECK_FALSE(sigma_verify(pp, bad, proof, view(aux)));
    CHECK_THROWS_AS(sigma_prove(pp, bad, w, view(aux), rng), Error);
}
