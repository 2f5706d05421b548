#include "fairtor/sim.hpp"

#include <algorithm>
#include <deque>
#include <fstream>
#include <sstream>
#include <utility>

#include "fairtor/blindsig.hpp"
#include "fairtor/crypto.hpp"
#include "fairtor/fairness.hpp"
#include "fairtor/group.hpp"
#include "fairtor/groupsig.hpp"
#include "fairtor/handshake.hpp"
#include "fairtor/rng.hpp"

namespace fairtor::sim {

using nlohmann::json;

namespace {

const std::vector<std::string> kKinds = {"gk", "epoch-key", "revocation-list"};

[[noreturn]] void parse_fail(const std::string& what) {
    fail(ErrorCode::ParseError, what);
}

}  // namespace

bool Directory::known_kind(const std::string& kind) {
    return std::find(kKinds.begin(), kKinds.end(), kind) != kKinds.end();
}

std::uint64_t Directory::publish(const std::string& kind, Bytes payload) {
    if (!known_kind(kind)) fail(ErrorCode::UnknownKind, kind);
    auto& vec = records_[kind];
    vec.push_back({vec.size() + 1, std::move(payload)});
    return vec.back().version;
}

const Directory::Entry& Directory::fetch(const std::string& kind) const {
    if (!known_kind(kind)) fail(ErrorCode::UnknownKind, kind);
    auto it = records_.find(kind);
    if (it == records_.end() || it->second.empty()) {
        fail(ErrorCode::UnknownKind, "nothing published under " + kind);
    }
    return it->second.back();
}

const std::vector<Directory::Entry>& Directory::all(
    const std::string& kind) const {
    if (!known_kind(kind)) fail(ErrorCode::UnknownKind, kind);
    static const std::vector<Entry> empty;
    auto it = records_.find(kind);
    return it == records_.end() ? empty : it->second;
}

namespace {

Step parse_step(const json& js, const std::vector<std::string>& users) {
    if (!js.is_object()) parse_fail("each step must be an object");
    if (!js.contains("op") || !js["op"].is_string()) {
        parse_fail("step needs an \"op\"");
    }
    std::string op = js["op"].get<std::string>();
    Step st;
    auto need_user = [&] {
        if (!js.contains("user") || !js["user"].is_string()) {
            parse_fail("\"" + op + "\" needs a \"user\"");
        }
        st.user = js["user"].get<std::string>();
        if (std::find(users.begin(), users.end(), st.user) == users.end()) {
            parse_fail("undeclared user: " + st.user);
        }
    };
    auto need_circuit = [&] {
        if (!js.contains("circuit") || !js["circuit"].is_number_unsigned()) {
            parse_fail("\"" + op + "\" needs a numeric \"circuit\"");
        }
        st.circuit = js["circuit"].get<std::uint64_t>();
    };
    auto need_message = [&] {
        if (!js.contains("message") || !js["message"].is_string()) {
            parse_fail("\"" + op + "\" needs a \"message\"");
        }
        st.message = js["message"].get<std::string>();
    };
    if (op == "join") {
        st.kind = StepKind::Join;
        need_user();
    } else if (op == "build-circuit") {
        st.kind = StepKind::BuildCircuit;
        need_user();
        need_circuit();
    } else if (op == "send") {
        st.kind = StepKind::Send;
        need_user();
        need_circuit();
        need_message();
    } else if (op == "misbehave") {
        st.kind = StepKind::Misbehave;
        need_user();
        need_circuit();
        need_message();
    } else if (op == "denounce") {
        st.kind = StepKind::Denounce;
        st.dump_path = js.value("dump", "");
    } else if (op == "revoke-check") {
        st.kind = StepKind::RevokeCheck;
        need_user();
        st.expect = js.value("expect", "");
        if (!st.expect.empty() && st.expect != "accepted" &&
            st.expect != "rejected") {
            parse_fail("revoke-check expect must be accepted or rejected");
        }
    } else if (op == "advance-epoch") {
        st.kind = StepKind::AdvanceEpoch;
        st.count = js.value("count", std::uint64_t{1});
        if (st.count == 0) parse_fail("advance-epoch count must be positive");
    } else if (op == "assert") {
        st.kind = StepKind::Assert;
        st.counter = js.value("counter", "");
        st.event = js.value("event", "");
        if (st.counter.empty() == st.event.empty()) {
            parse_fail("assert needs exactly one of \"counter\" or \"event\"");
        }
        if (js.contains("equals")) st.equals = js["equals"].get<std::int64_t>();
        if (js.contains("min")) st.min = js["min"].get<std::int64_t>();
        if (js.contains("max")) st.max = js["max"].get<std::int64_t>();
        if (!st.equals && !st.min && !st.max) parse_fail("assert needs a bound");
    } else {
        parse_fail("unknown op: " + op);
    }
    return st;
}

}  // namespace

Scenario parse_scenario(const std::string& text) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) parse_fail("invalid JSON");
    if (!j.is_object()) parse_fail("scenario must be a JSON object");
    Scenario sc;
    try {
        sc.name = j.value("name", "");
        if (!j.contains("users") || !j["users"].is_array()) {
            parse_fail("scenario needs a \"users\" array");
        }
        for (const auto& u : j["users"]) {
            if (!u.is_string()) parse_fail("user names must be strings");
            sc.users.push_back(u.get<std::string>());
        }
        sc.group_size = j.value("group_size", sc.users.size());
        sc.k = j.value("k", std::size_t{8});
        sc.retention = j.value("retention", std::uint64_t{24});
        sc.gk_window = j.value("gk_window", std::uint64_t{2});
        sc.epoch_window = j.value("epoch_window", std::uint64_t{1});
        sc.pow_difficulty = j.value("pow_difficulty", 8u);
        sc.interactive = j.value("interactive_cc", false);
        if (!j.contains("steps") || !j["steps"].is_array()) {
            parse_fail("scenario needs a \"steps\" array");
        }
        for (const auto& js : j["steps"]) {
            sc.steps.push_back(parse_step(js, sc.users));
        }
    } catch (const json::exception& e) {
        parse_fail(e.what());
    }
    if (sc.users.size() > sc.group_size) parse_fail("more users than group_size");
    if (sc.k < 2 || sc.k > 64) parse_fail("k must be between 2 and 64");
    return sc;
}

Scenario load_scenario(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) parse_fail("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str());
}

json Stats::to_json() const {
    json reasons = json::object();
    for (const auto& [name, count] : reject_reasons) reasons[name] = count;
    return json{
        {"joins", joins},
        {"entry_accepted", entry_accepted},
        {"entry_rejected", entry_rejected},
        {"exit_accepted", exit_accepted},
        {"exit_rejected", exit_rejected},
        {"tokens_issued", tokens_issued},
        {"messages_delivered", messages_delivered},
        {"denunciations_accepted", denunciations_accepted},
        {"denunciations_rejected", denunciations_rejected},
        {"revocations", revocations},
        {"records_purged", records_purged},
        {"reject_reasons", reasons},
    };
}

namespace {

// Shared by the in-run bookkeeping and stats_from_log so the two agree.
void apply_event(Stats& s, const std::string& kind, const json& detail) {
    auto reason = [&]() -> std::string {
        if (detail.is_object() && detail.contains("reason") &&
            detail["reason"].is_string()) {
            return detail["reason"].get<std::string>();
        }
        return "unknown";
    };
    if (kind == "JOIN_OK") {
        s.joins++;
    } else if (kind == "ENTRY_OK") {
        s.entry_accepted++;
        s.tokens_issued++;
    } else if (kind == "ENTRY_REJECTED") {
        s.entry_rejected++;
        s.reject_reasons[reason()]++;
    } else if (kind == "EXIT_OK") {
        s.exit_accepted++;
    } else if (kind == "EXIT_REJECTED") {
        s.exit_rejected++;
        s.reject_reasons[reason()]++;
    } else if (kind == "MSG_DELIVERED") {
        s.messages_delivered++;
    } else if (kind == "DENUNCIATION_ACCEPTED") {
        s.denunciations_accepted++;
    } else if (kind == "DENUNCIATION_REJECTED") {
        s.denunciations_rejected++;
        s.reject_reasons[reason()]++;
    } else if (kind == "REVOKED") {
        s.revocations++;
    } else if (kind == "PURGED") {
        s.records_purged += detail.at("count").get<std::uint64_t>();
    }
}

Bytes layer_encode(const std::string& next, ByteView inner) {
    Encoder enc;
    enc.field(view(to_bytes(next)));
    enc.field(inner);
    return enc.take();
}

std::pair<std::string, Bytes> layer_decode(ByteView plain) {
    Decoder dec(plain);
    Bytes next = dec.field();
    Bytes inner = dec.field();
    dec.expect_done();
    return {to_string(view(next)), std::move(inner)};
}

struct Message {
    std::string from;
    std::string to;
    std::uint64_t circuit = 0;
    Bytes wire;
};

class Network {
public:
    Network(const Scenario& sc, std::uint64_t seed, const RunOptions& opt)
        : sc_(sc), master_(seed) {
        k_ = opt.k.value_or(sc.k);
        interactive_ = opt.interactive.value_or(sc.interactive);
        if (k_ < 2 || k_ > 64) parse_fail("k must be between 2 and 64");
        pp_ = GroupParams::desk();
        dir_rng_ = master_.fork(0);
        mgr_.rng = master_.fork(1);
        en_.rng = master_.fork(2);
        mid_.rng = master_.fork(3);
        ex_.rng = master_.fork(4);
        std::uint64_t lane = 10;
        for (const auto& name : sc.users) {
            User u;
            u.name = name;
            u.rng = master_.fork(lane++);
            users_.emplace(name, std::move(u));
        }
        DhKeyPair dir_kp = dh_keygen(pp_, dir_rng_);
        dir_secret_ = dir_kp.secret;
        dir_pub_ = dir_kp.share;
        auto [mk, gk] = gs_setup(pp_, mgr_.rng);
        mgr_.mk = std::move(mk);
        mgr_.gk = std::move(gk);
        mgr_.mk.pow_difficulty = sc.pow_difficulty;
        Bytes gk_bytes = mgr_.gk.encode();
        directory_.publish("gk", gk_bytes);
        emit("dir", "GK_PUBLISHED",
             {{"digest", fingerprint(gk_bytes)},
              {"version", mgr_.gk.version()}});
        en_.dh = dh_keygen(pp_, en_.rng);
        mid_.dh = dh_keygen(pp_, mid_.rng);
        ex_.dh = dh_keygen(pp_, ex_.rng);
        ex_.log = LogStore(sc.retention);
        publish_epoch_key();
    }

    RunResult run(const std::string& dump_gk_path) {
        for (const auto& st : sc_.steps) {
            ++tick_;
            try {
                dispatch(st);
            } catch (const Error& e) {
                emit("net", "STEP_FAILED", {{"reason", to_string(e.code())}});
                exit_code_ = 2;
            }
        }
        if (!dump_gk_path.empty()) {
            Bytes gk = mgr_.gk.encode();
            std::ofstream out(dump_gk_path, std::ios::binary);
            out.write(reinterpret_cast<const char*>(gk.data()),
                      static_cast<std::streamsize>(gk.size()));
        }
        RunResult res;
        res.exit_code = exit_code_;
        res.log_lines = std::move(log_);
        res.stats = stats_;
        return res;
    }

private:
    enum class Awaiting {
        None,
        JoinPuzzle,
        JoinConfirm,
        SurvivorCh,
        EntryResp,
        RevokeResp,
        MidResp,
        ExitResp,
    };

    struct User {
        std::string name;
        Rng rng{0};
        Scalar secret;
        std::optional<MemberKey> mk;
        std::optional<GroupKey> cached_gk;
        Awaiting awaiting = Awaiting::None;
        std::uint64_t active_circuit = 0;
        struct Circuit {
            UserEntryState st;
            PlainInit plain;
            SymmetricKey k1{};
            SymmetricKey km{};
            SymmetricKey k2{};
            bool built = false;
        };
        std::map<std::uint64_t, Circuit> circuits;
        std::vector<Bytes> secret_material;  // survivor bytes, for leak scans
    };

    struct Manager {
        Rng rng{0};
        GroupManagerKey mk;
        GroupKey gk;
    };

    struct EntryCirc {
        std::string prev;
        SymmetricKey k1{};
        std::string next;
        EntryLogRecord record;
    };

    struct EntryNode {
        Rng rng{0};
        DhKeyPair dh;
        EpochSignerKeys sbk;
        std::map<std::uint64_t, EntryCirc> circuits;
        std::map<std::uint64_t, PendingEntry> pendings;
    };

    struct MidCirc {
        std::string prev;
        SymmetricKey key{};
        std::string next;
    };

    struct MiddleNode {
        Rng rng{0};
        DhKeyPair dh;
        std::map<std::uint64_t, MidCirc> circuits;
    };

    struct ExitCirc {
        std::string prev;
        SymmetricKey key{};
    };

    struct ExitNode {
        Rng rng{0};
        DhKeyPair dh;
        std::map<std::uint64_t, ExitCirc> circuits;
        LogStore log{kDefaultRetentionEpochs};
        ReplayCache replay;
        EpochKeyStore store;
    };

    struct Server {
        std::optional<Bytes> awaiting_flag;
        struct Delivery {
            std::uint64_t circuit = 0;
            std::uint64_t seq = 0;
            Bytes msg;
        };
        std::optional<Delivery> last_flagged;
    };

    HandshakeConfig hcfg() const {
        HandshakeConfig cfg;
        cfg.k = k_;
        cfg.gk_window = sc_.gk_window;
        cfg.epoch_window = sc_.epoch_window;
        cfg.interactive = interactive_;
        return cfg;
    }

    void emit(const std::string& actor, const std::string& kind, json detail) {
        apply_event(stats_, kind, detail);
        event_counts_[kind]++;
        json line{{"actor", actor},
                  {"detail", std::move(detail)},
                  {"kind", kind},
                  {"tick", tick_}};
        log_.push_back(line.dump());
    }

    void post(std::string from, std::string to, std::uint64_t circuit,
              Bytes wire) {
        queue_.push_back(
            {std::move(from), std::move(to), circuit, std::move(wire)});
    }

    GroupKey current_gk() const {
        return GroupKey::decode(view(directory_.fetch("gk").payload));
    }

    // Short hash so the event log pins the underlying bytes (and therefore
    // differs across seeds) without exposing them.
    static std::string fingerprint(const Bytes& b) {
        return to_hex(view(digest_bytes(sha256(view(b))))).substr(0, 16);
    }

    EpochPublicKey current_epoch_key() const {
        EpochKeyRecord rec = EpochKeyRecord::decode(
            pp_, view(directory_.fetch("epoch-key").payload));
        if (!verify_epoch_record(pp_, rec, dir_pub_)) {
            fail(ErrorCode::ProofInvalid, "epoch key record");
        }
        return rec.key;
    }

    void publish_epoch_key() {
        en_.sbk = bgs_setup_epoch(epoch_, en_.rng);
        EpochKeyRecord rec =
            sign_epoch_record(pp_, en_.sbk.public_part(), dir_secret_, dir_rng_);
        Bytes payload = rec.encode(pp_);
        std::uint64_t v = directory_.publish("epoch-key", payload);
        emit("dir", "EPOCH_KEY_PUBLISHED",
             {{"digest", fingerprint(payload)},
              {"epoch", epoch_},
              {"version", v}});
    }

    void refresh_epoch_store() {
        ex_.store = EpochKeyStore{};
        for (const auto& entry : directory_.all("epoch-key")) {
            EpochKeyRecord rec = EpochKeyRecord::decode(pp_, view(entry.payload));
            ex_.store.add(pp_, rec, dir_pub_);
        }
    }

    void note_user_secret_material(User& u, const User::Circuit& circ) {
        u.secret_material.push_back(
            encode_commitment(pp_, circ.st.survivor.com));
        u.secret_material.push_back(circ.st.survivor.sigma2.encode(pp_));
    }

    // The entry node must never hold the survivor's commitment or exit-leg
    // signature; scan its retained state after every message it handles.
    void leak_scan() {
        Bytes hay;
        auto append = [&hay](const Bytes& b) {
            hay.insert(hay.end(), b.begin(), b.end());
        };
        for (const auto& [cid, circ] : en_.circuits) {
            hay.insert(hay.end(), circ.k1.k.begin(), circ.k1.k.end());
            append(encode_element(pp_, circ.record.x1_share));
            append(circ.record.sigma1.encode(pp_));
            append(encode_mpz(circ.record.issued_beta));
        }
        for (const auto& [cid, pending] : en_.pendings) {
            append(pending.body.encode(pp_));
        }
        for (const auto& [name, u] : users_) {
            for (const auto& needle : u.secret_material) {
                if (!needle.empty() &&
                    std::search(hay.begin(), hay.end(), needle.begin(),
                                needle.end()) != hay.end()) {
                    emit("en", "LEAK_DETECTED", {{"user", name}});
                    exit_code_ = 2;
                    return;
                }
            }
        }
    }

    void run_queue() {
        std::size_t budget = 10000;
        while (!queue_.empty()) {
            if (budget-- == 0) fail(ErrorCode::AssertFailed, "message flood");
            Message m = std::move(queue_.front());
            queue_.pop_front();
            ++tick_;
            deliver(m);
        }
    }

    void deliver(const Message& m) {
        if (m.to == "mgr") {
            handle_mgr(m);
        } else if (m.to == "en") {
            handle_en(m);
            leak_scan();
        } else if (m.to == "mid") {
            handle_mid(m);
        } else if (m.to == "ex") {
            handle_ex(m);
        } else if (m.to == "server") {
            handle_server(m);
        } else {
            auto it = users_.find(m.to);
            if (it == users_.end()) {
                emit("net", "CELL_DROPPED", {{"to", m.to}});
                return;
            }
            handle_user(it->second, m);
        }
    }

    void handle_mgr(const Message& m) {
        if (m.from == "ex") {
            try {
                DenunciationBundle b = decode_bundle_file(pp_, view(m.wire));
                Verdict v = apply_revocation(b, mgr_.mk, mgr_.gk);
                (void)v;
                emit("mgr", "DENUNCIATION_ACCEPTED", {{"circuit", m.circuit}});
                directory_.publish("gk", mgr_.gk.encode());
                directory_.publish(
                    "revocation-list",
                    encode_revocation_list(pp_, mgr_.mk.version, mgr_.mk.revoked));
                emit("mgr", "REVOKED", {{"version", mgr_.gk.version()}});
            } catch (const Error& e) {
                std::string reason = to_string(e.code());
                if (e.code() == ErrorCode::VerifyFailed) {
                    DenunciationBundle b = decode_bundle_file(pp_, view(m.wire));
                    reason = to_string(verify_denunciation(pp_, b, mgr_.gk).reason);
                }
                emit("mgr", "DENUNCIATION_REJECTED", {{"reason", reason}});
            }
            return;
        }
        if (m.wire.empty()) {  // puzzle request from a prospective member
            PowPuzzle pz = gs_issue_puzzle(mgr_.mk, mgr_.rng);
            Encoder enc;
            enc.field(pz.challenge);
            enc.u64(pz.difficulty);
            post("mgr", m.from, 0, enc.take());
            return;
        }
        try {
            JoinRequest req = JoinRequest::decode(pp_, view(m.wire));
            std::uint64_t id = gs_process_join(mgr_.mk, mgr_.gk, req);
            directory_.publish("gk", mgr_.gk.encode());
            emit("mgr", "JOIN_OK",
                 {{"id", id}, {"user", m.from}, {"version", mgr_.gk.version()}});
            Encoder enc;
            enc.u64(id);
            enc.u64(mgr_.gk.version());
            post("mgr", m.from, 0, enc.take());
        } catch (const Error& e) {
            emit("mgr", "JOIN_REJECTED",
                 {{"reason", to_string(e.code())}, {"user", m.from}});
        }
    }

    void entry_accept(const Message& m, EntryAccept acc) {
        EntryCirc circ;
        circ.prev = m.from;
        circ.k1 = acc.key;
        circ.record = std::move(acc.record);
        en_.circuits[m.circuit] = std::move(circ);
        emit("en", "ENTRY_OK", {{"circuit", m.circuit}, {"user", m.from}});
        last_entry_outcome_ = "accepted";
        last_entry_reason_.clear();
        post("en", m.from, m.circuit, acc.response.encode(pp_));
    }

    void entry_reject(const Message& m, ErrorCode code) {
        emit("en", "ENTRY_REJECTED",
             {{"circuit", m.circuit},
              {"reason", to_string(code)},
              {"user", m.from}});
        last_entry_outcome_ = "rejected";
        last_entry_reason_ = to_string(code);
    }

    void handle_en(const Message& m) {
        if (m.from == "mid") {  // backward traffic: add our layer, pass along
            auto it = en_.circuits.find(m.circuit);
            if (it == en_.circuits.end()) {
                emit("en", "CELL_DROPPED", {{"circuit", m.circuit}});
                return;
            }
            Sealed sealed = seal(it->second.k1, view(m.wire), en_.rng);
            post("en", it->second.prev, m.circuit,
                 wrap_wire(MsgTag::Relay, view(sealed.encode())));
            return;
        }
        MsgTag tag;
        Bytes body;
        try {
            std::tie(tag, body) = unwrap_wire(view(m.wire));
        } catch (const Error&) {
            emit("en", "CELL_DROPPED", {{"circuit", m.circuit}});
            return;
        }
        switch (tag) {
            case MsgTag::EntryRequest: {
                try {
                    EntryRequest req = EntryRequest::decode(pp_, view(m.wire));
                    entry_accept(m, en_process_entry_request(
                                        req, en_.dh.secret, current_gk(),
                                        en_.sbk, hcfg(), en_.rng));
                } catch (const Error& e) {
                    entry_reject(m, e.code());
                }
                break;
            }
            case MsgTag::EntryRound1: {
                try {
                    EntryRound1 req = EntryRound1::decode(pp_, view(m.wire));
                    auto [ch, pending] = en_process_entry_round1(
                        req, en_.dh.secret, current_gk(), hcfg(), en_.rng);
                    en_.pendings[m.circuit] = std::move(pending);
                    post("en", m.from, m.circuit, ch.encode());
                } catch (const Error& e) {
                    entry_reject(m, e.code());
                }
                break;
            }
            case MsgTag::EntryRound2: {
                auto pit = en_.pendings.find(m.circuit);
                if (pit == en_.pendings.end()) {
                    entry_reject(m, ErrorCode::CutAndChooseMismatch);
                    break;
                }
                try {
                    EntryRound2 req = EntryRound2::decode(pp_, view(m.wire));
                    EntryAccept acc = en_process_entry_round2(
                        req, pit->second, en_.dh.secret, current_gk(), en_.sbk,
                        hcfg(), en_.rng);
                    en_.pendings.erase(pit);
                    entry_accept(m, std::move(acc));
                } catch (const Error& e) {
                    en_.pendings.erase(pit);
                    entry_reject(m, e.code());
                }
                break;
            }
            case MsgTag::Relay: {
                auto it = en_.circuits.find(m.circuit);
                if (it == en_.circuits.end()) {
                    emit("en", "CELL_DROPPED", {{"circuit", m.circuit}});
                    break;
                }
                try {
                    Bytes plain =
                        open_sealed(it->second.k1, Sealed::decode(view(body)));
                    auto [next, inner] = layer_decode(view(plain));
                    if (next.empty()) {
                        emit("en", "CELL_DROPPED", {{"circuit", m.circuit}});
                        break;
                    }
                    it->second.next = next;
                    post("en", next, m.circuit, std::move(inner));
                } catch (const Error&) {
                    emit("en", "CELL_DROPPED", {{"circuit", m.circuit}});
                }
                break;
            }
            default:
                emit("en", "CELL_DROPPED", {{"circuit", m.circuit}});
                break;
        }
    }

    void handle_mid(const Message& m) {
        if (m.from == "ex") {  // backward traffic
            auto it = mid_.circuits.find(m.circuit);
            if (it == mid_.circuits.end()) {
                emit("mid", "CELL_DROPPED", {{"circuit", m.circuit}});
                return;
            }
            Sealed sealed = seal(it->second.key, view(m.wire), mid_.rng);
            post("mid", it->second.prev, m.circuit,
                 wrap_wire(MsgTag::Relay, view(sealed.encode())));
            return;
        }
        MsgTag tag;
        Bytes body;
        try {
            std::tie(tag, body) = unwrap_wire(view(m.wire));
        } catch (const Error&) {
            emit("mid", "CELL_DROPPED", {{"circuit", m.circuit}});
            return;
        }
        if (tag == MsgTag::PlainRequest) {
            try {
                Decoder dec(view(body));
                GroupElement share = decode_element(pp_, view(dec.field()));
                dec.expect_done();
                auto [resp, key] = plain_respond(pp_, share, mid_.rng);
                MidCirc circ;
                circ.prev = m.from;
                circ.key = key;
                mid_.circuits[m.circuit] = std::move(circ);
                post("mid", m.from, m.circuit, resp.encode(pp_));
            } catch (const Error&) {
                emit("mid", "CELL_DROPPED", {{"circuit", m.circuit}});
            }
        } else if (tag == MsgTag::Relay) {
            auto it = mid_.circuits.find(m.circuit);
            if (it == mid_.circuits.end()) {
                emit("mid", "CELL_DROPPED", {{"circuit", m.circuit}});
                return;
            }
            try {
                Bytes plain =
                    open_sealed(it->second.key, Sealed::decode(view(body)));
                auto [next, inner] = layer_decode(view(plain));
                if (next.empty()) {
                    emit("mid", "CELL_DROPPED", {{"circuit", m.circuit}});
                    return;
                }
                it->second.next = next;
                post("mid", next, m.circuit, std::move(inner));
            } catch (const Error&) {
                emit("mid", "CELL_DROPPED", {{"circuit", m.circuit}});
            }
        } else {
            emit("mid", "CELL_DROPPED", {{"circuit", m.circuit}});
        }
    }

    void handle_ex(const Message& m) {
        if (m.from == "server") {  // denunciation request
            try {
                Decoder dec(view(m.wire));
                std::uint64_t seq = dec.u64();
                Bytes msg = dec.field();
                dec.expect_done();
                ExitLogRecord& rec = ex_.log.at(m.circuit);
                DenunciationBundle b = build_denunciation(
                    pp_, rec, view(msg), seq, epoch_, ex_.rng);
                emit("ex", "DENUNCIATION_BUILT",
                     {{"circuit", m.circuit}, {"seq", seq}});
                Bytes file = encode_bundle_file(pp_, b);
                if (!dump_path_.empty()) {
                    std::ofstream out(dump_path_, std::ios::binary);
                    out.write(reinterpret_cast<const char*>(file.data()),
                              static_cast<std::streamsize>(file.size()));
                    emit("ex", "BUNDLE_WRITTEN", {{"path", dump_path_}});
                }
                post("ex", "mgr", m.circuit, std::move(file));
            } catch (const Error& e) {
                emit("ex", "DENUNCIATION_REJECTED",
                     {{"reason", to_string(e.code())}});
            }
            return;
        }
        MsgTag tag;
        Bytes body;
        try {
            std::tie(tag, body) = unwrap_wire(view(m.wire));
        } catch (const Error&) {
            emit("ex", "CELL_DROPPED", {{"circuit", m.circuit}});
            return;
        }
        if (tag == MsgTag::ExitRequest) {
            try {
                refresh_epoch_store();
                ExitRequest req = ExitRequest::decode(pp_, view(m.wire));
                ExitAccept acc = ex_process_exit_request(
                    req, ex_.dh.secret, current_gk(), ex_.store, ex_.replay,
                    epoch_, hcfg(), ex_.rng);
                ExitCirc circ;
                circ.prev = m.from;
                circ.key = acc.output.key;
                ex_.circuits[m.circuit] = std::move(circ);
                ex_.log.log_exit_record(m.circuit, acc.output, epoch_);
                emit("ex", "EXIT_OK", {{"circuit", m.circuit}});
                post("ex", m.from, m.circuit, acc.response.encode(pp_));
            } catch (const Error& e) {
                emit("ex", "EXIT_REJECTED",
                     {{"circuit", m.circuit}, {"reason", to_string(e.code())}});
            }
        } else if (tag == MsgTag::Relay) {  // data cell
            auto it = ex_.circuits.find(m.circuit);
            if (it == ex_.circuits.end()) {
                emit("ex", "CELL_DROPPED", {{"circuit", m.circuit}});
                return;
            }
            try {
                Bytes msg =
                    open_sealed(it->second.key, Sealed::decode(view(body)));
                std::uint64_t seq = ex_.log.record_message(m.circuit, view(msg));
                emit("ex", "MSG_RELAYED", {{"circuit", m.circuit}, {"seq", seq}});
                Encoder enc;
                enc.u64(seq);
                enc.field(msg);
                post("ex", "server", m.circuit, enc.take());
            } catch (const Error&) {
                emit("ex", "CELL_DROPPED", {{"circuit", m.circuit}});
            }
        } else {
            emit("ex", "CELL_DROPPED", {{"circuit", m.circuit}});
        }
    }

    void handle_server(const Message& m) {
        Decoder dec(view(m.wire));
        std::uint64_t seq = dec.u64();
        Bytes msg = dec.field();
        dec.expect_done();
        emit("server", "MSG_DELIVERED", {{"circuit", m.circuit}, {"seq", seq}});
        if (server_.awaiting_flag && msg == *server_.awaiting_flag) {
            server_.last_flagged = Server::Delivery{m.circuit, seq, msg};
            server_.awaiting_flag.reset();
            emit("server", "MISBEHAVIOR_FLAGGED",
                 {{"circuit", m.circuit}, {"seq", seq}});
        }
    }

    Bytes onion_to_exit(const User::Circuit& circ, const Bytes& terminal_wire,
                        Rng& rng) {
        Bytes mid_sealed =
            seal(circ.km, view(layer_encode("ex", view(terminal_wire))), rng)
                .encode();
        Bytes inner_mid = wrap_wire(MsgTag::Relay, view(mid_sealed));
        Bytes en_sealed =
            seal(circ.k1, view(layer_encode("mid", view(inner_mid))), rng)
                .encode();
        return wrap_wire(MsgTag::Relay, view(en_sealed));
    }

    void handle_user(User& u, const Message& m) {
        switch (u.awaiting) {
            case Awaiting::JoinPuzzle: {
                Decoder dec(view(m.wire));
                PowPuzzle pz;
                pz.challenge = dec.field();
                pz.difficulty = static_cast<unsigned>(dec.u64());
                dec.expect_done();
                PowSolution sol = pow_solve(pz);
                JoinRequest req =
                    make_join_request(pp_, u.secret, pz, sol, u.rng);
                u.awaiting = Awaiting::JoinConfirm;
                post(u.name, "mgr", 0, req.encode(pp_));
                break;
            }
            case Awaiting::JoinConfirm: {
                Decoder dec(view(m.wire));
                std::uint64_t id = dec.u64();
                dec.u64();  // group key version, refetched below
                dec.expect_done();
                u.mk = MemberKey{u.secret, power(pp_, base_h(pp_), u.secret), id};
                u.cached_gk = current_gk();
                u.awaiting = Awaiting::None;
                break;
            }
            case Awaiting::SurvivorCh: {
                auto& circ = u.circuits.at(u.active_circuit);
                try {
                    SurvivorChallenge ch = SurvivorChallenge::decode(view(m.wire));
                    EntryRound2 r2 =
                        build_entry_round2(circ.st, ch, en_.dh.share, u.rng);
                    note_user_secret_material(u, circ);
                    u.awaiting = Awaiting::EntryResp;
                    post(u.name, "en", m.circuit, r2.encode(pp_));
                } catch (const Error& e) {
                    emit(u.name, "ENTRY_ABORTED",
                         {{"reason", to_string(e.code())}});
                    u.awaiting = Awaiting::None;
                }
                break;
            }
            case Awaiting::EntryResp: {
                auto& circ = u.circuits.at(u.active_circuit);
                try {
                    EntryResponse resp = EntryResponse::decode(pp_, view(m.wire));
                    EntryOutcome out = user_finish_entry(resp, circ.st);
                    circ.k1 = out.key;
                    if (!out.verified) {
                        emit(u.name, "TOKEN_UNVERIFIED",
                             {{"circuit", m.circuit}});
                        exit_code_ = 2;
                    }
                    circ.plain = plain_initiate(pp_, u.rng);
                    Bytes wire5 =
                        wrap_wire(MsgTag::PlainRequest,
                                  view(encode_element(pp_, circ.plain.share)));
                    Bytes l_en =
                        seal(circ.k1, view(layer_encode("mid", view(wire5))),
                             u.rng)
                            .encode();
                    u.awaiting = Awaiting::MidResp;
                    post(u.name, "en", m.circuit,
                         wrap_wire(MsgTag::Relay, view(l_en)));
                } catch (const Error& e) {
                    emit(u.name, "ENTRY_ABORTED",
                         {{"reason", to_string(e.code())}});
                    u.awaiting = Awaiting::None;
                }
                break;
            }
            case Awaiting::RevokeResp: {
                u.awaiting = Awaiting::None;  // outcome recorded entry-side
                break;
            }
            case Awaiting::MidResp: {
                auto& circ = u.circuits.at(u.active_circuit);
                try {
                    auto [tag, body] = unwrap_wire(view(m.wire));
                    if (tag != MsgTag::Relay) {
                        fail(ErrorCode::ParseError, "expected relay cell");
                    }
                    Bytes inner =
                        open_sealed(circ.k1, Sealed::decode(view(body)));
                    PlainResponse resp = PlainResponse::decode(pp_, view(inner));
                    circ.km = plain_finish(pp_, circ.plain, resp);
                    ExitRequest exreq =
                        build_exit_request(circ.st, ex_.dh.share, u.rng);
                    u.awaiting = Awaiting::ExitResp;
                    post(u.name, "en", m.circuit,
                         onion_to_exit(circ, exreq.encode(pp_), u.rng));
                } catch (const Error& e) {
                    emit(u.name, "EXTEND_ABORTED",
                         {{"reason", to_string(e.code())}});
                    u.awaiting = Awaiting::None;
                }
                break;
            }
            case Awaiting::ExitResp: {
                auto& circ = u.circuits.at(u.active_circuit);
                try {
                    auto [tag1, body1] = unwrap_wire(view(m.wire));
                    if (tag1 != MsgTag::Relay) {
                        fail(ErrorCode::ParseError, "expected relay cell");
                    }
                    Bytes mid_wire =
                        open_sealed(circ.k1, Sealed::decode(view(body1)));
                    auto [tag2, body2] = unwrap_wire(view(mid_wire));
                    if (tag2 != MsgTag::Relay) {
                        fail(ErrorCode::ParseError, "expected relay cell");
                    }
                    Bytes ex_wire =
                        open_sealed(circ.km, Sealed::decode(view(body2)));
                    ExitResponse resp = ExitResponse::decode(pp_, view(ex_wire));
                    circ.k2 = user_finish_exit(resp, circ.st);
                    circ.built = true;
                    emit(u.name, "CIRCUIT_BUILT",
                         {{"circuit", m.circuit},
                          {"key", fingerprint(Bytes(circ.k2.k.begin(),
                                                    circ.k2.k.end()))}});
                    u.awaiting = Awaiting::None;
                } catch (const Error& e) {
                    emit(u.name, "EXIT_ABORTED",
                         {{"reason", to_string(e.code())}});
                    u.awaiting = Awaiting::None;
                }
                break;
            }
            case Awaiting::None:
                emit(u.name, "UNEXPECTED_MESSAGE", {{"from", m.from}});
                break;
        }
    }

    void dispatch(const Step& st) {
        switch (st.kind) {
            case StepKind::Join:
                step_join(st);
                break;
            case StepKind::BuildCircuit:
                step_build(st);
                break;
            case StepKind::Send:
                step_send(st, /*flag=*/false);
                break;
            case StepKind::Misbehave:
                step_send(st, /*flag=*/true);
                break;
            case StepKind::Denounce:
                step_denounce(st);
                break;
            case StepKind::RevokeCheck:
                step_revoke_check(st);
                break;
            case StepKind::AdvanceEpoch:
                step_advance_epoch(st);
                break;
            case StepKind::Assert:
                step_assert(st);
                break;
        }
    }

    void step_join(const Step& st) {
        User& u = users_.at(st.user);
        if (u.mk) {
            emit(u.name, "JOIN_SKIPPED", {{"reason", "already a member"}});
            return;
        }
        u.secret = random_scalar(pp_, u.rng);
        u.awaiting = Awaiting::JoinPuzzle;
        post(u.name, "mgr", 0, Bytes{});
        run_queue();
    }

    void step_build(const Step& st) {
        User& u = users_.at(st.user);
        if (!u.mk) {
            emit(u.name, "ENTRY_ABORTED", {{"reason", "not a member"}});
            exit_code_ = 2;
            return;
        }
        u.cached_gk = current_gk();
        EpochPublicKey ek = current_epoch_key();
        try {
            User::Circuit circ;
            if (interactive_) {
                auto [req, state] = build_entry_round1(
                    *u.mk, *u.cached_gk, ek, en_.dh.share, hcfg(), u.rng);
                circ.st = std::move(state);
                u.circuits[st.circuit] = std::move(circ);
                u.active_circuit = st.circuit;
                u.awaiting = Awaiting::SurvivorCh;
                post(u.name, "en", st.circuit, req.encode(pp_));
            } else {
                auto [req, state] = build_entry_request(
                    *u.mk, *u.cached_gk, ek, en_.dh.share, hcfg(), u.rng);
                circ.st = std::move(state);
                u.circuits[st.circuit] = std::move(circ);
                note_user_secret_material(u, u.circuits.at(st.circuit));
                u.active_circuit = st.circuit;
                u.awaiting = Awaiting::EntryResp;
                post(u.name, "en", st.circuit, req.encode(pp_));
            }
        } catch (const Error& e) {
            emit(u.name, "ENTRY_ABORTED", {{"reason", to_string(e.code())}});
            return;
        }
        run_queue();
    }

    void step_send(const Step& st, bool flag) {
        User& u = users_.at(st.user);
        auto it = u.circuits.find(st.circuit);
        if (it == u.circuits.end() || !it->second.built) {
            emit(u.name, "SEND_FAILED",
                 {{"circuit", st.circuit}, {"reason", "no such circuit"}});
            exit_code_ = 2;
            return;
        }
        if (flag) server_.awaiting_flag = to_bytes(st.message);
        auto& circ = it->second;
        Bytes terminal = wrap_wire(
            MsgTag::Relay,
            view(seal(circ.k2, view(to_bytes(st.message)), u.rng).encode()));
        post(u.name, "en", st.circuit, onion_to_exit(circ, terminal, u.rng));
        run_queue();
    }

    void step_denounce(const Step& st) {
        if (!server_.last_flagged) {
            emit("server", "ASSERT_FAILED", {{"reason", "nothing flagged"}});
            exit_code_ = 2;
            return;
        }
        dump_path_ = st.dump_path;
        const auto& d = *server_.last_flagged;
        Encoder enc;
        enc.u64(d.seq);
        enc.field(d.msg);
        post("server", "ex", d.circuit, enc.take());
        run_queue();
        dump_path_.clear();
    }

    void step_revoke_check(const Step& st) {
        User& u = users_.at(st.user);
        std::string outcome = "rejected";
        if (!u.mk || !u.cached_gk) {
            emit(u.name, "ENTRY_ABORTED", {{"reason", "not a member"}});
        } else {
            // A member still listed in the current group key refreshes it; a
            // revoked one can only keep signing against its stale cached copy,
            // which the entry node's version check rejects.
            GroupKey fresh = current_gk();
            const auto& tags = fresh.allowed_set();
            if (std::find(tags.begin(), tags.end(), u.mk->tag) != tags.end()) {
                u.cached_gk = std::move(fresh);
            }
            EpochPublicKey ek = current_epoch_key();
            std::uint64_t c = next_probe_circuit_++;
            last_entry_outcome_.clear();
            try {
                auto [req, state] = build_entry_request(
                    *u.mk, *u.cached_gk, ek, en_.dh.share, hcfg(), u.rng);
                User::Circuit circ;
                circ.st = std::move(state);
                u.circuits[c] = std::move(circ);
                note_user_secret_material(u, u.circuits.at(c));
                u.active_circuit = c;
                u.awaiting = Awaiting::RevokeResp;
                post(u.name, "en", c, req.encode(pp_));
                run_queue();
                if (!last_entry_outcome_.empty()) outcome = last_entry_outcome_;
                u.circuits.erase(c);
            } catch (const Error& e) {
                emit(u.name, "ENTRY_ABORTED", {{"reason", to_string(e.code())}});
            }
        }
        emit(u.name, "REVOKE_CHECK", {{"outcome", outcome}, {"user", st.user}});
        if (!st.expect.empty() && outcome != st.expect) {
            emit(u.name, "ASSERT_FAILED",
                 {{"expected", st.expect}, {"got", outcome}});
            exit_code_ = 2;
        }
    }

    void step_advance_epoch(const Step& st) {
        for (std::uint64_t i = 0; i < st.count; ++i) {
            ++epoch_;
            publish_epoch_key();
            std::size_t purged = ex_.log.purge_expired(epoch_);
            if (purged > 0) emit("ex", "PURGED", {{"count", purged}});
            ex_.replay.purge(epoch_, sc_.epoch_window);
            emit("net", "EPOCH_ADVANCED", {{"epoch", epoch_}});
        }
    }

    std::optional<std::uint64_t> counter_value(const std::string& name) const {
        const Stats& s = stats_;
        if (name == "joins") return s.joins;
        if (name == "entry_accepted") return s.entry_accepted;
        if (name == "entry_rejected") return s.entry_rejected;
        if (name == "exit_accepted") return s.exit_accepted;
        if (name == "exit_rejected") return s.exit_rejected;
        if (name == "tokens_issued") return s.tokens_issued;
        if (name == "messages_delivered") return s.messages_delivered;
        if (name == "denunciations_accepted") return s.denunciations_accepted;
        if (name == "denunciations_rejected") return s.denunciations_rejected;
        if (name == "revocations") return s.revocations;
        if (name == "records_purged") return s.records_purged;
        return std::nullopt;
    }

    void step_assert(const Step& st) {
        std::int64_t value = 0;
        json detail;
        if (!st.counter.empty()) {
            auto v = counter_value(st.counter);
            if (!v) {
                emit("net", "ASSERT_FAILED",
                     {{"reason", "unknown counter: " + st.counter}});
                exit_code_ = 2;
                return;
            }
            value = static_cast<std::int64_t>(*v);
            detail["counter"] = st.counter;
        } else {
            auto it = event_counts_.find(st.event);
            value = it == event_counts_.end()
                        ? 0
                        : static_cast<std::int64_t>(it->second);
            detail["event"] = st.event;
        }
        detail["value"] = value;
        bool ok = true;
        if (st.equals && value != *st.equals) ok = false;
        if (st.min && value < *st.min) ok = false;
        if (st.max && value > *st.max) ok = false;
        if (ok) {
            emit("net", "ASSERT_OK", detail);
        } else {
            emit("net", "ASSERT_FAILED", detail);
            exit_code_ = 2;
        }
    }

    Scenario sc_;
    Rng master_;
    Rng dir_rng_{0};
    GroupParams pp_;
    std::size_t k_ = 8;
    bool interactive_ = false;
    Scalar dir_secret_;
    GroupElement dir_pub_;
    Directory directory_;
    Manager mgr_;
    EntryNode en_;
    MiddleNode mid_;
    ExitNode ex_;
    Server server_;
    std::map<std::string, User> users_;
    std::deque<Message> queue_;
    std::uint64_t tick_ = 0;
    std::uint64_t epoch_ = 0;
    Stats stats_;
    std::map<std::string, std::uint64_t> event_counts_;
    std::vector<std::string> log_;
    int exit_code_ = 0;
    std::string last_entry_outcome_;
    std::string last_entry_reason_;
    std::string dump_path_;
    std::uint64_t next_probe_circuit_ = 1000000;
};

}  // namespace

RunResult run_scenario(const Scenario& sc, std::uint64_t seed,
                       const RunOptions& opt) {
    Network net(sc, seed, opt);
    return net.run(opt.dump_gk_path);
}

Stats stats_from_log(const std::vector<std::string>& lines) {
    Stats s;
    for (const auto& line : lines) {
        json j = json::parse(line, nullptr, false);
        if (j.is_discarded() || !j.is_object() || !j.contains("kind") ||
            !j["kind"].is_string()) {
            parse_fail("bad event line");
        }
        apply_event(s, j["kind"].get<std::string>(),
                    j.contains("detail") ? j["detail"] : json::object());
    }
    return s;
}

}  // namespace fairtor::sim
