#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "fairtor/blindsig.hpp"
#include "fairtor/crypto.hpp"
#include "fairtor/fairness.hpp"
#include "fairtor/group.hpp"
#include "fairtor/groupsig.hpp"
#include "fairtor/rng.hpp"
#include "fairtor/sim.hpp"

using namespace fairtor;
using nlohmann::json;

namespace {

Bytes read_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorCode::ParseError, "cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    const std::string& s = ss.str();
    return Bytes(s.begin(), s.end());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorCode::ParseError, "cannot write " + path);
    out << text;
}

struct SimArgs {
    std::string scenario;
    std::uint64_t seed = 0;
    std::size_t k = 0;
    bool interactive = false;
    std::string log_path;
    std::string dump_gk;
};

int do_sim(const SimArgs& a) {
    sim::Scenario sc = sim::load_scenario(a.scenario);
    sim::RunOptions opt;
    if (a.k != 0) opt.k = a.k;
    if (a.interactive) opt.interactive = true;
    opt.dump_gk_path = a.dump_gk;
    sim::RunResult res = sim::run_scenario(sc, a.seed, opt);
    std::ostringstream out;
    for (const auto& line : res.log_lines) out << line << "\n";
    if (a.log_path.empty()) {
        std::cout << out.str();
    } else {
        write_text(a.log_path, out.str());
    }
    return res.exit_code;
}

struct KeygenArgs {
    std::string role;
    std::string out_path;
    std::uint64_t seed = 0;
    bool seeded = false;
    std::uint64_t epoch = 0;
};

int do_keygen(const KeygenArgs& a) {
    std::uint64_t seed = a.seed;
    if (!a.seeded) {
        std::random_device rd;
        seed = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    }
    Rng rng(seed);
    GroupParams pp = GroupParams::desk();
    json out{{"role", a.role}};
    if (a.role == "manager") {
        auto [mk, gk] = gs_setup(pp, rng);
        out["params"] = to_hex(view(encode_params(pp)));
        out["group_key"] = to_hex(view(gk.encode()));
        out["opener_secret"] = to_hex(view(encode_scalar(pp, mk.opener_secret)));
        out["pow_difficulty"] = mk.pow_difficulty;
    } else if (a.role == "entry") {
        EpochSignerKeys sk = bgs_setup_epoch(a.epoch, rng);
        out["epoch"] = sk.epoch;
        out["modulus"] = to_hex(view(encode_mpz(sk.n)));
        out["public_exponent"] = to_hex(view(encode_mpz(sk.pub)));
        out["private_exponent"] = to_hex(view(encode_mpz(sk.priv)));
        out["window"] = sk.window;
    } else {  // node
        DhKeyPair kp = dh_keygen(pp, rng);
        out["params"] = to_hex(view(encode_params(pp)));
        out["secret"] = to_hex(view(encode_scalar(pp, kp.secret)));
        out["share"] = to_hex(view(encode_element(pp, kp.share)));
    }
    std::string text = out.dump(2) + "\n";
    if (a.out_path.empty() || a.out_path == "-") {
        std::cout << text;
    } else {
        write_text(a.out_path, text);
    }
    return 0;
}

int do_denounce_verify(const std::string& bundle_path,
                       const std::string& gk_path) {
    GroupKey gk = GroupKey::decode(view(read_binary(gk_path)));
    const GroupParams& pp = gk.params;
    DenunciationBundle bundle =
        decode_bundle_file(pp, view(read_binary(bundle_path)));
    Verdict v = verify_denunciation(pp, bundle, gk);
    json out{{"accepted", v.accepted}};
    if (!v.accepted) out["reason"] = to_string(v.reason);
    std::cout << out.dump(2) << "\n";
    return v.accepted ? 0 : 2;
}

int do_stats(const std::string& log_path) {
    std::ifstream in(log_path);
    if (!in) fail(ErrorCode::ParseError, "cannot open " + log_path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty()) lines.push_back(line);
    }
    sim::Stats s = sim::stats_from_log(lines);
    std::cout << s.to_json().dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"fairness-extended onion routing simulator"};
    app.require_subcommand(1);

    SimArgs sim_args;
    auto* sim_cmd = app.add_subcommand("sim", "run a scenario");
    sim_cmd->add_option("--scenario", sim_args.scenario, "scenario JSON file")
        ->required();
    sim_cmd->add_option("--seed", sim_args.seed, "deterministic seed")
        ->required();
    sim_cmd->add_option("--k", sim_args.k,
                        "override cut-and-choose instance count");
    sim_cmd->add_flag("--interactive-cc", sim_args.interactive,
                      "use the two-round entry handshake");
    sim_cmd->add_option("--log", sim_args.log_path,
                        "write the event log here instead of stdout");
    sim_cmd->add_option("--dump-gk", sim_args.dump_gk,
                        "write the final group key (binary) here");

    KeygenArgs kg;
    auto* kg_cmd = app.add_subcommand("keygen", "generate keys");
    kg_cmd->add_option("--role", kg.role, "which key set to make")
        ->required()
        ->check(CLI::IsMember({"manager", "entry", "node"}));
    kg_cmd->add_option("--out", kg.out_path, "output path (default stdout)");
    kg_cmd->add_option("--seed", kg.seed, "deterministic seed")
        ->each([&kg](const std::string&) { kg.seeded = true; });
    kg_cmd->add_option("--epoch", kg.epoch, "epoch for entry keys");

    std::string bundle_path;
    std::string gk_path;
    auto* dv_cmd =
        app.add_subcommand("denounce-verify", "check a denunciation bundle");
    dv_cmd->add_option("bundle", bundle_path, "bundle file")->required();
    dv_cmd->add_option("--groupkey", gk_path, "group key file (binary)")
        ->required();

    std::string stats_path;
    auto* stats_cmd =
        app.add_subcommand("stats", "recompute counters from an event log");
    stats_cmd->add_option("log", stats_path, "event log file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e);
        return rc == 0 ? 0 : 3;
    }

    try {
        if (*sim_cmd) return do_sim(sim_args);
        if (*kg_cmd) return do_keygen(kg);
        if (*dv_cmd) return do_denounce_verify(bundle_path, gk_path);
        if (*stats_cmd) return do_stats(stats_path);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.code() == ErrorCode::ParseError ||
                       e.code() == ErrorCode::UnknownKind
                   ? 3
                   : 2;
    }
    return 0;
}
