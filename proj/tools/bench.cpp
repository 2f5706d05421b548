// Compares the serial reference paths against the OpenMP kernels for the
// three data-parallel hot spots: group-signature branch verification,
// cut-and-choose opening checks, and the proof-of-work nonce scan.

#include <chrono>
#include <cstdio>
#include <vector>

#include "fairtor/blindsig.hpp"
#include "fairtor/crypto.hpp"
#include "fairtor/group.hpp"
#include "fairtor/groupsig.hpp"
#include "fairtor/handshake.hpp"
#include "fairtor/parallel.hpp"
#include "fairtor/rng.hpp"

using namespace fairtor;

namespace {

using Clock = std::chrono::steady_clock;

template <typename F>
double time_ms(std::size_t reps, F&& fn) {
    auto t0 = Clock::now();
    for (std::size_t i = 0; i < reps; ++i) fn();
    auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() /
           static_cast<double>(reps);
}

void report(const char* name, double serial_ms, double parallel_ms,
            bool equal) {
    std::printf("%-28s %10.2f ms %10.2f ms %7.2fx   %s\n", name, serial_ms,
                parallel_ms, serial_ms / parallel_ms, equal ? "match" : "DIFFER");
}

MemberKey enroll(GroupManagerKey& mk, GroupKey& gk, Rng& rng) {
    const GroupParams& pp = gk.params;
    Scalar secret = random_scalar(pp, rng);
    PowPuzzle puzzle = gs_issue_puzzle(mk, rng);
    PowSolution sol = pow_solve(puzzle);
    return gs_join(mk, gk, secret, puzzle, sol, rng);
}

}  // namespace

int main() {
    GroupParams pp = GroupParams::desk();
    Rng rng(0x6265'6e63'6821'0001ULL);

    std::printf("%-28s %13s %13s %9s   %s\n", "kernel", "serial", "parallel",
                "speedup", "results");

    {
        auto [mk, gk] = gs_setup(pp, rng);
        mk.pow_difficulty = 4;
        std::vector<MemberKey> members;
        for (int i = 0; i < 32; ++i) members.push_back(enroll(mk, gk, rng));
        Bytes msg = to_bytes("bench message");
        GroupSignature sig = gs_sign(view(msg), members[7], gk, rng);
        bool r_serial = true;
        bool r_parallel = true;
        double s = time_ms(20, [&] {
            r_serial = gs_verify(sig, view(msg), gk, 2, par::Mode::Serial) &&
                       r_serial;
        });
        double p = time_ms(20, [&] {
            r_parallel = gs_verify(sig, view(msg), gk, 2, par::Mode::Parallel) &&
                         r_parallel;
        });
        report("group-sig verify (N=32)", s, p, r_serial == r_parallel);
    }

    {
        auto [mk, gk] = gs_setup(pp, rng);
        mk.pow_difficulty = 4;
        std::vector<MemberKey> members;
        for (int i = 0; i < 8; ++i) members.push_back(enroll(mk, gk, rng));
        EpochSignerKeys sbk = bgs_setup_epoch(0, rng);
        DhKeyPair en = dh_keygen(pp, rng);
        HandshakeConfig cfg;
        cfg.k = 16;
        auto [req, state] = build_entry_request(
            members[3], gk, sbk.public_part(), en.share, cfg, rng);
        (void)state;
        bool ok_serial = true;
        bool ok_parallel = true;
        par::set_default_mode(par::Mode::Serial);
        double s = time_ms(5, [&] {
            ok_serial =
                en_process_entry_request(req, en.secret, gk, sbk, cfg, rng)
                        .response.beta_tilde != 0 &&
                ok_serial;
        });
        par::set_default_mode(par::Mode::Parallel);
        double p = time_ms(5, [&] {
            ok_parallel =
                en_process_entry_request(req, en.secret, gk, sbk, cfg, rng)
                        .response.beta_tilde != 0 &&
                ok_parallel;
        });
        report("entry openings (k=16)", s, p, ok_serial == ok_parallel);
    }

    {
        std::vector<PowPuzzle> puzzles;
        for (int i = 0; i < 4; ++i) {
            PowPuzzle pz;
            pz.challenge = rng.bytes(32);
            pz.difficulty = 14;
            puzzles.push_back(pz);
        }
        std::vector<std::uint64_t> n_serial, n_parallel;
        double s = time_ms(1, [&] {
            for (const auto& pz : puzzles) {
                n_serial.push_back(pow_solve(pz, par::Mode::Serial).nonce);
            }
        });
        double p = time_ms(1, [&] {
            for (const auto& pz : puzzles) {
                n_parallel.push_back(pow_solve(pz, par::Mode::Parallel).nonce);
            }
        });
        report("pow nonce scan (d=14, x4)", s, p, n_serial == n_parallel);
    }

    return 0;
}
