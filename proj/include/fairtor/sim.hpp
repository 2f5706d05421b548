#ifndef FAIRTOR_SIM_HPP
#define FAIRTOR_SIM_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairtor/bytes.hpp"
#include "fairtor/errors.hpp"

namespace fairtor::sim {

// Versioned publish/fetch channel for the records relays and users need.
// Kinds: "gk", "epoch-key", "revocation-list".
class Directory {
public:
    struct Entry {
        std::uint64_t version = 0;
        Bytes payload;
    };

    static bool known_kind(const std::string& kind);
    // Errors: UnknownKind.
    std::uint64_t publish(const std::string& kind, Bytes payload);
    // Latest record. Errors: UnknownKind (also when nothing was published).
    const Entry& fetch(const std::string& kind) const;
    // Every record of the kind, oldest first. Errors: UnknownKind.
    const std::vector<Entry>& all(const std::string& kind) const;

private:
    std::map<std::string, std::vector<Entry>> records_;
};

enum class StepKind {
    Join,
    BuildCircuit,
    Send,
    Misbehave,
    Denounce,
    RevokeCheck,
    AdvanceEpoch,
    Assert,
};

struct Step {
    StepKind kind{};
    std::string user;           // join, build-circuit, send, misbehave, revoke-check
    std::uint64_t circuit = 0;  // build-circuit, send, misbehave
    std::string message;        // send, misbehave
    std::string dump_path;      // denounce: optional bundle file output
    std::string expect;         // revoke-check: "accepted", "rejected" or empty
    std::uint64_t count = 1;    // advance-epoch
    // assert: exactly one of counter/event, with at least one bound
    std::string counter;
    std::string event;
    std::optional<std::int64_t> equals;
    std::optional<std::int64_t> min;
    std::optional<std::int64_t> max;
};

struct Scenario {
    std::string name;
    std::size_t group_size = 0;
    std::size_t k = 8;
    std::uint64_t retention = 24;  // exit log retention, in epochs
    std::uint64_t gk_window = 2;
    std::uint64_t epoch_window = 1;
    unsigned pow_difficulty = 8;
    bool interactive = false;  // two-round cut-and-choose
    std::vector<std::string> users;
    std::vector<Step> steps;
};

// Errors: ParseError.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);

struct Stats {
    std::uint64_t joins = 0;
    std::uint64_t entry_accepted = 0;
    std::uint64_t entry_rejected = 0;
    std::uint64_t exit_accepted = 0;
    std::uint64_t exit_rejected = 0;
    std::uint64_t tokens_issued = 0;
    std::uint64_t messages_delivered = 0;
    std::uint64_t denunciations_accepted = 0;
    std::uint64_t denunciations_rejected = 0;
    std::uint64_t revocations = 0;
    std::uint64_t records_purged = 0;
    std::map<std::string, std::uint64_t> reject_reasons;

    nlohmann::json to_json() const;
    bool operator==(const Stats&) const = default;
};

struct RunOptions {
    std::optional<std::size_t> k;     // override the scenario's instance count
    std::optional<bool> interactive;  // override the scenario's mode
    std::string dump_gk_path;         // write the final group key here
};

struct RunResult {
    int exit_code = 0;  // 0 ok, 2 assertion or invariant failure
    std::vector<std::string> log_lines;  // one JSON object per line
    Stats stats;
};

// Runs the scenario against a fresh single-entry 3-hop network. The event
// log is deterministic in (scenario, seed). Errors: ParseError for unusable
// configuration; assertion failures are reported via exit_code, not thrown.
RunResult run_scenario(const Scenario& sc, std::uint64_t seed,
                       const RunOptions& opt = {});

// Rebuilds counters from event-log lines; inverse of the in-run bookkeeping,
// so stats_from_log(r.log_lines) == r.stats. Errors: ParseError.
Stats stats_from_log(const std::vector<std::string>& lines);

}  // namespace fairtor::sim

#endif
