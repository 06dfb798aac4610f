#pragma once

// Scenario drivers: the two adversary games, the write-pipelining bench and
// the ring fuzzer. Each driver is a pure function of its scenario.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ringsim/host_model.hpp"
#include "ringsim/rt_scheduler.hpp"
#include "ringsim/scenario.hpp"
#include "ringsim/step_meter.hpp"

namespace ringsim {

/// Tagged message formats shared by the game drivers and their tests.
namespace wire {
inline constexpr std::size_t kMessageSize = 32;
inline constexpr std::size_t kRecordSize = 64;

/// "MSG1" | seq u32 | 16 payload bytes | tag u64 over the first 24 bytes.
std::vector<std::byte> make_message(std::uint64_t key, std::uint32_t seq, std::uint64_t payload_seed);
std::vector<std::byte> make_backup(std::uint64_t key);
bool valid_message(std::uint64_t key, std::span<const std::byte> m);

/// id u64 | 48 payload bytes | tag u64 over the first 56 bytes.
std::vector<std::byte> make_record(std::uint64_t key, std::uint64_t id);
bool valid_record(std::uint64_t key, std::span<const std::byte> r, std::uint64_t expected_id);

std::uint64_t key_for(std::uint64_t seed);
}  // namespace wire

struct MonitorTotals {
    std::uint64_t faults = 0;
    std::uint64_t window_violations = 0;
    std::uint64_t trusted_leaks = 0;
};

struct Game1Verdict {
    bool pass = false;
    bool valid_by_deadline = false;
    bool all_records_valid = false;
    /// A valid, untouched host message was posted early enough to be owed.
    bool obligated = false;
    bool host_message_written = false;
    bool backup_written = false;
    std::size_t device_records = 0;
    SimTime first_write = -1;
    std::string failure;
    HostStats host;
    MonitorTotals monitor;
    std::vector<TraceRecord> trace;
    std::map<Opcode, LatencyHistogram> latency;
};

Game1Verdict run_game1(const Scenario& s);

struct Game2Run {
    std::map<std::uint64_t, std::vector<std::byte>> accepted;
    std::uint64_t state_hash = 0;
    std::uint64_t rejected_records = 0;
    std::uint64_t double_deliveries = 0;
    bool grants_sound = true;
    HostStats host;
    MonitorTotals monitor;
    std::vector<TraceRecord> trace;
    std::map<Opcode, LatencyHistogram> latency;
};

struct Game2Verdict {
    bool pass = false;
    /// The adversary's effect must be invisible (equal state hashes).
    bool inert_expected = false;
    bool subset = false;
    Game2Run honest;
    Game2Run adversarial;
    std::string failure;
};

/// Runs the scenario twice, once with an honest host, and compares.
Game2Verdict run_game2(const Scenario& s);
Game2Run run_game2_once(const Scenario& s, const AdversaryPolicy& policy);
/// Adversaries whose only possible effect is detectable failure: a run
/// under them must end in exactly the honest state.
bool game2_inert(const AdversaryPolicy& p);

struct BenchReport {
    BenchMode mode = BenchMode::Pipelined;
    BenchWorkload workload = BenchWorkload::Stream;
    bool completed = false;
    bool file_ok = false;
    std::size_t bytes = 0;
    SimTime elapsed = 0;
    double throughput = 0;  // bytes per simulated second
    std::size_t writes_submitted = 0;
    std::size_t max_outstanding = 0;
    std::vector<TraceRecord> trace;
    std::map<Opcode, LatencyHistogram> latency;
};

BenchReport run_bench(const Scenario& s, BenchMode mode);

struct FuzzOpReport {
    MeteredOp op = MeteredOp::TryGetSqe;
    std::uint32_t max = 0;
    std::uint32_t bound = 0;
    std::uint64_t calls = 0;
    std::uint64_t violations = 0;
};

struct FuzzReport {
    std::uint64_t iterations = 0;
    bool scribbling = true;
    std::vector<FuzzOpReport> ops;
    std::uint64_t step_violations = 0;
    MonitorTotals monitor;
    std::uint64_t scribbles = 0;

    std::uint64_t violations() const { return step_violations + monitor.window_violations + monitor.trusted_leaks; }
};

/// Random enclave API calls with a random shared-memory overwrite after
/// each one when `scribble` is set.
FuzzReport run_fuzz(std::uint64_t iterations, std::uint64_t seed, bool scribble = true);

/// Seeded scenario families covering every adversary transform.
std::vector<Scenario> game1_suite(std::size_t n, std::uint64_t seed);
std::vector<Scenario> game2_suite(std::size_t n, std::uint64_t seed);
/// Short tag naming the dominant transform of a suite scenario.
std::string transform_name(const AdversaryPolicy& p);

}  // namespace ringsim
