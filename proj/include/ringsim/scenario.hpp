#pragma once

// Scenario description: INI-style sections of key = value lines. Every
// run is a pure function of the scenario and its seed.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ringsim/adversary.hpp"
#include "ringsim/host_model.hpp"
#include "ringsim/rt_scheduler.hpp"

namespace ringsim {

enum class ScenarioKind : std::uint8_t { Game1, Game2, Bench, Fuzz };
enum class BenchMode : std::uint8_t { Blocking, Pipelined };
enum class BenchWorkload : std::uint8_t { Stream, Alternate };

std::string_view to_string(ScenarioKind k);
std::string_view to_string(BenchMode m);
std::string_view to_string(BenchWorkload w);
std::optional<BenchMode> parse_bench_mode(std::string_view s);

struct BackgroundTask {
    SimTime period = 0;
    SimTime budget = 0;
    int priority = 0;
    std::uint32_t core = 0;
};

struct GameParams {
    SimTime deadline = 20'000'000;
    SimTime message_at = 5'000'000;
    bool message_valid = true;
    std::uint16_t port = 8080;
    std::uint32_t records = 16;
    std::size_t device_rx = 32;
    SimTime call_timeout = 3'000'000;
    std::uint32_t retries = 4;
};

struct BenchParams {
    BenchMode mode = BenchMode::Pipelined;
    BenchWorkload workload = BenchWorkload::Stream;
    std::size_t chunk_bytes = 4096;
    std::size_t chunks = 256;
    SimTime compute_per_chunk = 10'000;
    std::uint32_t block_size = 4096;
};

struct Scenario {
    std::string name = "unnamed";
    ScenarioKind kind = ScenarioKind::Game1;
    std::uint64_t seed = 1;
    SimTime duration = 40'000'000;

    SchedPolicy policy = SchedPolicy::FixedPriority;
    std::uint32_t cores = 1;
    SimTime period = 1'000'000;
    SimTime enclave_budget = 200'000;
    SimTime host_period = 1'000'000;
    SimTime host_budget = 500'000;
    int host_priority = 10;
    std::uint32_t host_core = 0;
    std::vector<BackgroundTask> background;

    HostConfig host{};
    AdversaryPolicy adversary{};
    std::string vfs_manifest;
    GameParams game{};
    BenchParams bench{};
    std::uint64_t fuzz_iterations = 100'000;
};

/// Parses scenario text; unknown sections and keys are rejected.
Result<Scenario> parse_scenario(std::string_view text, std::string* error = nullptr);
Result<Scenario> load_scenario(const std::string& path, std::string* error = nullptr);
Scenario default_scenario(ScenarioKind kind);

}  // namespace ringsim
