#pragma once

// Line-delimited JSON reports and plain-text scheduler traces.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ringsim/harness.hpp"

namespace ringsim {

inline constexpr const char* kReportSchema = "ringsim.report/1";

/// One `t task event` line per record, preceded by a header comment.
std::string format_trace(const std::vector<TraceRecord>& trace);

std::string report_game1(const Scenario& s, const Game1Verdict& v);
std::string report_game2(const Scenario& s, const Game2Verdict& v);
std::string report_bench(const Scenario& s, const std::vector<BenchReport>& runs);
std::string report_fuzz(const Scenario& s, const FuzzReport& adversarial, const FuzzReport& honest);

struct RunArtifacts {
    bool pass = false;
    std::string report;
    std::string trace;
};

struct RunOverrides {
    std::optional<std::uint64_t> seed;
    std::optional<BenchMode> mode;
    std::optional<std::uint64_t> iterations;
};

/// Runs whatever the scenario describes and renders its artifacts.
RunArtifacts run_scenario(Scenario s, const RunOverrides& o = {});

}  // namespace ringsim
