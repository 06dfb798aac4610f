// Runs every acceptance criterion and prints one PASS/FAIL line per item.
// Exit status is non-zero if any criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "oracles.hpp"
#include "ringsim/harness.hpp"
#include "ringsim/report.hpp"

using namespace ringsim;

namespace {

constexpr std::uint64_t kSeed = 20240611;

struct Line {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Line game1_suite_check() {
    const auto t0 = std::chrono::steady_clock::now();
    const auto suite = game1_suite(1000, kSeed);
    std::size_t pass = 0, obligated = 0, honoured = 0;
    std::set<std::string> transforms;
    std::string first;
    for (const auto& s : suite) {
        const auto v = run_game1(s);
        transforms.insert(transform_name(s.adversary));
        if (v.pass) ++pass;
        else if (first.empty()) first = s.name + ": " + v.failure;
        if (v.obligated) {
            ++obligated;
            if (v.host_message_written) ++honoured;
        }
    }
    const double secs = seconds_since(t0);
    static const char* kRequired[] = {"deny", "delay", "corrupt", "flood", "duplicate", "kill_proxy", "never_wake", "scribble"};
    const bool covered = std::all_of(std::begin(kRequired), std::end(kRequired), [&](const char* t) { return transforms.contains(t); });
    Line l;
    l.pass = pass == suite.size() && covered && obligated > 0 && honoured == obligated && secs < 60.0;
    l.detail = fmt("%zu/%zu runs passed, %zu transforms, host message owed in %zu runs and written in %zu, %.1fs",
                   pass, suite.size(), transforms.size(), obligated, honoured, secs);
    if (!first.empty()) l.detail += "; first failure " + first;
    return l;
}

Line game2_suite_check() {
    const auto suite = game2_suite(510, kSeed);
    std::size_t pass = 0, inert = 0, rejected = 0;
    std::string first;
    for (const auto& s : suite) {
        const auto v = run_game2(s);
        if (v.pass) ++pass;
        else if (first.empty()) first = s.name + ": " + v.failure;
        if (v.inert_expected) ++inert;
        rejected += v.adversarial.host.registrations_rejected;
    }
    Line l;
    l.pass = pass == suite.size();
    l.detail = fmt("%zu/%zu runs passed, %zu twin-hash checks, %zu lying grants rejected", pass, suite.size(), inert,
                   rejected);
    if (!first.empty()) l.detail += "; first failure " + first;
    return l;
}

Line fuzz_check() {
    const auto r = run_fuzz(100'000, kSeed, true);
    std::uint64_t max_ratio_ops = 0;
    bool all_called = true;
    for (const auto& op : r.ops) {
        if (op.calls == 0) all_called = false;
        if (op.max == op.bound) ++max_ratio_ops;
    }
    Line l;
    l.pass = r.violations() == 0 && r.iterations == 100'000 && all_called;
    l.detail = fmt("%llu iterations, %llu scribbles, %llu step-bound violations, %llu out-of-window accesses, "
                   "%llu trusted leaks",
                   (unsigned long long)r.iterations, (unsigned long long)r.scribbles,
                   (unsigned long long)r.step_violations, (unsigned long long)r.monitor.window_violations,
                   (unsigned long long)r.monitor.trusted_leaks);
    return l;
}

Line translation_check() {
    Rng r(kSeed);
    std::size_t cases = 0, mismatches = 0, hits = 0;
    for (int table_no = 0; table_no < 1000; ++table_no) {
        TranslationTable table(64);
        std::vector<TranslationEntry> entries;
        VirtAddr cursor = r.below(1 << 20) * kPageSize;
        const std::size_t n = r.below(40);
        for (std::size_t i = 0; i < n; ++i) {
            cursor += r.below(4) * kPageSize;
            TranslationEntry e{cursor, r.below(1ULL << 30) * kPageSize, (1 + r.below(8)) * kPageSize};
            if (table.insert(e).ok()) entries.push_back(e);
            cursor += e.size;
        }
        for (int q = 0; q < 10; ++q) {
            VirtAddr addr;
            if (!entries.empty() && r.chance(0.7)) {
                const auto& e = entries[r.below(entries.size())];
                addr = e.enclave_base - 2 + r.below(e.size + 4);
            } else {
                addr = r.chance(0.1) ? r.next() : r.below(cursor + kPageSize);
            }
            const std::size_t len = r.chance(0.5) ? 1 : r.below(3 * kPageSize);
            const auto got = table.translate(addr, len);
            const auto want = oracle::linear_translate(entries, addr, len);
            ++cases;
            if (want) ++hits;
            if (got.ok() != want.has_value() || (got.ok() && *got != *want)) ++mismatches;
        }
    }
    TranslationTable fig;
    const bool inserted = fig.insert({0x11000, 0x2000, 0x1000}).ok();
    const auto t = fig.translate(0x11040);
    const bool fig_ok = inserted && t.ok() && *t == 0x2040;
    Line l;
    l.pass = mismatches == 0 && cases >= 10'000 && hits > 0 && hits < cases && fig_ok;
    l.detail = fmt("%zu random queries (%zu translatable), %zu mismatches vs linear scan, 0x11040 -> %s", cases, hits, mismatches,
                   t.ok() ? fmt("0x%llx", (unsigned long long)*t).c_str() : "error");
    return l;
}

Line scheduler_check() {
    std::size_t sets = 0, short_windows = 0, windows = 0, trace_sets = 0, trace_mismatch = 0;
    std::string first;
    for (int i = 0; i < 24; ++i) {
        const bool harmonic = i % 2 == 0;
        const auto policy = harmonic ? SchedPolicy::FixedPriority : SchedPolicy::Edf;
        const auto tasks = oracle::random_task_set(kSeed + i, 8, harmonic);
        if (!oracle::utilization_fits(tasks, 0)) {
            first = "generator produced an infeasible set";
            ++short_windows;
            continue;
        }
        SimTime longest = 0;
        for (const auto& t : tasks) longest = std::max(longest, t.period);
        const SimTime horizon = 10'000 * longest;
        const auto real = oracle::scheduler_trace(policy, 1, tasks, horizon);
        const auto service = oracle::window_service(real, tasks, horizon);
        for (std::size_t k = 0; k < tasks.size(); ++k)
            for (std::size_t w = 0; w < service[k].size(); ++w) {
                ++windows;
                if (service[k][w] < tasks[k].budget) {
                    ++short_windows;
                    if (first.empty()) first = fmt("set %d task %zu window %zu got %lld", i, k, w, (long long)service[k][w]);
                }
            }
        ++sets;
        ++trace_sets;
        if (real != oracle::reference_trace(policy, 1, tasks, horizon)) {
            ++trace_mismatch;
            if (first.empty()) first = fmt("set %d trace differs from reference", i);
        }
    }
    // Arbitrary priorities, yielding tasks and two cores against the reference.
    Rng r(kSeed ^ 0x5a5a);
    for (int i = 0; i < 60; ++i) {
        const auto policy = i % 2 ? SchedPolicy::Edf : SchedPolicy::FixedPriority;
        const std::uint32_t cores = i % 3 == 0 ? 2 : 1;
        auto tasks = oracle::random_task_set(kSeed * 7 + i, 8, i % 4 < 2);
        for (auto& t : tasks) {
            t.core = cores == 2 ? static_cast<std::uint32_t>(r.below(2)) : 0;
            t.priority = static_cast<int>(r.range(0, 5));
            if (r.chance(0.4) && t.budget > 1) t.work = r.range(1, t.budget - 1);
        }
        if (!oracle::utilization_fits(tasks, 0) || !oracle::utilization_fits(tasks, 1)) continue;
        const SimTime horizon = 20'000;
        ++trace_sets;
        if (oracle::scheduler_trace(policy, cores, tasks, horizon) != oracle::reference_trace(policy, cores, tasks, horizon)) {
            ++trace_mismatch;
            if (first.empty()) first = fmt("mixed set %d trace differs from reference", i);
        }
    }
    Line l;
    l.pass = short_windows == 0 && trace_mismatch == 0 && sets > 0;
    l.detail = fmt("%zu task sets over 10^4 periods each, %zu budget windows short out of %zu, "
                   "%zu/%zu traces equal to the reference simulator",
                   sets, short_windows, windows, trace_sets - trace_mismatch, trace_sets);
    if (!first.empty()) l.detail += "; " + first;
    return l;
}

Line spsc_check() {
    const auto a = oracle::spsc_model_check(2, 5);
    const auto b = oracle::spsc_model_check(4, 9);
    Line l;
    l.pass = a.ok() && b.ok();
    l.detail = fmt("size 2: %llu states %s, size 4: %llu states %s", (unsigned long long)a.states,
                   a.ok() ? "exactly-once in order" : a.failure.c_str(), (unsigned long long)b.states,
                   b.ok() ? "exactly-once in order" : b.failure.c_str());
    return l;
}

Line pipelining_check() {
    Scenario s = default_scenario(ScenarioKind::Bench);
    const bool latency_dominates = s.host.base_latency >= 4 * s.bench.compute_per_chunk;
    const auto sb = run_bench(s, BenchMode::Blocking);
    const auto sp = run_bench(s, BenchMode::Pipelined);
    s.bench.workload = BenchWorkload::Alternate;
    const auto ab = run_bench(s, BenchMode::Blocking);
    const auto ap = run_bench(s, BenchMode::Pipelined);
    const bool ok = sb.file_ok && sp.file_ok && ab.file_ok && ap.file_ok;
    const double stream = sb.throughput > 0 ? sp.throughput / sb.throughput : 0;
    const double alt = ab.throughput > 0 ? ap.throughput / ab.throughput : 0;
    Line l;
    l.pass = ok && latency_dominates && stream >= 1.5 && alt >= 0.9 && alt <= 1.1;
    l.detail = fmt("stream pipelined/blocking %.2fx, alternating %.3fx, outputs %s", stream, alt,
                   ok ? "verified" : "wrong");
    return l;
}

Line posix_check() {
    const auto r = oracle::posix_equivalence(1000, kSeed);
    Line l;
    l.pass = r.ok();
    l.detail = fmt("%zu sequences, %zu completed, %zu buffered/direct differences, %zu differences from written bytes",
                   r.sequences, r.completed, r.mismatches, r.oracle_mismatches);
    if (!r.first_failure.empty()) l.detail += "; " + r.first_failure;
    return l;
}

Line timeout_check() {
    const auto r = oracle::timeout_guarantee(100, kSeed);
    Line l;
    l.pass = r.ok();
    l.detail = fmt("%zu calls, %zu timed out, %zu past timeout+period, worst overshoot %lld ns, alarm %s", r.calls,
                   r.timed_out, r.late, (long long)r.worst_excess, r.alarm_ok ? "interrupted on time" : "failed");
    if (!r.first_failure.empty()) l.detail += "; " + r.first_failure;
    return l;
}

Line determinism_check() {
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(RINGSIM_SCENARIO_DIR))
        if (e.path().extension() == ".scn") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::size_t same = 0, failed = 0;
    std::string first;
    for (const auto& f : files) {
        std::string err;
        auto s = load_scenario(f.string(), &err);
        if (!s.ok()) {
            ++failed;
            if (first.empty()) first = f.filename().string() + ": " + err;
            continue;
        }
        const auto a = run_scenario(*s);
        const auto b = run_scenario(*s);
        if (a.report == b.report && a.trace == b.trace && a.pass) {
            ++same;
        } else {
            ++failed;
            if (first.empty()) first = f.filename().string() + (a.pass ? " differs between runs" : " failed");
        }
    }
    Line l;
    l.pass = failed == 0 && !files.empty();
    l.detail = fmt("%zu/%zu golden scenarios byte-identical across runs", same, files.size());
    if (!first.empty()) l.detail += "; " + first;
    return l;
}

}  // namespace

int main() {
    struct Criterion {
        const char* name;
        Line (*fn)();
    };
    static const Criterion kCriteria[] = {
        {"game1-availability", game1_suite_check}, {"game2-integrity", game2_suite_check},
        {"bounded-step-fuzz", fuzz_check},         {"translation-oracle", translation_check},
        {"scheduler-guarantee", scheduler_check},  {"spsc-model-check", spsc_check},
        {"pipelining", pipelining_check},          {"posix-equivalence", posix_check},
        {"timeout-guarantee", timeout_check},      {"determinism", determinism_check},
    };
    int failures = 0;
    int n = 0;
    for (const auto& c : kCriteria) {
        const auto t0 = std::chrono::steady_clock::now();
        const Line l = c.fn();
        ++n;
        if (!l.pass) ++failures;
        std::printf("%s %2d %s: %s (%.1fs)\n", l.pass ? "PASS" : "FAIL", n, c.name, l.detail.c_str(), seconds_since(t0));
        std::fflush(stdout);
    }
    return failures == 0 ? 0 : 1;
}
