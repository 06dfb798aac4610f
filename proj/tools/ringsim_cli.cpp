#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <map>

#include "ringsim/harness.hpp"
#include "ringsim/report.hpp"

using namespace ringsim;

namespace {

struct Options {
    std::string scenario;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string trace;
    std::string mode;
    std::optional<std::uint64_t> iterations;
    std::size_t runs = 100;
};

bool write_file(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
    return static_cast<bool>(f);
}

int emit(const RunArtifacts& a, const Options& o) {
    if (o.out.empty()) {
        std::cout << a.report;
    } else if (!write_file(o.out, a.report)) {
        std::cerr << "cannot write " << o.out << '\n';
        return 2;
    }
    if (!o.trace.empty() && !write_file(o.trace, a.trace)) {
        std::cerr << "cannot write " << o.trace << '\n';
        return 2;
    }
    return a.pass ? 0 : 1;
}

std::optional<Scenario> scenario_for(const Options& o, std::optional<ScenarioKind> expect) {
    Scenario s;
    if (o.scenario.empty()) {
        s = default_scenario(*expect);
    } else {
        std::string err;
        auto r = load_scenario(o.scenario, &err);
        if (!r.ok()) {
            std::cerr << o.scenario << ": " << err << '\n';
            return std::nullopt;
        }
        s = *r;
        if (expect && s.kind != *expect) {
            std::cerr << o.scenario << ": scenario kind is " << to_string(s.kind) << ", expected "
                      << to_string(*expect) << '\n';
            return std::nullopt;
        }
    }
    return s;
}

int run_one(const Options& o, std::optional<ScenarioKind> expect) {
    auto s = scenario_for(o, expect);
    if (!s) return 2;
    RunOverrides ov;
    ov.seed = o.seed;
    ov.iterations = o.iterations;
    if (!o.mode.empty()) {
        ov.mode = parse_bench_mode(o.mode);
        if (!ov.mode) {
            std::cerr << "unknown mode " << o.mode << '\n';
            return 2;
        }
    }
    return emit(run_scenario(*s, ov), o);
}

int run_suite(const Options& o, ScenarioKind kind) {
    const std::uint64_t seed = o.seed.value_or(1);
    const auto suite = kind == ScenarioKind::Game1 ? game1_suite(o.runs, seed) : game2_suite(o.runs, seed);
    std::map<std::string, std::pair<std::size_t, std::size_t>> tally;  // transform -> (runs, fails)
    std::size_t fails = 0;
    for (const auto& s : suite) {
        std::string failure;
        if (kind == ScenarioKind::Game1)
            failure = run_game1(s).failure;
        else
            failure = run_game2(s).failure;
        auto& t = tally[transform_name(s.adversary)];
        ++t.first;
        if (!failure.empty()) {
            ++t.second;
            ++fails;
            std::cerr << "FAIL " << s.name << " seed=" << s.seed << ": " << failure << '\n';
        }
    }
    for (const auto& [name, t] : tally) std::cout << name << " runs=" << t.first << " fails=" << t.second << '\n';
    std::cout << to_string(kind) << " total=" << suite.size() << " fails=" << fails << '\n';
    return fails == 0 ? 0 : 1;
}

void common_flags(CLI::App* c, Options& o) {
    c->add_option("--scenario", o.scenario, "Scenario file")->check(CLI::ExistingFile);
    c->add_option("--seed", o.seed, "Override the scenario seed");
    c->add_option("--out", o.out, "Write the report here instead of stdout");
    c->add_option("--trace", o.trace, "Write the scheduler trace here");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Ring-based enclave I/O simulator"};
    app.require_subcommand(1);
    Options o;

    auto* run = app.add_subcommand("run", "Run a scenario file");
    common_flags(run, o);
    run->get_option("--scenario")->required();
    run->add_option("--mode", o.mode, "Bench mode: blocking or pipelined");
    run->add_option("--iterations", o.iterations, "Fuzz iterations");

    auto* g1 = app.add_subcommand("game1", "Availability game; runs a seeded suite without --scenario");
    common_flags(g1, o);
    g1->add_option("--runs", o.runs, "Suite size");

    auto* g2 = app.add_subcommand("game2", "Integrity game; runs a seeded suite without --scenario");
    common_flags(g2, o);
    g2->add_option("--runs", o.runs, "Suite size");

    auto* bench = app.add_subcommand("bench", "Write-pipelining benchmark");
    common_flags(bench, o);
    bench->add_option("--mode", o.mode, "blocking or pipelined; both when omitted");

    auto* fuzz = app.add_subcommand("fuzz", "Random API calls against scribbled shared memory");
    common_flags(fuzz, o);
    fuzz->add_option("--iterations", o.iterations, "Number of calls");

    CLI11_PARSE(app, argc, argv);

    if (run->parsed()) return run_one(o, std::nullopt);
    if (g1->parsed()) return o.scenario.empty() ? run_suite(o, ScenarioKind::Game1) : run_one(o, ScenarioKind::Game1);
    if (g2->parsed()) return o.scenario.empty() ? run_suite(o, ScenarioKind::Game2) : run_one(o, ScenarioKind::Game2);
    if (bench->parsed()) return run_one(o, ScenarioKind::Bench);
    if (fuzz->parsed()) return run_one(o, ScenarioKind::Fuzz);
    return 2;
}
