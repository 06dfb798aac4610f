#include "ringsim/report.hpp"

#include <algorithm>
#include <json.hpp>
#include <sstream>

namespace ringsim {

using Json = nlohmann::ordered_json;

namespace {

Json header(const Scenario& s) {
    return Json{{"schema", kReportSchema}, {"record", "header"},   {"scenario", s.name},
                {"kind", to_string(s.kind)}, {"seed", s.seed},     {"transform", transform_name(s.adversary)},
                {"policy", s.policy == SchedPolicy::Edf ? "edf" : "fp"}};
}

Json host_record(const HostStats& h, std::string_view run) {
    return Json{{"record", "host"},
                {"run", run},
                {"activations", h.activations},
                {"sqes_consumed", h.sqes_consumed},
                {"cqes_posted", h.cqes_posted},
                {"cqes_dropped_full", h.cqes_dropped_full},
                {"denied", h.denied},
                {"corrupted", h.corrupted},
                {"duplicated", h.duplicated},
                {"flooded", h.flooded},
                {"sleeps", h.sleeps},
                {"wakes", h.wakes},
                {"wakes_ignored", h.wakes_ignored},
                {"scribbles", h.scribbles},
                {"probes", h.probes},
                {"probe_faults", h.probe_faults},
                {"registrations_rejected", h.registrations_rejected},
                {"rejected_with_state_change", h.rejected_with_state_change}};
}

Json monitor_record(const MonitorTotals& m, std::string_view run) {
    return Json{{"record", "monitor"},
                {"run", run},
                {"faults", m.faults},
                {"window_violations", m.window_violations},
                {"trusted_leaks", m.trusted_leaks}};
}

void latency_records(std::ostringstream& out, const std::map<Opcode, LatencyHistogram>& lat, std::string_view run) {
    for (const auto& [op, h] : lat) {
        Json buckets = Json::object();
        for (const auto& [b, n] : h.buckets) buckets[std::to_string(b)] = n;
        Json j{{"record", "latency"},
               {"run", run},
               {"op", to_string(op)},
               {"count", h.count},
               {"mean_ns", h.count ? h.total / static_cast<SimTime>(h.count) : 0},
               {"max_ns", h.max},
               {"log2_buckets", buckets}};
        out << j.dump() << '\n';
    }
}

std::string hex(std::uint64_t v) {
    std::ostringstream o;
    o << std::hex << v;
    return o.str();
}

}  // namespace

std::string format_trace(const std::vector<TraceRecord>& trace) {
    std::ostringstream out;
    out << "# t task event\n";
    for (const auto& r : trace) out << r.t << ' ' << r.task << ' ' << to_string(r.event) << '\n';
    return out.str();
}

std::string report_game1(const Scenario& s, const Game1Verdict& v) {
    std::ostringstream out;
    out << header(s).dump() << '\n';
    out << Json{{"record", "verdict"},
                {"game", 1},
                {"pass", v.pass},
                {"failure", v.failure},
                {"deadline_ns", s.game.deadline},
                {"valid_by_deadline", v.valid_by_deadline},
                {"all_records_valid", v.all_records_valid},
                {"obligated", v.obligated},
                {"host_message_written", v.host_message_written},
                {"backup_written", v.backup_written},
                {"device_records", v.device_records},
                {"first_write_ns", v.first_write}}
               .dump()
        << '\n';
    out << host_record(v.host, "adversarial").dump() << '\n';
    out << monitor_record(v.monitor, "adversarial").dump() << '\n';
    latency_records(out, v.latency, "adversarial");
    return out.str();
}

std::string report_game2(const Scenario& s, const Game2Verdict& v) {
    std::ostringstream out;
    out << header(s).dump() << '\n';
    out << Json{{"record", "verdict"},
                {"game", 2},
                {"pass", v.pass},
                {"failure", v.failure},
                {"inert_expected", v.inert_expected},
                {"subset", v.subset},
                {"honest_state_hash", hex(v.honest.state_hash)},
                {"adversarial_state_hash", hex(v.adversarial.state_hash)},
                {"honest_accepted", v.honest.accepted.size()},
                {"adversarial_accepted", v.adversarial.accepted.size()},
                {"rejected_records", v.adversarial.rejected_records},
                {"double_deliveries", v.adversarial.double_deliveries},
                {"grants_sound", v.adversarial.grants_sound}}
               .dump()
        << '\n';
    out << host_record(v.honest.host, "honest").dump() << '\n';
    out << host_record(v.adversarial.host, "adversarial").dump() << '\n';
    out << monitor_record(v.adversarial.monitor, "adversarial").dump() << '\n';
    latency_records(out, v.honest.latency, "honest");
    latency_records(out, v.adversarial.latency, "adversarial");
    return out.str();
}

std::string report_bench(const Scenario& s, const std::vector<BenchReport>& runs) {
    std::ostringstream out;
    out << header(s).dump() << '\n';
    for (const auto& r : runs) {
        out << Json{{"record", "bench"},
                    {"mode", to_string(r.mode)},
                    {"workload", to_string(r.workload)},
                    {"completed", r.completed},
                    {"file_ok", r.file_ok},
                    {"bytes", r.bytes},
                    {"elapsed_ns", r.elapsed},
                    {"throughput_bps", r.throughput},
                    {"writes_submitted", r.writes_submitted},
                    {"max_outstanding", r.max_outstanding}}
                   .dump()
            << '\n';
        latency_records(out, r.latency, to_string(r.mode));
    }
    if (runs.size() == 2 && runs[0].throughput > 0) {
        out << Json{{"record", "ratio"}, {"pipelined_over_blocking", runs[1].throughput / runs[0].throughput}}.dump()
            << '\n';
    }
    return out.str();
}

std::string report_fuzz(const Scenario& s, const FuzzReport& adversarial, const FuzzReport& honest) {
    std::ostringstream out;
    out << header(s).dump() << '\n';
    out << Json{{"record", "fuzz"},
                {"iterations", adversarial.iterations},
                {"scribbles", adversarial.scribbles},
                {"step_violations", adversarial.step_violations},
                {"violations", adversarial.violations()},
                {"pass", adversarial.violations() == 0 && honest.violations() == 0}}
               .dump()
        << '\n';
    for (std::size_t i = 0; i < adversarial.ops.size(); ++i) {
        const auto& a = adversarial.ops[i];
        const std::uint32_t honest_max = i < honest.ops.size() ? honest.ops[i].max : 0;
        out << Json{{"record", "steps"},
                    {"op", to_string(a.op)},
                    {"bound", a.bound},
                    {"max", a.max},
                    {"honest_max", honest_max},
                    {"calls", a.calls},
                    {"violations", a.violations}}
                   .dump()
            << '\n';
    }
    out << monitor_record(adversarial.monitor, "adversarial").dump() << '\n';
    return out.str();
}

RunArtifacts run_scenario(Scenario s, const RunOverrides& o) {
    if (o.seed) s.seed = *o.seed;
    if (o.iterations) s.fuzz_iterations = *o.iterations;
    RunArtifacts a;
    switch (s.kind) {
    case ScenarioKind::Game1: {
        const auto v = run_game1(s);
        a.pass = v.pass;
        a.report = report_game1(s, v);
        a.trace = format_trace(v.trace);
        break;
    }
    case ScenarioKind::Game2: {
        const auto v = run_game2(s);
        a.pass = v.pass;
        a.report = report_game2(s, v);
        a.trace = format_trace(v.adversarial.trace);
        break;
    }
    case ScenarioKind::Bench: {
        std::vector<BenchReport> runs;
        if (o.mode) {
            runs.push_back(run_bench(s, *o.mode));
        } else {
            runs.push_back(run_bench(s, BenchMode::Blocking));
            runs.push_back(run_bench(s, BenchMode::Pipelined));
        }
        a.pass = std::all_of(runs.begin(), runs.end(), [](const BenchReport& r) { return r.completed && r.file_ok; });
        a.report = report_bench(s, runs);
        a.trace = format_trace(runs.back().trace);
        break;
    }
    case ScenarioKind::Fuzz: {
        const auto adv = run_fuzz(s.fuzz_iterations, s.seed, true);
        const auto honest = run_fuzz(s.fuzz_iterations, s.seed, false);
        a.pass = adv.violations() == 0 && honest.violations() == 0;
        a.report = report_fuzz(s, adv, honest);
        a.trace = format_trace({});
        break;
    }
    }
    return a;
}

}  // namespace ringsim
