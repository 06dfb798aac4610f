#include "ringsim/scenario.hpp"

#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace ringsim {

std::string_view to_string(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::Game1: return "game1";
    case ScenarioKind::Game2: return "game2";
    case ScenarioKind::Bench: return "bench";
    case ScenarioKind::Fuzz: return "fuzz";
    }
    return "?";
}

std::string_view to_string(BenchMode m) { return m == BenchMode::Blocking ? "blocking" : "pipelined"; }
std::string_view to_string(BenchWorkload w) { return w == BenchWorkload::Stream ? "stream" : "alternate"; }

std::optional<BenchMode> parse_bench_mode(std::string_view s) {
    if (s == "blocking") return BenchMode::Blocking;
    if (s == "pipelined") return BenchMode::Pipelined;
    return std::nullopt;
}

Scenario default_scenario(ScenarioKind kind) {
    Scenario s;
    s.kind = kind;
    s.name = std::string(to_string(kind));
    if (kind == ScenarioKind::Game2) s.duration = 120'000'000;
    if (kind == ScenarioKind::Bench) {
        s.cores = 2;
        s.enclave_budget = s.period;
        s.host_budget = s.host_period;
        s.host_core = 1;
        s.host.base_latency = 50'000;
        s.host.jitter = 2'000;
        s.host.idle_quantum = 5'000;
        s.duration = 10'000'000'000;
    }
    return s;
}

namespace {

class Fail : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

template <class T>
T as(const std::string& key, const std::string& v) {
    try {
        return boost::lexical_cast<T>(v);
    } catch (const boost::bad_lexical_cast&) {
        throw Fail("bad value for " + key + ": " + v);
    }
}

bool as_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw Fail("bad boolean for " + key + ": " + v);
}

using Setter = std::function<void(const std::string& key, const std::string& value)>;

void apply(const boost::property_tree::ptree& section, const std::string& name,
           const std::map<std::string, Setter>& setters) {
    for (const auto& [key, node] : section) {
        auto it = setters.find(key);
        if (it == setters.end()) throw Fail("unknown key " + name + "." + key);
        it->second(key, node.data());
    }
}

void parse_adversary(const boost::property_tree::ptree& section, AdversaryPolicy& a) {
    std::map<Opcode, OpRule> rules;
    for (const auto& [key, node] : section) {
        const std::string v = node.data();
        if (key == "default") {
            auto act = parse_op_action(v);
            if (!act) throw Fail("bad action " + v);
            a.default_rule.action = *act;
        } else if (key == "default_delay") {
            a.default_rule.delay = as<SimTime>(key, v);
        } else if (key == "default_flood") {
            a.default_rule.flood = as<std::uint32_t>(key, v);
        } else if (key == "default_probability") {
            a.default_rule.probability = as<double>(key, v);
        } else if (key == "kill_proxy_at") {
            a.kill_proxy_at = as<SimTime>(key, v);
        } else if (key == "scribble_rate") {
            a.scribble_rate = as<double>(key, v);
        } else if (key == "scribble_max_bytes") {
            a.scribble_max_bytes = as<std::uint32_t>(key, v);
        } else if (key == "never_wake") {
            a.never_wake = as_bool(key, v);
        } else if (key == "mix") {
            a.mix = as_bool(key, v);
        } else if (key == "registration") {
            auto r = parse_registration_attack(v);
            if (!r) throw Fail("bad registration attack " + v);
            a.registration = *r;
        } else if (key == "registration_attempts") {
            a.registration_attempts = as<std::uint32_t>(key, v);
        } else if (key == "trusted_probes") {
            a.trusted_probes = as<std::uint32_t>(key, v);
        } else if (key == "tamper_file") {
            a.tamper_file = v;
        } else {
            // <opcode> | <opcode>_delay | <opcode>_flood | <opcode>_probability
            const auto us = key.rfind('_');
            std::string op_name = key;
            std::string field;
            if (!parse_opcode(key) && us != std::string::npos) {
                op_name = key.substr(0, us);
                field = key.substr(us + 1);
            }
            auto op = parse_opcode(op_name);
            if (!op) throw Fail("unknown key adversary." + key);
            OpRule& r = rules[*op];
            if (field.empty()) {
                auto act = parse_op_action(v);
                if (!act) throw Fail("bad action " + v);
                r.action = *act;
            } else if (field == "delay") {
                r.delay = as<SimTime>(key, v);
            } else if (field == "flood") {
                r.flood = as<std::uint32_t>(key, v);
            } else if (field == "probability") {
                r.probability = as<double>(key, v);
            } else {
                throw Fail("unknown key adversary." + key);
            }
        }
    }
    for (auto& [op, r] : rules) a.per_op[op] = r;
}

}  // namespace

Result<Scenario> parse_scenario(std::string_view text, std::string* error) {
    boost::property_tree::ptree pt;
    try {
        std::istringstream in{std::string(text)};
        boost::property_tree::read_ini(in, pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        if (error) *error = e.what();
        return Err{Errc::InvalidArgument};
    }
    ScenarioKind kind = ScenarioKind::Game1;
    if (auto k = pt.get_optional<std::string>("scenario.kind")) {
        if (*k == "game1") kind = ScenarioKind::Game1;
        else if (*k == "game2") kind = ScenarioKind::Game2;
        else if (*k == "bench") kind = ScenarioKind::Bench;
        else if (*k == "fuzz") kind = ScenarioKind::Fuzz;
        else {
            if (error) *error = "unknown scenario kind " + *k;
            return Err{Errc::InvalidArgument};
        }
    }
    Scenario s = default_scenario(kind);
    try {
        for (const auto& [name, section] : pt) {
            if (!section.data().empty()) throw Fail("key outside section: " + name);
            if (name == "scenario") {
                apply(section, name,
                      {{"name", [&](auto&, auto& v) { s.name = v; }},
                       {"kind", [](auto&, auto&) {}},
                       {"seed", [&](auto& k, auto& v) { s.seed = as<std::uint64_t>(k, v); }},
                       {"duration", [&](auto& k, auto& v) { s.duration = as<SimTime>(k, v); }}});
            } else if (name == "sched") {
                apply(section, name,
                      {{"policy",
                        [&](auto& k, auto& v) {
                            if (v == "fp") s.policy = SchedPolicy::FixedPriority;
                            else if (v == "edf") s.policy = SchedPolicy::Edf;
                            else throw Fail("bad value for " + k + ": " + v);
                        }},
                       {"cores", [&](auto& k, auto& v) { s.cores = as<std::uint32_t>(k, v); }},
                       {"period", [&](auto& k, auto& v) { s.period = as<SimTime>(k, v); }},
                       {"enclave_budget", [&](auto& k, auto& v) { s.enclave_budget = as<SimTime>(k, v); }},
                       {"host_period", [&](auto& k, auto& v) { s.host_period = as<SimTime>(k, v); }},
                       {"host_budget", [&](auto& k, auto& v) { s.host_budget = as<SimTime>(k, v); }},
                       {"host_priority", [&](auto& k, auto& v) { s.host_priority = as<int>(k, v); }},
                       {"host_core", [&](auto& k, auto& v) { s.host_core = as<std::uint32_t>(k, v); }}});
            } else if (name == "host") {
                HostConfig& h = s.host;
                apply(section, name,
                      {{"idle_timeout", [&](auto& k, auto& v) { h.idle_timeout = as<SimTime>(k, v); }},
                       {"idle_quantum", [&](auto& k, auto& v) { h.idle_quantum = as<SimTime>(k, v); }},
                       {"activation_cost", [&](auto& k, auto& v) { h.activation_cost = as<SimTime>(k, v); }},
                       {"op_cost", [&](auto& k, auto& v) { h.op_cost = as<SimTime>(k, v); }},
                       {"base_latency", [&](auto& k, auto& v) { h.base_latency = as<SimTime>(k, v); }},
                       {"jitter", [&](auto& k, auto& v) { h.jitter = as<SimTime>(k, v); }},
                       {"batch", [&](auto& k, auto& v) { h.batch = as<std::uint32_t>(k, v); }}});
            } else if (name == "adversary") {
                parse_adversary(section, s.adversary);
            } else if (name == "game") {
                GameParams& g = s.game;
                apply(section, name,
                      {{"deadline", [&](auto& k, auto& v) { g.deadline = as<SimTime>(k, v); }},
                       {"message_at", [&](auto& k, auto& v) { g.message_at = as<SimTime>(k, v); }},
                       {"message_valid", [&](auto& k, auto& v) { g.message_valid = as_bool(k, v); }},
                       {"port", [&](auto& k, auto& v) { g.port = as<std::uint16_t>(k, v); }},
                       {"records", [&](auto& k, auto& v) { g.records = as<std::uint32_t>(k, v); }},
                       {"device_rx", [&](auto& k, auto& v) { g.device_rx = as<std::size_t>(k, v); }},
                       {"call_timeout", [&](auto& k, auto& v) { g.call_timeout = as<SimTime>(k, v); }},
                       {"retries", [&](auto& k, auto& v) { g.retries = as<std::uint32_t>(k, v); }}});
            } else if (name == "bench") {
                BenchParams& b = s.bench;
                apply(section, name,
                      {{"mode",
                        [&](auto& k, auto& v) {
                            auto m = parse_bench_mode(v);
                            if (!m) throw Fail("bad value for " + k + ": " + v);
                            b.mode = *m;
                        }},
                       {"workload",
                        [&](auto& k, auto& v) {
                            if (v == "stream") b.workload = BenchWorkload::Stream;
                            else if (v == "alternate") b.workload = BenchWorkload::Alternate;
                            else throw Fail("bad value for " + k + ": " + v);
                        }},
                       {"chunk_bytes", [&](auto& k, auto& v) { b.chunk_bytes = as<std::size_t>(k, v); }},
                       {"chunks", [&](auto& k, auto& v) { b.chunks = as<std::size_t>(k, v); }},
                       {"compute_per_chunk", [&](auto& k, auto& v) { b.compute_per_chunk = as<SimTime>(k, v); }},
                       {"block_size", [&](auto& k, auto& v) { b.block_size = as<std::uint32_t>(k, v); }}});
            } else if (name == "fuzz") {
                apply(section, name,
                      {{"iterations", [&](auto& k, auto& v) { s.fuzz_iterations = as<std::uint64_t>(k, v); }}});
            } else if (name == "vfs") {
                for (const auto& [key, node] : section) s.vfs_manifest += node.data() + "\n";
            } else if (name.rfind("task.", 0) == 0) {
                BackgroundTask t;
                apply(section, name,
                      {{"period", [&](auto& k, auto& v) { t.period = as<SimTime>(k, v); }},
                       {"budget", [&](auto& k, auto& v) { t.budget = as<SimTime>(k, v); }},
                       {"priority", [&](auto& k, auto& v) { t.priority = as<int>(k, v); }},
                       {"core", [&](auto& k, auto& v) { t.core = as<std::uint32_t>(k, v); }}});
                s.background.push_back(t);
            } else {
                throw Fail("unknown section " + name);
            }
        }
    } catch (const Fail& f) {
        if (error) *error = f.what();
        return Err{Errc::InvalidArgument};
    }
    return s;
}

Result<Scenario> load_scenario(const std::string& path, std::string* error) {
    std::ifstream in(path);
    if (!in) {
        if (error) *error = "cannot open " + path;
        return Err{Errc::InvalidArgument};
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario(ss.str(), error);
}

}  // namespace ringsim
