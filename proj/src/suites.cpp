#include <algorithm>

#include "ringsim/harness.hpp"

namespace ringsim {

namespace {

constexpr std::array<const char*, 10> kGame1Transforms = {
    "honest", "deny", "delay", "corrupt", "flood", "duplicate", "kill_proxy", "never_wake", "scribble", "mix"};

constexpr std::array<const char*, 17> kGame2Transforms = {
    "honest",   "deny",        "delay",       "corrupt",  "flood",          "duplicate",
    "scribble", "never_wake",  "mix",         "tamper_file", "kill_proxy",  "reg_duplicate_pages",
    "reg_enclave_private", "reg_kernel_page", "reg_wrong_size", "reg_unregistered", "probes"};

const std::array<Opcode, 8> kTargetOps = {Opcode::Read,  Opcode::Recv, Opcode::Accept, Opcode::Socket,
                                          Opcode::Bind,  Opcode::Open, Opcode::Listen, Opcode::EnclaveMmap};

OpRule random_rule(Rng& r, OpAction action) {
    OpRule rule;
    rule.action = action;
    rule.probability = r.chance(0.5) ? 1.0 : 0.3 + 0.7 * double(r.below(1000)) / 1000.0;
    if (action == OpAction::Delay) rule.delay = r.range(10'000, 12'000'000);
    if (action == OpAction::Flood) rule.flood = static_cast<std::uint32_t>(r.range(1, 128));
    return rule;
}

// Either a blanket rule or one aimed at a few opcodes.
void apply_rule(Rng& r, AdversaryPolicy& p, OpAction action) {
    if (r.chance(0.5)) {
        p.default_rule = random_rule(r, action);
        return;
    }
    const std::size_t n = 1 + r.below(3);
    for (std::size_t i = 0; i < n; ++i) p.per_op[kTargetOps[r.below(kTargetOps.size())]] = random_rule(r, action);
}

void randomize_platform(Rng& r, Scenario& s) {
    s.policy = r.chance(0.5) ? SchedPolicy::FixedPriority : SchedPolicy::Edf;
    s.host.base_latency = r.range(5'000, 200'000);
    s.host.jitter = r.range(0, 50'000);
    s.host.idle_timeout = r.range(50'000, 500'000);
    s.host.batch = static_cast<std::uint32_t>(r.range(1, 32));
    const std::size_t bg = r.below(3);
    constexpr std::array<SimTime, 3> periods = {500'000, 1'000'000, 2'000'000};
    for (std::size_t i = 0; i < bg; ++i) {
        BackgroundTask t;
        t.period = periods[r.below(periods.size())];
        t.budget = t.period * r.range(1, 15) / 100;
        t.priority = static_cast<int>(r.range(-2, 9));
        s.background.push_back(t);
    }
}

void apply_transform(Rng& r, Scenario& s, std::string_view t) {
    AdversaryPolicy& p = s.adversary;
    if (t == "deny") apply_rule(r, p, OpAction::Deny);
    else if (t == "delay") apply_rule(r, p, OpAction::Delay);
    else if (t == "corrupt") apply_rule(r, p, OpAction::Corrupt);
    else if (t == "flood") apply_rule(r, p, OpAction::Flood);
    else if (t == "duplicate") apply_rule(r, p, OpAction::Duplicate);
    else if (t == "kill_proxy") p.kill_proxy_at = r.range(0, s.game.deadline);
    else if (t == "never_wake") {
        p.never_wake = true;
        s.host.idle_timeout = r.range(20'000, 300'000);
    } else if (t == "scribble") {
        p.scribble_rate = 0.05 + 0.95 * double(r.below(1000)) / 1000.0;
        p.scribble_max_bytes = static_cast<std::uint32_t>(r.range(1, 64));
    } else if (t == "mix") {
        p.mix = true;
        if (r.chance(0.5)) p.scribble_rate = 0.1 * double(r.below(1000)) / 1000.0;
        if (r.chance(0.25)) p.never_wake = true;
        if (r.chance(0.25)) p.kill_proxy_at = r.range(0, s.duration);
    } else if (t == "tamper_file") {
        p.tamper_file = "/data/records";
    } else if (t == "probes") {
        p.trusted_probes = static_cast<std::uint32_t>(r.range(1, 8));
    } else if (t.starts_with("reg_")) {
        p.registration = *parse_registration_attack(t.substr(4));
        p.registration_attempts = static_cast<std::uint32_t>(r.range(1, 2));
    }
}

}  // namespace

std::string transform_name(const AdversaryPolicy& p) {
    if (p.registration != RegistrationAttack::None) return "reg_" + std::string(to_string(p.registration));
    if (!p.tamper_file.empty()) return "tamper_file";
    if (p.mix) return "mix";
    if (p.never_wake) return "never_wake";
    if (p.kill_proxy_at) return "kill_proxy";
    if (p.scribble_rate > 0) return "scribble";
    if (p.trusted_probes > 0) return "probes";
    if (p.default_rule.action != OpAction::Honest) return std::string(to_string(p.default_rule.action));
    for (const auto& [op, rule] : p.per_op)
        if (rule.action != OpAction::Honest) return std::string(to_string(rule.action));
    return "honest";
}

std::vector<Scenario> game1_suite(std::size_t n, std::uint64_t seed) {
    std::vector<Scenario> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng r(seed * 0x9e3779b97f4a7c15ULL + i);
        Scenario s = default_scenario(ScenarioKind::Game1);
        s.seed = seed * 1'000'003 + i;
        const char* t = kGame1Transforms[i % kGame1Transforms.size()];
        s.name = std::string("game1-") + t + "-" + std::to_string(i);
        randomize_platform(r, s);
        s.game.deadline = r.range(8, 30) * s.period;
        s.game.message_at = r.range(200'000, s.game.deadline * 3 / 4);
        s.game.message_valid = r.chance(0.85);
        s.duration = s.game.deadline + 2 * s.period;
        apply_transform(r, s, t);
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<Scenario> game2_suite(std::size_t n, std::uint64_t seed) {
    std::vector<Scenario> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        Rng r(seed * 0xbf58476d1ce4e5b9ULL + i);
        Scenario s = default_scenario(ScenarioKind::Game2);
        s.seed = seed * 1'000'033 + i;
        const char* t = kGame2Transforms[i % kGame2Transforms.size()];
        s.name = std::string("game2-") + t + "-" + std::to_string(i);
        randomize_platform(r, s);
        s.game.records = static_cast<std::uint32_t>(r.range(4, 16));
        s.game.call_timeout = r.range(1'000'000, 4'000'000);
        s.game.retries = static_cast<std::uint32_t>(r.range(2, 4));
        s.duration = 200'000'000;
        apply_transform(r, s, t);
        // Each refused grant costs the victim about one call timeout.
        if (s.adversary.registration != RegistrationAttack::None)
            s.game.retries = std::max(s.game.retries, s.adversary.registration_attempts + 2);
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace ringsim
