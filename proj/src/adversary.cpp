#include "ringsim/adversary.hpp"

#include <array>

namespace ringsim {

namespace {
constexpr std::array<std::string_view, 7> kActionNames{"honest", "deny",      "delay", "corrupt",
                                                      "duplicate", "flood", "none"};
constexpr std::array<std::string_view, 19> kOpNames{
    "nop",    "open",   "read",   "write",  "close",  "statx",  "unlink",
    "mkdir",  "sync",   "socket", "bind",   "listen", "accept", "recv",
    "send",   "writev", "getpid", "enclave_mmap", "enclave_spawn"};
constexpr std::array<std::string_view, 6> kRegNames{"none",       "duplicate_pages", "enclave_private",
                                                    "kernel_page", "wrong_size",     "unregistered"};
}  // namespace

std::string_view to_string(OpAction a) { return kActionNames.at(static_cast<std::size_t>(a)); }

std::optional<OpAction> parse_op_action(std::string_view s) {
    for (std::size_t i = 0; i < kActionNames.size(); ++i)
        if (kActionNames[i] == s) return static_cast<OpAction>(i);
    return std::nullopt;
}

std::string_view to_string(Opcode op) {
    const auto i = static_cast<std::size_t>(op);
    return i < kOpNames.size() ? kOpNames[i] : "unknown";
}

std::optional<Opcode> parse_opcode(std::string_view s) {
    for (std::size_t i = 0; i < kOpNames.size(); ++i)
        if (kOpNames[i] == s) return static_cast<Opcode>(i);
    return std::nullopt;
}

std::string_view to_string(RegistrationAttack a) { return kRegNames.at(static_cast<std::size_t>(a)); }

std::optional<RegistrationAttack> parse_registration_attack(std::string_view s) {
    for (std::size_t i = 0; i < kRegNames.size(); ++i)
        if (kRegNames[i] == s) return static_cast<RegistrationAttack>(i);
    return std::nullopt;
}

bool AdversaryPolicy::honest() const {
    auto plain = [](const OpRule& r) {
        return r.action == OpAction::Honest || r.action == OpAction::None || r.probability <= 0;
    };
    if (!plain(default_rule)) return false;
    for (const auto& [op, r] : per_op)
        if (!plain(r)) return false;
    return !kill_proxy_at && scribble_rate <= 0 && !never_wake && !mix &&
           registration == RegistrationAttack::None && trusted_probes == 0 && tamper_file.empty();
}

Adversary::Adversary(AdversaryPolicy policy, std::uint64_t seed)
    : policy_(std::move(policy)), rng_(seed ^ 0x9e3779b97f4a7c15ULL) {}

OpRule Adversary::random_rule() {
    OpRule r;
    switch (rng_.below(8)) {
    case 0: r.action = OpAction::Deny; break;
    case 1:
        r.action = OpAction::Delay;
        r.delay = rng_.range(10'000, 5'000'000);
        break;
    case 2: r.action = OpAction::Corrupt; break;
    case 3: r.action = OpAction::Duplicate; break;
    case 4:
        r.action = OpAction::Flood;
        r.flood = static_cast<std::uint32_t>(rng_.range(1, 128));
        break;
    default: r.action = OpAction::Honest; break;
    }
    return r;
}

OpRule Adversary::decide(Opcode op, SimTime /*now*/) {
    if (policy_.mix) return random_rule();
    auto it = policy_.per_op.find(op);
    const OpRule& rule = it != policy_.per_op.end() ? it->second : policy_.default_rule;
    if (rule.probability < 1.0 && !rng_.chance(rule.probability)) return OpRule{};
    return rule;
}

bool Adversary::scribble_now() { return policy_.scribble_rate > 0 && rng_.chance(policy_.scribble_rate); }

RegistrationAttack Adversary::next_registration() {
    if (policy_.registration == RegistrationAttack::None) return RegistrationAttack::None;
    if (registrations_used_ >= policy_.registration_attempts) return RegistrationAttack::None;
    ++registrations_used_;
    return policy_.registration;
}

}  // namespace ringsim
