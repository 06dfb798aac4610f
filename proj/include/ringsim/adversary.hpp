#pragma once

// Scriptable host adversary. Every decision is drawn from a seeded stream,
// so a policy plus a seed reproduces the same attack schedule.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>

#include "ringsim/ring_protocol.hpp"
#include "ringsim/util.hpp"

namespace ringsim {

enum class OpAction : std::uint8_t { Honest, Deny, Delay, Corrupt, Duplicate, Flood, None };

std::string_view to_string(OpAction a);
std::optional<OpAction> parse_op_action(std::string_view s);
std::optional<Opcode> parse_opcode(std::string_view s);
std::string_view to_string(Opcode op);

struct OpRule {
    OpAction action = OpAction::Honest;
    SimTime delay = 0;
    std::uint32_t flood = 0;
    /// Chance that the rule fires for a given op; honest otherwise.
    double probability = 1.0;
};

/// Lies the host can tell while answering ENCLAVE_MMAP.
enum class RegistrationAttack : std::uint8_t {
    None,
    DuplicatePages,      // the same physical page listed twice
    EnclavePrivatePage,  // a page backing trusted enclave memory
    KernelPage,          // a page of the trusted-kernel region
    WrongSize,           // fewer bytes than requested
    UnregisteredAddress, // returns an address without registering anything
};

std::string_view to_string(RegistrationAttack a);
std::optional<RegistrationAttack> parse_registration_attack(std::string_view s);

struct AdversaryPolicy {
    OpRule default_rule;
    std::map<Opcode, OpRule> per_op;
    std::optional<SimTime> kill_proxy_at;
    /// Chance per host activation of scribbling over shared memory.
    double scribble_rate = 0.0;
    std::uint32_t scribble_max_bytes = 16;
    bool never_wake = false;
    /// Draws a fresh random rule for every op.
    bool mix = false;
    RegistrationAttack registration = RegistrationAttack::None;
    /// How many mmap answers carry the registration attack before the host
    /// turns honest.
    std::uint32_t registration_attempts = 1;
    /// Physical probes of trusted memory per host activation.
    std::uint32_t trusted_probes = 0;
    /// Flips bytes in the named file before the run starts.
    std::string tamper_file;

    bool honest() const;
};

class Adversary {
public:
    Adversary() : Adversary(AdversaryPolicy{}, 0) {}
    Adversary(AdversaryPolicy policy, std::uint64_t seed);

    /// Rule applied to one submission consumed at `now`.
    OpRule decide(Opcode op, SimTime now);
    bool scribble_now();
    /// Consumes one registration attack if any remain.
    RegistrationAttack next_registration();

    const AdversaryPolicy& policy() const { return policy_; }
    Rng& rng() { return rng_; }

private:
    OpRule random_rule();

    AdversaryPolicy policy_;
    Rng rng_;
    std::uint32_t registrations_used_ = 0;
};

}  // namespace ringsim
