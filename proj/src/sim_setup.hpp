#pragma once

// Shared wiring for the scenario drivers: one runtime, one host, one victim.

#include <memory>

#include "ringsim/harness.hpp"
#include "ringsim/host_model.hpp"
#include "ringsim/runtime.hpp"
#include "ringsim/scenario.hpp"
#include "ringsim/vfs.hpp"

namespace ringsim::detail {

inline constexpr const char* kVictimBinary = "victim";

struct Sim {
    explicit Sim(const RuntimeConfig& rc) : rt(rc) {}

    Runtime rt;
    VirtualFs vfs;
    std::unique_ptr<HostModel> host;
    EnclaveId victim = 0;
    TaskId host_task = 0;
};

/// Builds the world for `s` with the given adversary. Extra files can be
/// added to the vfs through `prepare` before the host starts.
template <class Prepare>
Result<std::unique_ptr<Sim>> build_sim(const Scenario& s, const AdversaryPolicy& policy, Prepare prepare) {
    RuntimeConfig rc;
    rc.policy = s.policy;
    rc.cores = s.cores;
    rc.world.pool_pages = 2048;
    rc.kernel.root_period = s.period;
    rc.kernel.root_budget = s.enclave_budget;
    rc.kernel.root_quota_pages = 512;
    auto sim = std::make_unique<Sim>(rc);

    if (!s.vfs_manifest.empty()) {
        auto fs = VirtualFs::from_manifest(s.vfs_manifest);
        if (!fs.ok()) return Err{fs.error()};
        sim->vfs = std::move(*fs);
    }
    prepare(sim->vfs);

    sim->rt.kernel().register_binary(kVictimBinary, BinarySpec{s.enclave_budget, 256, 2, 0, 32, 32});
    HostConfig hc = s.host;
    hc.latency_seed = s.seed * 0x2545f4914f6cdd1dULL + 1;
    sim->host = std::make_unique<HostModel>(sim->rt.kernel(), sim->vfs, Adversary(policy, s.seed), hc);

    for (const auto& bg : s.background) {
        const SimTime burn = bg.budget;
        auto t = sim->rt.add_host_core(bg.period, bg.budget, bg.priority, bg.core,
                                       [burn](SimTime) { return burn; });
        if (!t.ok()) return Err{t.error()};
    }
    HostModel* host = sim->host.get();
    auto ht = sim->rt.add_host_core(s.host_period, s.host_budget, s.host_priority, s.host_core,
                                    [host](SimTime now) { return host->activate(now); });
    if (!ht.ok()) return Err{ht.error()};
    sim->host_task = *ht;

    auto id = sim->host->spawn(kVictimBinary);
    if (!id.ok()) return Err{id.error()};
    sim->victim = *id;
    return sim;
}

inline MonitorTotals totals(const ShmWorld& w) {
    const auto m = w.monitor();
    return {m.faults, m.window_violations, m.trusted_leaks};
}

}  // namespace ringsim::detail
