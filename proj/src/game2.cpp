#include <algorithm>
#include <set>

#include "ringsim/harness.hpp"
#include "ringsim/libc_shim.hpp"
#include "sim_setup.hpp"

namespace ringsim {

namespace {

constexpr const char* kRecordsPath = "/data/records";

struct ReaderState {
    std::uint64_t key = 0;
    std::uint32_t records = 0;
    std::uint32_t retries = 0;
    SimTime timeout = 0;
    std::map<std::uint64_t, std::vector<std::byte>> accepted;
    std::uint64_t rejected = 0;
    std::uint64_t double_deliveries = 0;
};

Co<void> record_reader(ExecContext& ctx, ReaderState& st) {
    auto e = EnclaveEnv::create(ctx.kernel(), ctx.enclave());
    if (!e.ok()) co_return;
    std::unique_ptr<EnclaveEnv> env = std::move(*e);
    LibcShim::Config cfg;
    cfg.timeouts.timeout = st.timeout;
    LibcShim shim(*env, ctx, cfg);

    std::int64_t fd = -1;
    for (std::uint32_t a = 0; a < st.retries && fd < 0; ++a) fd = co_await shim.open(kRecordsPath, open_flags::kRdOnly);
    if (fd >= 0) {
        for (std::uint32_t i = 0; i < st.records; ++i) {
            for (std::uint32_t a = 0; a < st.retries; ++a) {
                std::vector<std::byte> buf;
                const std::int64_t r = co_await shim.pread(static_cast<std::int32_t>(fd), wire::kRecordSize,
                                                           std::uint64_t(i) * wire::kRecordSize, &buf);
                if (r == static_cast<std::int64_t>(wire::kRecordSize) && wire::valid_record(st.key, buf, i)) {
                    st.accepted[i].assign(buf.begin() + 8, buf.begin() + 56);
                    break;
                }
                if (r >= 0) ++st.rejected;
            }
        }
        (void)co_await shim.close(static_cast<std::int32_t>(fd));
    }
    env->io().pump();
    st.double_deliveries = env->io().double_deliveries();
}

// Every page mapped into the enclave must be the enclave's own private
// memory, its rings, or a normal-world shared page, and no physical page
// may be reachable through two mappings.
bool grants_sound(const ShmWorld& world, const TrustedKernel& kernel, EnclaveId id) {
    const EnclaveRecord* rec = kernel.enclave(id);
    if (!rec) return true;
    const std::set<PhysPageId> own(rec->private_pages.begin(), rec->private_pages.end());
    std::set<PhysPageId> seen;
    for (const auto& [base, m] : world.space(rec->space).mappings) {
        for (const PhysPageId pg : *m.pages) {
            if (!seen.insert(pg).second) return false;
            auto e = world.page(pg);
            if (!e) return false;
            switch (e->purpose) {
            case PagePurpose::Private:
                if (!own.contains(pg)) return false;
                break;
            case PagePurpose::Shared:
            case PagePurpose::Ring:
                if (e->world != World::Normal) return false;
                break;
            default: return false;
            }
        }
    }
    return true;
}

}  // namespace

bool game2_inert(const AdversaryPolicy& p) {
    if (p.mix || p.never_wake || p.kill_proxy_at || p.scribble_rate > 0 || !p.tamper_file.empty()) return false;
    auto inert = [](const OpRule& r) { return r.action == OpAction::Honest || r.action == OpAction::Duplicate; };
    if (!inert(p.default_rule)) return false;
    return std::all_of(p.per_op.begin(), p.per_op.end(), [&](const auto& kv) { return inert(kv.second); });
}

Game2Run run_game2_once(const Scenario& s, const AdversaryPolicy& policy) {
    Game2Run run;
    const std::uint64_t key = wire::key_for(s.seed);
    const GameParams& g = s.game;
    auto built = detail::build_sim(s, policy, [&](VirtualFs& fs) {
        std::vector<std::byte> data;
        for (std::uint32_t i = 0; i < g.records; ++i) {
            auto r = wire::make_record(key, i);
            data.insert(data.end(), r.begin(), r.end());
        }
        (void)fs.add_file(kRecordsPath, std::move(data), 4096, false);
    });
    if (!built.ok()) return run;
    detail::Sim& sim = **built;

    ReaderState st;
    st.key = key;
    st.records = g.records;
    st.retries = std::max<std::uint32_t>(g.retries, 1);
    st.timeout = g.call_timeout;
    sim.rt.attach_program(sim.victim, [&st](ExecContext& ctx) { return record_reader(ctx, st); });
    while (!sim.rt.finished(sim.victim) && sim.rt.now() < s.duration)
        sim.rt.run_until(std::min(s.duration, sim.rt.now() + s.period));

    run.accepted = st.accepted;
    Fnv1a h;
    for (const auto& [i, payload] : run.accepted) h.u64(i).bytes(payload);
    run.state_hash = h.digest();
    run.rejected_records = st.rejected;
    run.double_deliveries = st.double_deliveries;
    run.grants_sound = grants_sound(sim.rt.world(), sim.rt.kernel(), sim.victim);
    run.host = sim.host->stats();
    run.monitor = detail::totals(sim.rt.world());
    run.trace = sim.rt.scheduler().trace();
    run.latency = sim.host->latencies();
    return run;
}

Game2Verdict run_game2(const Scenario& s) {
    Game2Verdict v;
    v.inert_expected = game2_inert(s.adversary);
    AdversaryPolicy honest;
    v.honest = run_game2_once(s, honest);
    v.adversarial = run_game2_once(s, s.adversary);

    const auto& h = v.honest.accepted;
    const auto& a = v.adversarial.accepted;
    v.subset = std::all_of(a.begin(), a.end(), [&](const auto& kv) {
        auto it = h.find(kv.first);
        return it != h.end() && it->second == kv.second;
    });

    const auto attack = s.adversary.registration;
    if (h.size() != s.game.records)
        v.failure = "honest twin did not read every record";
    else if (!v.subset)
        v.failure = "adversarial run accepted a record the honest run did not";
    else if (v.inert_expected && v.honest.state_hash != v.adversarial.state_hash)
        v.failure = "inert adversary changed enclave state";
    else if (v.adversarial.double_deliveries != 0)
        v.failure = "a completion was delivered twice";
    else if (!v.adversarial.grants_sound)
        v.failure = "a bad shared-memory grant was mapped";
    else if (v.adversarial.host.rejected_with_state_change != 0)
        v.failure = "a rejected grant changed trusted state";
    else if (attack != RegistrationAttack::None && attack != RegistrationAttack::UnregisteredAddress &&
             v.adversarial.host.registrations_rejected == 0)
        v.failure = "lying grant was not rejected";
    else if (v.adversarial.monitor.window_violations != 0 || v.adversarial.monitor.trusted_leaks != 0)
        v.failure = "shared-memory monitor violation";
    v.pass = v.failure.empty();
    return v;
}

}  // namespace ringsim
