#include "ringsim/enclave_env.hpp"
#include "ringsim/harness.hpp"
#include "ringsim/runtime.hpp"

namespace ringsim {

namespace {
constexpr std::size_t kBlockBytes = 4 * kPageSize;
constexpr SimTime kTick = 10'000;
}  // namespace

FuzzReport run_fuzz(std::uint64_t iterations, std::uint64_t seed, bool scribble) {
    FuzzReport rep;
    rep.iterations = iterations;
    rep.scribbling = scribble;
    if (iterations == 0) return rep;

    Runtime rt(RuntimeConfig{});
    rt.kernel().register_binary("victim", BinarySpec{100'000, 256, 2, 0, 16, 16});
    VirtualFs vfs;
    (void)vfs.add_file("/data/f", std::vector<std::byte>(4096, std::byte{1}), 4096, false);
    AdversaryPolicy pol;
    pol.scribble_max_bytes = 32;
    HostModel host(rt.kernel(), vfs, Adversary(pol, seed), HostConfig{});
    auto id = host.spawn("victim");
    if (!id.ok()) return rep;
    auto e = EnclaveEnv::create(rt.kernel(), *id);
    if (!e.ok()) return rep;
    EnclaveEnv& env = **e;
    EnclaveRing& ring = env.ring();

    SimTime now = 0;
    auto mp = env.io().enclave_mmap(kBlockBytes);
    auto ap = env.io().request_arena(2048);
    Settlement block{}, arena{};
    for (int i = 0; i < 1000 && !(block.settled() && arena.settled()); ++i) {
        now += kTick;
        (void)host.activate(now);
        env.io().pump();
        if (mp.ok()) block = env.promises().poll(*mp);
        if (ap.ok()) arena = env.promises().poll(*ap);
    }
    const VirtAddr base = block.state == PromiseState::Fulfilled ? static_cast<VirtAddr>(block.value) : kEnclaveSharedBase;
    const ArenaId arena_id = ArenaId::unpack(static_cast<std::uint64_t>(arena.value));

    Rng rng(seed);
    std::vector<SqeId> ids;
    auto any_addr = [&]() -> VirtAddr {
        switch (rng.below(4)) {
        case 0: return rng.next();
        case 1: return base - 64 + rng.below(128);
        default: return base + rng.below(kBlockBytes + 64);
        }
    };

    for (std::uint64_t it = 0; it < iterations; ++it) {
        switch (rng.below(12)) {
        case 0:
        case 1:
            if (auto r = ring.try_get_sqe(); r.ok()) {
                ids.push_back(*r);
                if (ids.size() > 64) ids.erase(ids.begin());
            }
            break;
        case 2: {
            if (ids.empty()) break;
            const SqeId sid = ids[rng.below(ids.size())];
            SqeArgs a;
            a.opcode = static_cast<Opcode>(rng.below(19));
            a.fd = static_cast<std::int32_t>(rng.below(8));
            a.addr_kind = static_cast<AddrKind>(rng.below(3));
            a.addr = any_addr();
            a.len = static_cast<std::uint32_t>(a.addr_kind == AddrKind::IoVec ? rng.below(24) : rng.below(8192));
            a.off = rng.chance(0.5) ? rng.below(8192) : rng.next();
            (void)ring.prep_and_submit(sid, a, rng.next() | 1);
            break;
        }
        case 3:
            if (!ids.empty()) (void)ring.release_sqe(ids[rng.below(ids.size())]);
            break;
        case 4: (void)ring.peek_cqe(); break;
        case 5: (void)ring.consume_cqe(); break;
        case 6: (void)ring.translate_addr(any_addr()); break;
        case 7: (void)ring.deep_translate(any_addr(), static_cast<std::uint32_t>(rng.below(24))); break;
        case 8: (void)env.arenas().push(arena_id, rng.below(2048), std::size_t(1) << rng.below(7)); break;
        case 9: (void)env.arenas().pop(arena_id, rng.below(2048)); break;
        case 10:
            (void)env.promises().poll(PromiseId{static_cast<std::uint32_t>(rng.below(300)),
                                                static_cast<std::uint32_t>(rng.below(4))});
            break;
        default:
            now += kTick;
            (void)host.activate(now);
            env.io().pump();
            break;
        }
        if (scribble) host.scribble_once();
    }

    const StepStats& st = env.inst().stats;
    for (std::size_t i = 0; i < static_cast<std::size_t>(MeteredOp::Count); ++i) {
        const auto op = static_cast<MeteredOp>(i);
        rep.ops.push_back({op, st.max(op), st.bound(op), st.calls(op), st.violations(op)});
    }
    rep.step_violations = st.total_violations();
    const auto m = rt.world().monitor();
    rep.monitor = {m.faults, m.window_violations, m.trusted_leaks};
    rep.scribbles = host.stats().scribbles;
    return rep;
}

}  // namespace ringsim
