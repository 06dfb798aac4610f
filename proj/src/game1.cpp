#include <algorithm>
#include <cstring>

#include "ringsim/enclave_env.hpp"
#include "ringsim/harness.hpp"
#include "sim_setup.hpp"

namespace ringsim {

namespace {

constexpr SimTime kLoopCost = 10'000;
constexpr SimTime kWakeBackoff = 50'000;
constexpr std::uint32_t kMaxReads = 8;

enum class Phase : std::uint8_t { Start, Arena, Socket, Bind, Listen, Accept, Read, Done, Dead };

struct VictimState {
    std::uint64_t key = 0;
    SimTime deadline = 0;
    std::uint16_t port = 0;
    std::size_t rx_bytes = 0;
    bool wrote_host = false;
    bool wrote_backup = false;
};

// Event loop of the victim: drive the socket setup and reads as promises,
// poll the secure device, and decide what goes out on it.
Co<void> victim_loop(ExecContext& ctx, VictimState& st) {
    std::unique_ptr<EnclaveEnv> env;
    if (auto e = EnclaveEnv::create(ctx.kernel(), ctx.enclave()); e.ok()) env = std::move(*e);

    Phase phase = env ? Phase::Start : Phase::Dead;
    std::optional<PromiseId> pending;
    std::int32_t listen_fd = -1;
    std::int32_t conn_fd = -1;
    VirtAddr sockaddr = 0;
    std::uint32_t reads = 0;
    std::vector<std::byte> rx;
    std::optional<std::vector<std::byte>> message;
    SimTime last_enter = -kWakeBackoff;
    const SimTime half = st.deadline / 2;

    auto submit = [&](Opcode op, std::int32_t fd, std::uint64_t addr, std::uint32_t len, AddrKind kind) {
        SqeArgs a;
        a.opcode = op;
        a.fd = fd;
        a.addr = addr;
        a.len = len;
        a.addr_kind = kind;
        auto p = env->io().submit(a);
        if (p.ok()) pending = *p;
        return p.ok();
    };
    auto start_read = [&]() {
        rx.clear();
        auto p = env->io().async_read(conn_fd, wire::kMessageSize, 0, &rx);
        if (!p.ok()) return false;
        pending = *p;
        ++reads;
        return true;
    };

    for (;;) {
        if (env && phase != Phase::Dead && phase != Phase::Done) {
            env->io().pump();
            Settlement s;
            if (phase == Phase::Start) {
                auto p = env->io().request_arena(64);
                if (p.ok()) {
                    pending = *p;
                    phase = Phase::Arena;
                } else {
                    phase = Phase::Dead;
                }
            } else if (pending && (s = env->promises().poll(*pending)).settled()) {
                (void)env->promises().release(*pending);
                pending.reset();
                const bool ok = s.state == PromiseState::Fulfilled;
                Phase next = Phase::Dead;
                switch (phase) {
                case Phase::Arena: {
                    if (!ok) break;
                    const ArenaId arena = ArenaId::unpack(static_cast<std::uint64_t>(s.value));
                    auto off = env->arenas().push(arena, SockAddr::kSize);
                    auto info = env->arenas().info(arena);
                    if (!off.ok() || !info.ok()) break;
                    sockaddr = info->base + *off;
                    std::array<std::byte, SockAddr::kSize> buf{};
                    SockAddr{2, st.port, 0}.encode(buf);
                    auto w = ctx.kernel().enclave_access(ctx.enclave(), sockaddr, buf.size(), AccessMode::Write);
                    if (!w.ok() || !w->write(0, buf)) break;
                    if (!submit(Opcode::Socket, 0, 0, 0, AddrKind::Value)) break;
                    next = Phase::Socket;
                    break;
                }
                case Phase::Socket:
                    if (!ok) break;
                    listen_fd = static_cast<std::int32_t>(s.value);
                    if (submit(Opcode::Bind, listen_fd, sockaddr, SockAddr::kSize,
                               AddrKind::Buffer))
                        next = Phase::Bind;
                    break;
                case Phase::Bind:
                    if (ok && submit(Opcode::Listen, listen_fd, 0, 4, AddrKind::Value)) next = Phase::Listen;
                    break;
                case Phase::Listen:
                    if (ok && submit(Opcode::Accept, listen_fd, 0, 0, AddrKind::Value)) next = Phase::Accept;
                    break;
                case Phase::Accept:
                    if (!ok) break;
                    conn_fd = static_cast<std::int32_t>(s.value);
                    if (start_read()) next = Phase::Read;
                    break;
                case Phase::Read:
                    if (ok && wire::valid_message(st.key, rx)) {
                        message = rx;
                        next = Phase::Done;
                    } else if (ok && reads < kMaxReads && start_read()) {
                        next = Phase::Read;
                    }
                    break;
                default: break;
                }
                phase = next;
            }
        }

        if (auto in = ctx.kernel().sys_chardev_read(ctx.enclave(), 0, 64); !in.empty()) st.rx_bytes += in.size();

        const SimTime now = ctx.now();
        if (message && now < half) {
            if (ctx.kernel().sys_chardev_write(ctx.enclave(), 0, *message).ok()) st.wrote_host = true;
            co_return;
        }
        if (now >= half) {
            if (ctx.kernel().sys_chardev_write(ctx.enclave(), 0, wire::make_backup(st.key)).ok())
                st.wrote_backup = true;
            co_return;
        }
        if (env && env->ring().need_wakeup() && now - last_enter >= kWakeBackoff) {
            last_enter = now;
            env->ring().enter_kernel(now);
        }
        co_await ctx.compute(kLoopCost);
    }
}

}  // namespace

Game1Verdict run_game1(const Scenario& s) {
    Game1Verdict v;
    const std::uint64_t key = wire::key_for(s.seed);
    const GameParams& g = s.game;

    auto built = detail::build_sim(s, s.adversary, [&](VirtualFs& fs) {
        auto msg = wire::make_message(key, 1, s.seed);
        if (!g.message_valid) msg[8] ^= std::byte{0x5a};
        fs.inject_connection(g.port, g.message_at, {WireMessage{g.message_at, msg}});
    });
    if (!built.ok()) {
        v.failure = "setup: " + std::string(to_string(built.error()));
        return v;
    }
    detail::Sim& sim = **built;
    TrustedKernel& kernel = sim.rt.kernel();
    if (g.device_rx > 0) kernel.device(0).inject_rx(std::vector<std::byte>(g.device_rx, std::byte{0x42}));

    VictimState st;
    st.key = key;
    st.deadline = g.deadline;
    st.port = g.port;
    sim.rt.attach_program(sim.victim, [&st](ExecContext& ctx) { return victim_loop(ctx, st); });
    const SimTime end = std::max(s.duration, g.deadline + s.period);
    while (!sim.rt.finished(sim.victim) && sim.rt.now() < end)
        sim.rt.run_until(std::min(end, sim.rt.now() + s.period));

    const auto& log = kernel.device(0).tx_log();
    v.device_records = log.size();
    v.all_records_valid = true;
    for (const auto& rec : log) {
        if (!wire::valid_message(key, rec.bytes)) v.all_records_valid = false;
        if (v.first_write < 0 || rec.t < v.first_write) v.first_write = rec.t;
        if (wire::valid_message(key, rec.bytes) && rec.t <= g.deadline) v.valid_by_deadline = true;
    }

    // A delivery obliges the victim only if it carried a valid message,
    // nobody touched it after posting, and it was posted at least two
    // periods before T/2 so the victim was guaranteed a chance to run.
    std::vector<const Delivery*> owed;
    for (const auto& d : sim.host->deliveries()) {
        if (d.adversarial || d.tampered) continue;
        if (!wire::valid_message(key, d.bytes)) continue;
        if (d.t_post + 2 * s.period > g.deadline / 2) continue;
        owed.push_back(&d);
    }
    v.obligated = !owed.empty();
    v.backup_written = st.wrote_backup;
    for (const Delivery* d : owed) {
        const bool found = std::any_of(log.begin(), log.end(), [&](const TxRecord& r) { return r.bytes == d->bytes; });
        if (found) v.host_message_written = true;
    }

    if (!v.valid_by_deadline)
        v.failure = "no valid record by the deadline";
    else if (!v.all_records_valid)
        v.failure = "invalid record on the device";
    else if (v.obligated && !v.host_message_written)
        v.failure = "valid host message arrived before T/2 but was not written";
    v.pass = v.failure.empty();

    v.host = sim.host->stats();
    v.monitor = detail::totals(sim.rt.world());
    v.trace = sim.rt.scheduler().trace();
    v.latency = sim.host->latencies();
    return v;
}

}  // namespace ringsim
