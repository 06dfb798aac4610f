#include "ringsim/harness.hpp"
#include "ringsim/libc_shim.hpp"
#include "sim_setup.hpp"

namespace ringsim {

namespace {

constexpr const char* kStreamPath = "/data/out";
constexpr const char* kPipePath = "/tmp/pipe";
constexpr SimTime kSlice = 1'000'000;

std::vector<std::byte> chunk_bytes(std::size_t i, std::size_t n) {
    std::vector<std::byte> c(n);
    for (std::size_t j = 0; j < n; ++j) c[j] = std::byte((i * 7 + j * 13 + 1) & 0xff);
    return c;
}

struct BenchState {
    BenchParams params;
    bool buffering = false;
    bool completed = false;
    bool echo_ok = true;
    SimTime t0 = 0;
    SimTime t1 = 0;
    std::size_t writes = 0;
    std::size_t max_outstanding = 0;
};

Co<void> bench_program(ExecContext& ctx, BenchState& st) {
    auto e = EnclaveEnv::create(ctx.kernel(), ctx.enclave());
    if (!e.ok()) co_return;
    std::unique_ptr<EnclaveEnv> env = std::move(*e);
    LibcShim::Config cfg;
    cfg.buffering = st.buffering;
    LibcShim shim(*env, ctx, cfg);
    const BenchParams& p = st.params;
    const bool alternate = p.workload == BenchWorkload::Alternate;

    const std::int64_t fd = alternate
                                ? co_await shim.open(kPipePath, open_flags::kRdWr)
                                : co_await shim.open(kStreamPath, open_flags::kWrOnly | open_flags::kCreat |
                                                                      open_flags::kTrunc);
    if (fd < 0) co_return;
    const auto f = static_cast<std::int32_t>(fd);
    st.t0 = ctx.now();
    for (std::size_t i = 0; i < p.chunks; ++i) {
        co_await ctx.compute(p.compute_per_chunk);
        auto bytes = chunk_bytes(i, p.chunk_bytes);
        if (co_await shim.write(f, bytes) != static_cast<std::int64_t>(bytes.size())) co_return;
        if (alternate) {
            std::vector<std::byte> echo;
            std::vector<std::byte> got;
            while (got.size() < bytes.size()) {
                const std::int64_t r = co_await shim.read(f, bytes.size() - got.size(), &echo);
                if (r <= 0) co_return;
                got.insert(got.end(), echo.begin(), echo.end());
            }
            if (got != bytes) st.echo_ok = false;
        }
    }
    if (co_await shim.flush(f) < 0) co_return;
    st.t1 = ctx.now();
    st.writes = shim.write_log().size();
    st.max_outstanding = shim.max_outstanding();
    (void)co_await shim.close(f);
    st.completed = true;
}

}  // namespace

BenchReport run_bench(const Scenario& s, BenchMode mode) {
    BenchReport out;
    out.mode = mode;
    out.workload = s.bench.workload;
    auto built = detail::build_sim(s, AdversaryPolicy{}, [&](VirtualFs& fs) {
        (void)fs.add_dir("/data");
        (void)fs.add_file(kPipePath, {}, s.bench.block_size, false, NodeKind::EchoFifo);
    });
    if (!built.ok()) return out;
    detail::Sim& sim = **built;

    BenchState st;
    st.params = s.bench;
    st.buffering = mode == BenchMode::Pipelined;
    sim.rt.attach_program(sim.victim, [&st](ExecContext& ctx) { return bench_program(ctx, st); });
    while (!sim.rt.finished(sim.victim) && sim.rt.now() < s.duration)
        sim.rt.run_until(std::min(s.duration, sim.rt.now() + kSlice));

    out.completed = st.completed;
    out.bytes = s.bench.chunks * s.bench.chunk_bytes;
    out.elapsed = st.t1 - st.t0;
    out.throughput = out.elapsed > 0 ? double(out.bytes) * 1e9 / double(out.elapsed) : 0.0;
    out.writes_submitted = st.writes;
    out.max_outstanding = st.max_outstanding;
    if (s.bench.workload == BenchWorkload::Stream) {
        std::vector<std::byte> expect;
        for (std::size_t i = 0; i < s.bench.chunks; ++i) {
            auto c = chunk_bytes(i, s.bench.chunk_bytes);
            expect.insert(expect.end(), c.begin(), c.end());
        }
        auto got = sim.vfs.file_bytes(kStreamPath);
        out.file_ok = st.completed && got && *got == expect;
    } else {
        out.file_ok = st.completed && st.echo_ok;
    }
    out.trace = sim.rt.scheduler().trace();
    out.latency = sim.host->latencies();
    return out;
}

}  // namespace ringsim
