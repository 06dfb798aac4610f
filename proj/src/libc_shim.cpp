#include "ringsim/libc_shim.hpp"

#include <algorithm>
#include <cstring>

namespace ringsim {

using namespace errno_code;

namespace {
std::vector<std::byte> path_bytes(const std::string& path) {
    std::vector<std::byte> in(path.size());
    std::memcpy(in.data(), path.data(), path.size());
    return in;
}
}  // namespace

LibcShim::LibcShim(EnclaveEnv& env, ExecContext& ctx, Config config)
    : env_(env), ctx_(ctx), config_(config) {}

LibcShim::FdState* LibcShim::state(std::int32_t fd) {
    auto it = fds_.find(fd);
    return it == fds_.end() ? nullptr : &it->second;
}

bool LibcShim::buffered(std::int32_t fd) const {
    auto it = fds_.find(fd);
    return it != fds_.end() && it->second.buffered;
}

std::size_t LibcShim::staged(std::int32_t fd) const {
    auto it = fds_.find(fd);
    return it == fds_.end() ? 0 : it->second.staging.size() + it->second.inflight.size();
}

std::size_t LibcShim::block_size(std::int32_t fd) const {
    auto it = fds_.find(fd);
    return it == fds_.end() ? 0 : it->second.block;
}

Co<std::int64_t> LibcShim::sync_call(SqeArgs args) { co_return co_await sync_call(args, config_.timeouts); }

Co<std::int64_t> LibcShim::sync_call(SqeArgs args, TimeoutConfig cfg) {
    const SimTime start = ctx_.now();
    auto p = env_.io().submit(args);
    if (!p.ok()) co_return -kENOMEM;
    co_return co_await await_until(*p, cfg, start);
}

Co<std::int64_t> LibcShim::await_promise(PromiseId p, TimeoutConfig cfg) {
    co_return co_await await_until(p, cfg, ctx_.now());
}

Co<std::int64_t> LibcShim::await_until(PromiseId p, TimeoutConfig cfg, SimTime start) {
    AsyncIo& io = env_.io();
    PromisePool& pool = env_.promises();
    for (;;) {
        io.pump();
        const Settlement s = pool.poll(p);
        if (s.settled()) {
            (void)pool.release(p);
            co_return s.state == PromiseState::Fulfilled ? s.value : -s.value;
        }
        if (s.state == PromiseState::Invalid) co_return -kEINVAL;
        const SimTime now = ctx_.now();
        std::int64_t err = 0;
        if (cfg.timeout && *cfg.timeout == 0) {
            err = kEAGAIN;
        } else if (cfg.alarm_at && now >= *cfg.alarm_at) {
            err = kEINTR;
            ++alarms_fired_;
        } else if (cfg.timeout && now - start >= *cfg.timeout) {
            err = kETIMEDOUT;
            ++timeouts_hit_;
        }
        if (err != 0) {
            (void)io.abandon(p);
            pool.run_deferred();
            (void)pool.release(p);
            co_return -err;
        }
        if (env_.ring().need_wakeup() && (last_enter_ < 0 || now - last_enter_ >= cfg.wake_backoff)) {
            last_enter_ = now;
            env_.ring().enter_kernel(now);
        }
        co_await ctx_.compute(cfg.poll_cost);
    }
}

Co<std::int64_t> LibcShim::buffer_call(SqeArgs args, std::vector<std::byte> in, std::size_t out_len,
                                       std::vector<std::byte>* out) {
    const SimTime start = ctx_.now();
    const std::size_t in_len = (in.size() + 7) & ~std::size_t(7);
    const std::size_t total = std::max<std::size_t>(in_len + out_len, 8);
    auto ap = env_.io().request_arena(total);
    if (!ap.ok()) co_return -kENOMEM;
    const std::int64_t packed = co_await await_until(*ap, config_.timeouts, start);
    if (packed < 0) co_return packed;
    const ArenaId arena = ArenaId::unpack(static_cast<std::uint64_t>(packed));
    ArenaPool& arenas = env_.arenas();
    auto off = arenas.push(arena, total);
    if (!off.ok()) {
        (void)arenas.free_arena(arena);
        co_return -kENOMEM;
    }
    const VirtAddr addr = arenas.info(arena)->base + *off;
    auto win = ctx_.kernel().enclave_access(ctx_.enclave(), addr, total, AccessMode::Write);
    if (!win.ok()) {
        (void)arenas.free_arena(arena);
        co_return -kEFAULT;
    }
    win->write(0, in);
    args.addr = addr;
    args.addr_kind = AddrKind::Buffer;
    if (args.len == 0) args.len = static_cast<std::uint32_t>(std::max<std::size_t>(in.size(), 1));
    TimeoutConfig rest = config_.timeouts;
    if (rest.timeout) rest.timeout = std::max<SimTime>(0, *rest.timeout - (ctx_.now() - start));
    const std::int64_t r = co_await sync_call(args, rest);
    if (r >= 0 && out && out_len > 0) {
        out->assign(out_len, std::byte{0});
        win->read(in_len, *out);
    }
    (void)arenas.free_arena(arena);
    co_return r;
}

Co<std::int64_t> LibcShim::statx(std::string path, StatxRecord* out) {
    SqeArgs a;
    a.opcode = Opcode::Statx;
    a.fd = kAtFdCwd;
    a.len = static_cast<std::uint32_t>(path.size());
    std::vector<std::byte> rec;
    const std::int64_t r = co_await buffer_call(a, path_bytes(path), StatxRecord::kSize, &rec);
    if (r == 0 && out) *out = StatxRecord::decode(std::span<const std::byte, StatxRecord::kSize>(rec));
    co_return r;
}

Co<std::int64_t> LibcShim::unlink(std::string path) {
    SqeArgs a;
    a.opcode = Opcode::Unlink;
    a.fd = kAtFdCwd;
    a.len = static_cast<std::uint32_t>(path.size());
    co_return co_await buffer_call(a, path_bytes(path), 0, nullptr);
}

Co<std::int64_t> LibcShim::mkdir(std::string path) {
    SqeArgs a;
    a.opcode = Opcode::Mkdir;
    a.fd = kAtFdCwd;
    a.len = static_cast<std::uint32_t>(path.size());
    co_return co_await buffer_call(a, path_bytes(path), 0, nullptr);
}

Co<std::int64_t> LibcShim::open(std::string path, std::uint32_t flags) {
    SqeArgs a;
    a.opcode = Opcode::Open;
    a.fd = kAtFdCwd;
    a.len = static_cast<std::uint32_t>(path.size());
    a.off = flags;
    const std::int64_t fd = co_await buffer_call(a, path_bytes(path), 0, nullptr);
    if (fd < 0) co_return fd;
    FdState fs;
    fs.path = path;
    const bool writable = (flags & 3) != open_flags::kRdOnly;
    fs.buffered = config_.buffering && writable && !is_pseudo_path(path);
    if (fs.buffered || (flags & open_flags::kAppend)) {
        StatxRecord st;
        if (co_await statx(path, &st) == 0) {
            fs.block = std::clamp<std::size_t>(st.block_size, 1, cap());
            if (flags & open_flags::kAppend) fs.pos = st.size;
        }
    }
    fs.staging_off = fs.pos;
    fds_[static_cast<std::int32_t>(fd)] = std::move(fs);
    co_return fd;
}

void LibcShim::finish_write(FdState& fs, const Settlement& s) {
    const std::size_t len = fs.inflight.size();
    if (s.state != PromiseState::Fulfilled)
        fs.poison = static_cast<std::int32_t>(s.value);
    else if (static_cast<std::size_t>(s.value) != len)
        fs.poison = kEIO;
    fs.inflight.clear();
    fs.outstanding.reset();
}

void LibcShim::reap(FdState& fs) {
    if (!fs.outstanding) return;
    env_.io().pump();
    const Settlement s = env_.promises().poll(*fs.outstanding);
    if (!s.settled()) return;
    (void)env_.promises().release(*fs.outstanding);
    finish_write(fs, s);
}

void LibcShim::submit_staged(std::int32_t fd, FdState& fs, bool allow_tail) {
    if (fs.outstanding || fs.staging.empty()) return;
    std::size_t n = std::min(fs.staging.size(), config_.max_write);
    if (!allow_tail || n < fs.staging.size()) {
        const std::size_t blocks = n / fs.block * fs.block;
        if (blocks > 0) n = blocks;
        else if (!allow_tail && fs.staging.size() < fs.block) return;
    }
    std::span<const std::byte> chunk(fs.staging.data(), n);
    auto p = env_.io().async_write(fd, chunk, fs.staging_off);
    if (!p.ok()) return;
    fs.outstanding = *p;
    fs.inflight.assign(chunk.begin(), chunk.end());
    fs.inflight_off = fs.staging_off;
    fs.staging.erase(fs.staging.begin(), fs.staging.begin() + static_cast<std::ptrdiff_t>(n));
    fs.staging_off += n;
    write_log_.push_back({fd, fs.inflight_off, n, ctx_.now(), true});
    max_outstanding_ = std::max<std::size_t>(max_outstanding_, 1);
}

Co<std::int64_t> LibcShim::wait_outstanding(std::int32_t fd, TimeoutConfig cfg, SimTime start) {
    FdState* fs = state(fd);
    if (!fs || !fs->outstanding) co_return 0;
    const PromiseId p = *fs->outstanding;
    const std::int64_t r = co_await await_until(p, cfg, start);
    fs = state(fd);
    if (!fs) co_return -kEBADF;
    fs->outstanding.reset();
    if (r == -kETIMEDOUT || r == -kEINTR || r == -kEAGAIN) {
        // The write may or may not have landed; positional writes are
        // idempotent, so the bytes go back to the front of the buffer.
        fs->staging.insert(fs->staging.begin(), fs->inflight.begin(), fs->inflight.end());
        fs->staging_off = fs->inflight_off;
        fs->inflight.clear();
        co_return r;
    }
    Settlement s;
    s.state = r >= 0 ? PromiseState::Fulfilled : PromiseState::Failed;
    s.value = r >= 0 ? r : -r;
    finish_write(*fs, s);
    co_return 0;
}

Co<std::int64_t> LibcShim::write_direct(std::int32_t fd, std::vector<std::byte> bytes, std::uint64_t off) {
    const SimTime start = ctx_.now();
    auto p = env_.io().async_write(fd, bytes, off);
    if (!p.ok()) co_return -kENOMEM;
    write_log_.push_back({fd, off, bytes.size(), start, false});
    co_return co_await await_until(*p, config_.timeouts, start);
}

Co<std::int64_t> LibcShim::write(std::int32_t fd, std::vector<std::byte> bytes) {
    FdState* fs = state(fd);
    if (!fs) co_return -kEBADF;
    if (!fs->buffered) {
        const std::uint64_t off = fs->pos;
        const std::int64_t r = co_await write_direct(fd, std::move(bytes), off);
        if (r > 0) {
            if (FdState* f = state(fd)) f->pos += static_cast<std::uint64_t>(r);
        }
        co_return r;
    }
    const SimTime start = ctx_.now();
    reap(*fs);
    if (fs->poison) {
        const std::int32_t e = std::exchange(fs->poison, 0);
        co_return -e;
    }
    while (fs->staging.size() + bytes.size() > cap()) {
        if (fs->outstanding) {
            const std::int64_t r = co_await wait_outstanding(fd, config_.timeouts, start);
            fs = state(fd);
            if (!fs) co_return -kEBADF;
            if (r < 0) co_return r;
            if (fs->poison) co_return -std::exchange(fs->poison, 0);
        }
        const std::size_t before = fs->staging.size();
        submit_staged(fd, *fs, false);
        if (fs->staging.size() == before) break;
    }
    ctx_.charge(static_cast<SimTime>(bytes.size() / 1024) * config_.stage_cost_per_kib);
    fs->staging.insert(fs->staging.end(), bytes.begin(), bytes.end());
    fs->pos += bytes.size();
    submit_staged(fd, *fs, false);
    co_return static_cast<std::int64_t>(bytes.size());
}

Co<std::int64_t> LibcShim::flush(std::int32_t fd) {
    FdState* fs = state(fd);
    if (!fs) co_return -kEBADF;
    const SimTime start = ctx_.now();
    for (;;) {
        fs = state(fd);
        if (!fs) co_return -kEBADF;
        if (fs->outstanding) {
            const std::int64_t r = co_await wait_outstanding(fd, config_.timeouts, start);
            fs = state(fd);
            if (!fs) co_return -kEBADF;
            if (r < 0) co_return r;
        }
        if (fs->poison) co_return -std::exchange(fs->poison, 0);
        if (fs->staging.empty()) co_return 0;
        submit_staged(fd, *fs, true);
        if (!fs->outstanding) co_return -kENOMEM;
    }
}

Co<std::int64_t> LibcShim::read(std::int32_t fd, std::size_t n, std::vector<std::byte>* out) {
    FdState* fs = state(fd);
    if (!fs) co_return -kEBADF;
    if (fs->buffered && (fs->outstanding || !fs->staging.empty())) {
        const std::int64_t r = co_await flush(fd);
        if (r < 0) co_return r;
        fs = state(fd);
        if (!fs) co_return -kEBADF;
    }
    const SimTime start = ctx_.now();
    auto p = env_.io().async_read(fd, n, fs->pos, out);
    if (!p.ok()) co_return -kENOMEM;
    const std::int64_t r = co_await await_until(*p, config_.timeouts, start);
    if (r > 0) {
        if (FdState* f = state(fd)) f->pos += static_cast<std::uint64_t>(r);
    }
    co_return r;
}

Co<std::int64_t> LibcShim::pread(std::int32_t fd, std::size_t n, std::uint64_t off,
                                 std::vector<std::byte>* out) {
    FdState* fs = state(fd);
    if (!fs) co_return -kEBADF;
    if (fs->buffered && (fs->outstanding || !fs->staging.empty())) {
        const std::int64_t r = co_await flush(fd);
        if (r < 0) co_return r;
    }
    const SimTime start = ctx_.now();
    auto p = env_.io().async_read(fd, n, off, out);
    if (!p.ok()) co_return -kENOMEM;
    co_return co_await await_until(*p, config_.timeouts, start);
}

Co<std::int64_t> LibcShim::close(std::int32_t fd) {
    if (!state(fd)) co_return -kEBADF;
    const std::int64_t f = co_await flush(fd);
    SqeArgs a;
    a.opcode = Opcode::Close;
    a.fd = fd;
    const std::int64_t c = co_await sync_call(a);
    fds_.erase(fd);
    co_return f < 0 ? f : c;
}

}  // namespace ringsim
