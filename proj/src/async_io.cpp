#include "ringsim/async_io.hpp"

#include <algorithm>

namespace ringsim {

namespace {
constexpr std::size_t kChainPromises = 5;
constexpr std::int64_t kRejected = errno_code::kEPERM;
}  // namespace

AsyncIo::AsyncIo(EnclaveRing& ring, ArenaPool& arenas, PromisePool& promises, Config config)
    : ring_(ring), arenas_(arenas), promises_(promises), config_(config) {}

Status AsyncIo::issue(std::uint64_t tag, Op& op) {
    auto id = ring_.try_get_sqe();
    if (!id.ok()) return Err{id.error()};
    auto r = ring_.prep_and_submit(*id, op.args, tag);
    if (!r.ok()) {
        (void)ring_.release_sqe(*id);
        return Err{r.error()};
    }
    op.internal_id = *r;
    op.parked = false;
    ++ops_submitted_;
    return {};
}

void AsyncIo::fail_op(std::uint64_t tag, std::int64_t err) {
    auto it = ops_.find(tag);
    if (it == ops_.end()) return;
    Op op = std::move(it->second);
    ops_.erase(it);
    if (op.internal_id != 0) ring_.abandon(op.internal_id);
    if (op.parked) parked_.erase(std::remove(parked_.begin(), parked_.end(), tag), parked_.end());
    switch (op.kind) {
    case OpKind::Refill: arenas_.on_refill_failed(); break;
    case OpKind::Stream: break;
    default:
        if (op.promise) (void)promises_.fail(*op.promise, err);
    }
}

void AsyncIo::queue_op(std::uint64_t tag, Op op) {
    auto [it, inserted] = ops_.emplace(tag, std::move(op));
    if (!inserted) return;
    if (parked_.empty()) {
        auto st = issue(tag, it->second);
        if (st.ok()) return;
        if (st.error() != Errc::Full && st.error() != Errc::PendingTableFull) {
            fail_op(tag, errno_code::kEFAULT);
            return;
        }
    }
    if (parked_.size() >= config_.max_parked) {
        fail_op(tag, errno_code::kEAGAIN);
        return;
    }
    it->second.parked = true;
    parked_.push_back(tag);
}

Result<PromiseId> AsyncIo::submit(const SqeArgs& args) {
    auto p = promises_.make();
    if (!p.ok()) return p;
    Op op;
    op.kind = OpKind::Plain;
    op.promise = *p;
    op.args = args;
    queue_op(p->tag(), std::move(op));
    return p;
}

Result<PromiseId> AsyncIo::request_arena(std::size_t size) {
    auto r = arenas_.request_arena(size);
    if (!r.ok()) return Err{r.error()};
    if (r->arena) {
        auto p = promises_.make_fulfilled(static_cast<std::int64_t>(r->arena->pack()));
        if (!p.ok()) (void)arenas_.free_arena(*r->arena);
        return p;
    }
    auto p = promises_.make();
    if (p.ok()) tickets_[r->ticket] = *p;
    return p;
}

Result<PromiseId> AsyncIo::enclave_mmap(std::size_t size) {
    if (size == 0) return Err{Errc::InvalidArgument};
    auto p = promises_.make();
    if (!p.ok()) return p;
    Op op;
    op.kind = OpKind::Mmap;
    op.promise = *p;
    op.region = ring_.next_region_id();
    op.size = round_up_pages(size);
    op.args.opcode = Opcode::EnclaveMmap;
    op.args.len = static_cast<std::uint32_t>(op.size);
    op.args.off = op.region;
    queue_op(p->tag(), std::move(op));
    return p;
}

Result<PromiseId> AsyncIo::start_chain(Chain chain) {
    if (promises_.capacity() - promises_.outstanding() < kChainPromises) return Err{Errc::PoolExhausted};
    const std::uint64_t id = next_chain_++;
    const bool is_write = chain.is_write;
    const std::size_t bytes = is_write ? chain.payload.size() : chain.n;
    chains_.emplace(id, std::move(chain));
    auto p0 = request_arena(bytes);
    if (!p0.ok()) {
        chains_.erase(id);
        return p0;
    }
    chains_.at(id).head = *p0;
    const PromiseArgs args{id};
    Result<PromiseId> last = Err{Errc::PoolExhausted};
    if (is_write) {
        last = promises_.then(*p0, &AsyncIo::write_stage, this, args);
    } else {
        auto p1 = promises_.then(*p0, &AsyncIo::read_stage, this, args);
        if (p1.ok()) last = promises_.then(*p1, &AsyncIo::copy_stage, this, args);
    }
    if (!last.ok()) return last;
    auto fin = promises_.then(*last, &AsyncIo::finish_stage, this, args, true);
    if (!fin.ok()) return fin;
    if (auto it = chains_.find(id); it != chains_.end()) it->second.final = *fin;
    return fin;
}

Result<PromiseId> AsyncIo::async_write(std::int32_t fd, std::span<const std::byte> data,
                                       std::uint64_t off) {
    if (data.empty()) return promises_.make_fulfilled(0);
    Chain c;
    c.is_write = true;
    c.fd = fd;
    c.off = off;
    c.payload.assign(data.begin(), data.end());
    return start_chain(std::move(c));
}

Result<PromiseId> AsyncIo::async_read(std::int32_t fd, std::size_t n, std::uint64_t off,
                                      std::vector<std::byte>* dest) {
    if (n == 0) {
        if (dest) dest->clear();
        return promises_.make_fulfilled(0);
    }
    Chain c;
    c.fd = fd;
    c.off = off;
    c.n = n;
    c.dest = dest;
    return start_chain(std::move(c));
}

Step AsyncIo::write_stage(void* ctx, const PromiseArgs& args, const Settlement& in) {
    auto* self = static_cast<AsyncIo*>(ctx);
    auto it = self->chains_.find(args[0]);
    if (it == self->chains_.end()) return Step::fail(errno_code::kECANCELED);
    Chain& ch = it->second;
    const ArenaId a = ArenaId::unpack(static_cast<std::uint64_t>(in.value));
    ch.arena = a;
    const std::size_t len = ch.payload.size();
    auto off = self->arenas_.push(a, len);
    if (!off.ok()) return Step::fail(errno_code::kENOMEM);
    const VirtAddr addr = self->arenas_.info(a)->base + *off;
    auto win = self->ring_.kernel().enclave_access(self->ring_.enclave(), addr, len, AccessMode::Write);
    if (!win.ok()) return Step::fail(errno_code::kEFAULT);
    win->write(0, ch.payload);
    ch.payload.clear();
    ch.payload.shrink_to_fit();
    SqeArgs s;
    s.opcode = Opcode::Write;
    s.fd = ch.fd;
    s.addr = addr;
    s.len = static_cast<std::uint32_t>(len);
    s.off = ch.off;
    s.addr_kind = AddrKind::Buffer;
    auto q = self->submit(s);
    if (!q.ok()) return Step::fail(errno_code::kENOMEM);
    ch.op_tag = q->tag();
    return Step::follow(*q);
}

Step AsyncIo::read_stage(void* ctx, const PromiseArgs& args, const Settlement& in) {
    auto* self = static_cast<AsyncIo*>(ctx);
    auto it = self->chains_.find(args[0]);
    if (it == self->chains_.end()) return Step::fail(errno_code::kECANCELED);
    Chain& ch = it->second;
    const ArenaId a = ArenaId::unpack(static_cast<std::uint64_t>(in.value));
    ch.arena = a;
    auto off = self->arenas_.push(a, ch.n);
    if (!off.ok()) return Step::fail(errno_code::kENOMEM);
    ch.addr = self->arenas_.info(a)->base + *off;
    SqeArgs s;
    s.opcode = Opcode::Read;
    s.fd = ch.fd;
    s.addr = ch.addr;
    s.len = static_cast<std::uint32_t>(ch.n);
    s.off = ch.off;
    s.addr_kind = AddrKind::Buffer;
    auto q = self->submit(s);
    if (!q.ok()) return Step::fail(errno_code::kENOMEM);
    ch.op_tag = q->tag();
    return Step::follow(*q);
}

Step AsyncIo::copy_stage(void* ctx, const PromiseArgs& args, const Settlement& in) {
    auto* self = static_cast<AsyncIo*>(ctx);
    auto it = self->chains_.find(args[0]);
    if (it == self->chains_.end()) return Step::fail(errno_code::kECANCELED);
    Chain& ch = it->second;
    ch.op_tag.reset();
    const auto r = static_cast<std::size_t>(in.value);
    // A host claiming more bytes than were requested is lying.
    if (in.value < 0 || r > ch.n) return Step::fail(errno_code::kEIO);
    if (ch.dest) {
        ch.dest->assign(r, std::byte{0});
        if (r > 0) {
            auto win = self->ring_.kernel().enclave_access(self->ring_.enclave(), ch.addr, r,
                                                           AccessMode::Read);
            if (!win.ok()) return Step::fail(errno_code::kEFAULT);
            win->read(0, *ch.dest);
        }
    }
    return Step::fulfill(in.value);
}

Step AsyncIo::finish_stage(void* ctx, const PromiseArgs& args, const Settlement& in) {
    auto* self = static_cast<AsyncIo*>(ctx);
    auto it = self->chains_.find(args[0]);
    if (it != self->chains_.end()) {
        if (it->second.arena) (void)self->arenas_.free_arena(*it->second.arena);
        self->chains_.erase(it);
    }
    return in.state == PromiseState::Fulfilled ? Step::fulfill(in.value) : Step::fail(in.value);
}

Result<std::uint64_t> AsyncIo::open_stream(const SqeArgs& args) {
    const std::uint64_t tag = new_internal_tag();
    Op op;
    op.kind = OpKind::Stream;
    op.args = args;
    op.args.flags |= kSqeFlagMultishot;
    streams_[tag];
    queue_op(tag, std::move(op));
    if (!ops_.contains(tag)) {
        streams_.erase(tag);
        return Err{Errc::Full};
    }
    return tag;
}

std::optional<Completion> AsyncIo::next_event(std::uint64_t stream) {
    auto it = streams_.find(stream);
    if (it == streams_.end() || it->second.empty()) return std::nullopt;
    Completion c = it->second.front();
    it->second.pop_front();
    return c;
}

bool AsyncIo::stream_open(std::uint64_t stream) const { return ops_.contains(stream); }

void AsyncIo::close_stream(std::uint64_t stream) {
    fail_op(stream, errno_code::kECANCELED);
    streams_.erase(stream);
}

void AsyncIo::handle(const Completion& c) {
    const std::uint64_t tag = c.caller_tag;
    if (!c.more() && !terminal_seen_.insert(c.internal_id).second) ++double_deliveries_;
    auto it = ops_.find(tag);
    if (it == ops_.end()) return;
    Op& op = it->second;
    switch (op.kind) {
    case OpKind::Plain: {
        ops_.erase(it);
        (void)promises_.settle_from_cqe(tag, c.result);
        break;
    }
    case OpKind::Mmap: {
        const PromiseId p = *op.promise;
        const RegionId region = op.region;
        const std::size_t size = op.size;
        ops_.erase(it);
        if (c.result < 0) {
            (void)promises_.fail(p, -std::int64_t(c.result));
            break;
        }
        auto e = ring_.finish_enclave_mmap(region, size, c.result);
        if (e.ok())
            (void)promises_.fulfill(p, static_cast<std::int64_t>(e->enclave_base));
        else
            (void)promises_.fail(p, kRejected);
        break;
    }
    case OpKind::Refill: {
        const RegionId region = op.region;
        const std::size_t size = op.size;
        ops_.erase(it);
        if (c.result < 0) {
            arenas_.on_refill_failed();
            break;
        }
        auto e = ring_.finish_enclave_mmap(region, size, c.result);
        if (e.ok())
            arenas_.on_refill(*e);
        else
            arenas_.on_refill_rejected();
        break;
    }
    case OpKind::Stream: {
        auto& q = streams_[tag];
        if (q.size() < config_.stream_capacity) q.push_back(c);
        if (!c.more()) ops_.erase(it);
        break;
    }
    }
}

void AsyncIo::pump() {
    const std::uint32_t max_calls = ring_.cq_entries();
    for (std::uint32_t i = 0; i < max_calls; ++i) {
        const std::uint64_t before = ring_.dropped();
        auto c = ring_.peek_cqe();
        if (!c) {
            if (ring_.dropped() == before) break;
            continue;
        }
        (void)ring_.consume_cqe();
        handle(*c);
    }

    for (const auto& out : arenas_.take_outcomes()) {
        auto t = tickets_.find(out.ticket);
        if (t == tickets_.end()) {
            if (out.arena) (void)arenas_.free_arena(*out.arena);
            continue;
        }
        const PromiseId p = t->second;
        tickets_.erase(t);
        if (out.arena)
            (void)promises_.fulfill(p, static_cast<std::int64_t>(out.arena->pack()));
        else
            (void)promises_.fail(p, errno_code::kENOMEM);
    }

    if (auto order = arenas_.take_refill_order()) {
        Op op;
        op.kind = OpKind::Refill;
        op.region = ring_.next_region_id();
        op.size = round_up_pages(order->bytes);
        op.args.opcode = Opcode::EnclaveMmap;
        op.args.len = static_cast<std::uint32_t>(op.size);
        op.args.off = op.region;
        queue_op(new_internal_tag(), std::move(op));
    }

    while (!parked_.empty()) {
        const std::uint64_t tag = parked_.front();
        auto it = ops_.find(tag);
        if (it == ops_.end()) {
            parked_.pop_front();
            continue;
        }
        auto st = issue(tag, it->second);
        if (!st.ok()) {
            if (st.error() == Errc::Full || st.error() == Errc::PendingTableFull) break;
            parked_.pop_front();
            it->second.parked = false;
            fail_op(tag, errno_code::kEFAULT);
            continue;
        }
        parked_.pop_front();
    }

    promises_.run_deferred();
}

Status AsyncIo::abandon(PromiseId p) {
    const std::uint64_t tag = p.tag();
    if (ops_.contains(tag)) {
        fail_op(tag, errno_code::kECANCELED);
        return {};
    }
    for (auto& [id, ch] : chains_) {
        if (!(ch.final == p)) continue;
        if (ch.op_tag && ops_.contains(*ch.op_tag)) {
            fail_op(*ch.op_tag, errno_code::kECANCELED);
            return {};
        }
        if (ch.head) {
            for (auto t = tickets_.begin(); t != tickets_.end(); ++t) {
                if (t->second == *ch.head) {
                    tickets_.erase(t);
                    (void)promises_.fail(*ch.head, errno_code::kECANCELED);
                    return {};
                }
            }
        }
        return {};
    }
    for (auto t = tickets_.begin(); t != tickets_.end(); ++t) {
        if (t->second == p) {
            tickets_.erase(t);
            (void)promises_.fail(p, errno_code::kECANCELED);
            return {};
        }
    }
    return Err{Errc::UnknownTag};
}

}  // namespace ringsim
