#include "ringsim/host_model.hpp"

#include <algorithm>

namespace ringsim {

using namespace errno_code;

namespace {
constexpr std::size_t kMaxPath = 4096;
constexpr std::size_t kMaxMmap = 16 << 20;
constexpr std::size_t kIovRecord = 16;

bool overlaps(VirtAddr a, std::size_t alen, VirtAddr b, std::size_t blen) {
    return a < b + blen && b < a + alen;
}
}  // namespace

void LatencyHistogram::add(SimTime ns) {
    ++count;
    total += ns;
    max = std::max(max, ns);
    int b = 0;
    for (SimTime v = ns; v > 1; v >>= 1) ++b;
    ++buckets[b];
}

HostModel::HostModel(TrustedKernel& kernel, VirtualFs& vfs, Adversary adversary, HostConfig config)
    : kernel_(kernel),
      world_(kernel.world()),
      vfs_(vfs),
      adversary_(std::move(adversary)),
      config_(config),
      latency_rng_(config.latency_seed) {
    const std::size_t bytes = ring_bytes(kernel_.wake_entries(), Cqe::kSize);
    auto win = world_.access_physical(World::Normal, kernel_.wake_queue_paddr(), bytes, AccessMode::Write);
    if (win.ok()) {
        auto layout = RingLayout::attach(*win, kernel_.wake_entries(), Cqe::kSize);
        if (layout.ok()) wake_consumer_.emplace(CompletionConsumer::adopt(*layout));
    }
    const auto& pol = adversary_.policy();
    if (!pol.tamper_file.empty()) {
        if (const FsNode* n = vfs_.node(pol.tamper_file); n && !n->data.empty()) {
            const std::size_t flips = 1 + adversary_.rng().below(8);
            for (std::size_t i = 0; i < flips; ++i) {
                const std::size_t off = adversary_.rng().below(n->data.size());
                const auto v = std::byte(adversary_.rng().below(256));
                vfs_.poke(pol.tamper_file, off, n->data[off] ^ (v | std::byte{1}));
            }
        }
    }
}

HostModel::Proxy* HostModel::find(EnclaveId id) {
    auto it = proxies_.find(id);
    return it == proxies_.end() ? nullptr : &it->second;
}

const HostModel::Proxy* HostModel::find(EnclaveId id) const {
    auto it = proxies_.find(id);
    return it == proxies_.end() ? nullptr : &it->second;
}

Result<EnclaveId> HostModel::spawn(const std::string& binary, std::optional<EnclaveId> parent) {
    const BinarySpec* spec = kernel_.binary(binary);
    if (!spec) return Err{Errc::InvalidArgument};
    Proxy p;
    p.proxy_id = next_proxy_++;
    const Party me = Party::proxy(p.proxy_id);
    p.space = world_.create_space(me, World::Normal);
    p.sq_bytes = round_up_pages(ring_bytes(spec->sq_entries, Sqe::kSize));
    p.cq_bytes = round_up_pages(ring_bytes(spec->cq_entries, Cqe::kSize));

    auto sq_pages = world_.alloc_pages(p.sq_bytes / kPageSize, me, World::Normal, PagePurpose::Ring);
    if (!sq_pages.ok()) return Err{sq_pages.error()};
    auto cq_pages = world_.alloc_pages(p.cq_bytes / kPageSize, me, World::Normal, PagePurpose::Ring);
    if (!cq_pages.ok()) return Err{cq_pages.error()};
    p.sq_addr = world_.find_free_range(p.space, p.sq_bytes, config_.proxy_base);
    if (auto st = world_.map_pages(p.space, p.sq_addr, *sq_pages, Perm::ReadWrite); !st.ok())
        return Err{st.error()};
    p.cq_addr = world_.find_free_range(p.space, p.cq_bytes, config_.proxy_base);
    if (auto st = world_.map_pages(p.space, p.cq_addr, *cq_pages, Perm::ReadWrite); !st.ok())
        return Err{st.error()};

    auto sqw = world_.access(p.space, p.sq_addr, ring_bytes(spec->sq_entries, Sqe::kSize), AccessMode::Write);
    auto cqw = world_.access(p.space, p.cq_addr, ring_bytes(spec->cq_entries, Cqe::kSize), AccessMode::Write);
    if (!sqw.ok() || !cqw.ok()) return Err{Errc::BusFault};
    auto sql = RingLayout::init(*sqw, spec->sq_entries, Sqe::kSize);
    auto cql = RingLayout::init(*cqw, spec->cq_entries, Cqe::kSize);
    if (!sql.ok()) return Err{sql.error()};
    if (!cql.ok()) return Err{cql.error()};
    p.sq = SubmissionConsumer(*sql, 0);
    p.cq = CompletionProducer(*cql, 0);

    SpawnRequest req{me, binary, *sq_pages, *cq_pages, parent};
    auto id = kernel_.smc_spawn(req);
    if (!id.ok()) return id;
    p.enclave = *id;
    proxies_.emplace(*id, std::move(p));
    return id;
}

Result<ByteWindow> HostModel::proxy_window(Proxy& p, VirtAddr addr, std::size_t len, AccessMode mode) {
    return world_.access(p.space, addr, len, mode);
}

std::optional<std::string> HostModel::read_path(Proxy& p, VirtAddr addr, std::size_t len) {
    if (len == 0 || len > kMaxPath) return std::nullopt;
    auto w = proxy_window(p, addr, len, AccessMode::Read);
    if (!w.ok()) return std::nullopt;
    std::vector<std::byte> buf(len);
    w->read(0, buf);
    std::string s(reinterpret_cast<const char*>(buf.data()), len);
    if (auto nul = s.find('\0'); nul != std::string::npos) s.resize(nul);
    return s;
}

PollerState HostModel::poller(EnclaveId id) const {
    const Proxy* p = find(id);
    return p ? p->state : PollerState::Asleep;
}

bool HostModel::proxy_alive(EnclaveId id) const {
    const Proxy* p = find(id);
    return p && p->alive;
}

std::int32_t HostModel::proxy_pid(EnclaveId id) const {
    const Proxy* p = find(id);
    return p ? static_cast<std::int32_t>(1000 + p->proxy_id) : -kEINVAL;
}

std::optional<SimTime> HostModel::next_due() const {
    std::optional<SimTime> best;
    for (const auto& w : work_)
        if (!best || w.due < *best) best = w.due;
    return best;
}

std::size_t HostModel::poll_once(EnclaveId id, SimTime now) {
    Proxy* p = find(id);
    if (!p || !p->alive || p->state != PollerState::Awake) return 0;
    const std::uint32_t head = p->sq.head();
    auto batch = p->sq.consume_batch(config_.batch);
    for (std::uint32_t i = 0; i < batch.size(); ++i) {
        const bool dirty = p->sq_dirty.erase(head + i) > 0;
        enqueue(*p, batch[i], now, dirty || p->channel_tampered);
    }
    if (!batch.empty()) p->last_activity = now;
    stats_.sqes_consumed += batch.size();
    return batch.size();
}

void HostModel::enqueue(Proxy& p, const Sqe& sqe, SimTime now, bool tampered) {
    const auto op = static_cast<Opcode>(sqe.opcode);
    const OpRule rule = adversary_.decide(op, now);
    if (rule.action == OpAction::Deny) {
        ++stats_.denied;
        return;
    }
    Work w;
    w.enclave = p.enclave;
    w.sqe = sqe;
    w.rule = rule;
    w.queued = now;
    w.due = now + config_.base_latency +
            static_cast<SimTime>(latency_rng_.below(static_cast<std::uint64_t>(config_.jitter) + 1));
    if (rule.action == OpAction::Delay) w.due += rule.delay;
    w.tampered = tampered;
    w.multishot = op == Opcode::Accept && (sqe.flags & kSqeFlagMultishot) != 0;
    w.seq = work_seq_++;
    work_.push_back(w);
}

void HostModel::handle_wake(SimTime now) {
    if (!kernel_.take_sgi() || !wake_consumer_) return;
    for (std::uint32_t i = 0; i < kernel_.wake_entries(); ++i) {
        auto rec = wake_consumer_->peek();
        if (!rec) break;
        (void)wake_consumer_->consume();
        if (adversary_.policy().never_wake) {
            ++stats_.wakes_ignored;
            continue;
        }
        Proxy* p = find(static_cast<EnclaveId>(rec->user_data));
        if (!p || !p->alive || p->state == PollerState::Awake) continue;
        p->state = PollerState::Awake;
        p->last_activity = now;
        p->sq.layout().window().store_u32(ring_header::kFlags, 0, std::memory_order_release);
        ++stats_.wakes;
    }
}

std::optional<Cqe> HostModel::service_op(EnclaveId id, const Sqe& sqe, SimTime now) {
    last_payload_.clear();
    last_payload_addr_ = 0;
    Proxy* pp = find(id);
    Cqe out{sqe.user_data, 0, 0};
    if (!pp) {
        out.result = -kEBADF;
        return out;
    }
    Proxy& p = *pp;
    const std::uint32_t pid = p.proxy_id;
    auto put_payload = [&](const std::vector<std::byte>& bytes) -> bool {
        if (bytes.empty()) return true;
        auto w = proxy_window(p, sqe.addr, bytes.size(), AccessMode::Write);
        if (!w.ok()) return false;
        w->write(0, bytes);
        last_payload_ = bytes;
        last_payload_addr_ = sqe.addr;
        return true;
    };
    auto get_bytes = [&](VirtAddr addr, std::size_t len) -> std::optional<std::vector<std::byte>> {
        if (len == 0) return std::vector<std::byte>{};
        if (len > kMaxMmap) return std::nullopt;
        auto w = proxy_window(p, addr, len, AccessMode::Read);
        if (!w.ok()) return std::nullopt;
        std::vector<std::byte> buf(len);
        w->read(0, buf);
        return buf;
    };

    switch (static_cast<Opcode>(sqe.opcode)) {
    case Opcode::Nop: out.result = 0; break;
    case Opcode::Open: {
        auto path = read_path(p, sqe.addr, sqe.len);
        out.result = path ? vfs_.open(pid, *path, static_cast<std::uint32_t>(sqe.off)) : -kEFAULT;
        break;
    }
    case Opcode::Read:
    case Opcode::Recv: {
        std::vector<std::byte> data;
        const bool sock = static_cast<Opcode>(sqe.opcode) == Opcode::Recv || vfs_.is_connection(pid, sqe.fd);
        const std::int32_t r = sock ? vfs_.recv(pid, sqe.fd, sqe.len, now, data)
                                    : vfs_.read(pid, sqe.fd, sqe.off, sqe.len, data);
        if (r == -kEAGAIN) return std::nullopt;
        out.result = r;
        if (r > 0 && !put_payload(data)) out.result = -kEFAULT;
        break;
    }
    case Opcode::Write: {
        auto bytes = get_bytes(sqe.addr, sqe.len);
        out.result = bytes ? vfs_.write(pid, sqe.fd, sqe.off, *bytes) : -kEFAULT;
        break;
    }
    case Opcode::Close: out.result = vfs_.close(pid, sqe.fd); break;
    case Opcode::Statx: {
        auto path = read_path(p, sqe.addr, sqe.len);
        if (!path) {
            out.result = -kEFAULT;
            break;
        }
        StatxRecord rec;
        out.result = vfs_.statx(*path, rec);
        if (out.result == 0) {
            std::array<std::byte, StatxRecord::kSize> buf{};
            rec.encode(buf);
            const VirtAddr at = sqe.addr + ((std::uint64_t(sqe.len) + 7) & ~std::uint64_t(7));
            auto w = proxy_window(p, at, buf.size(), AccessMode::Write);
            if (w.ok())
                w->write(0, buf);
            else
                out.result = -kEFAULT;
        }
        break;
    }
    case Opcode::Unlink:
    case Opcode::Mkdir: {
        auto path = read_path(p, sqe.addr, sqe.len);
        if (!path)
            out.result = -kEFAULT;
        else
            out.result = static_cast<Opcode>(sqe.opcode) == Opcode::Unlink ? vfs_.unlink(*path) : vfs_.mkdir(*path);
        break;
    }
    case Opcode::Sync: out.result = vfs_.sync(pid, sqe.fd); break;
    case Opcode::Socket: out.result = vfs_.socket(pid); break;
    case Opcode::Bind: {
        auto bytes = get_bytes(sqe.addr, SockAddr::kSize);
        if (!bytes) {
            out.result = -kEFAULT;
            break;
        }
        out.result = vfs_.bind(pid, sqe.fd, SockAddr::decode(std::span<const std::byte, SockAddr::kSize>(*bytes)));
        break;
    }
    case Opcode::Listen: out.result = vfs_.listen(pid, sqe.fd, sqe.len); break;
    case Opcode::Accept: {
        const std::int32_t r = vfs_.accept(pid, sqe.fd, now);
        if (r == -kEAGAIN) return std::nullopt;
        out.result = r;
        break;
    }
    case Opcode::Send: {
        auto bytes = get_bytes(sqe.addr, sqe.len);
        out.result = bytes ? vfs_.send(pid, sqe.fd, *bytes) : -kEFAULT;
        break;
    }
    case Opcode::Writev: {
        auto vec = sqe.len <= 1024 ? get_bytes(sqe.addr, std::size_t(sqe.len) * kIovRecord) : std::nullopt;
        if (!vec) {
            out.result = -kEFAULT;
            break;
        }
        std::int64_t total = 0;
        for (std::uint32_t i = 0; i < sqe.len; ++i) {
            const VirtAddr a = load_le(*vec, i * kIovRecord, 8);
            const std::uint64_t n = load_le(*vec, i * kIovRecord + 8, 8);
            auto bytes = n <= kMaxMmap ? get_bytes(a, n) : std::nullopt;
            if (!bytes) {
                total = total ? total : -kEFAULT;
                break;
            }
            const std::uint64_t off = sqe.off == kCurrentPos ? kCurrentPos : sqe.off + std::uint64_t(total);
            const std::int32_t r = vfs_.write(pid, sqe.fd, off, *bytes);
            if (r < 0) {
                total = total ? total : r;
                break;
            }
            total += r;
        }
        out.result = static_cast<std::int32_t>(total);
        break;
    }
    case Opcode::Getpid: out.result = proxy_pid(id); break;
    case Opcode::EnclaveMmap: out.result = enclave_mmap(p, sqe); break;
    case Opcode::EnclaveSpawn: out.result = enclave_spawn(p, sqe); break;
    default: out.result = -kEINVAL; break;
    }
    return out;
}

std::int32_t HostModel::enclave_mmap(Proxy& p, const Sqe& sqe) {
    const std::size_t size = sqe.len;
    const RegionId region = sqe.off;
    if (size == 0 || size % kPageSize != 0 || size > kMaxMmap) return -kEINVAL;
    const std::size_t n = size / kPageSize;
    const Party me = proxy_party(p);
    auto pages = world_.alloc_pages(n, me, World::Normal, PagePurpose::Shared);
    if (!pages.ok()) return -kENOMEM;
    const VirtAddr addr = world_.find_free_range(p.space, size, config_.proxy_base);
    if (!world_.map_pages(p.space, addr, *pages, Perm::ReadWrite).ok()) {
        (void)world_.free_pages(*pages);
        return -kENOMEM;
    }
    p.blocks.emplace_back(addr, size);

    const RegistrationAttack attack = adversary_.next_registration();
    std::vector<PhysPageId> reg = *pages;
    std::size_t claimed = size;
    switch (attack) {
    case RegistrationAttack::None: break;
    case RegistrationAttack::DuplicatePages:
        if (n >= 2) {
            reg.back() = reg.front();
        } else {
            reg.push_back(reg.front());
            claimed += kPageSize;
        }
        break;
    case RegistrationAttack::EnclavePrivatePage:
        if (const EnclaveRecord* rec = kernel_.enclave(p.enclave); rec && !rec->private_pages.empty())
            reg.front() = rec->private_pages.front();
        break;
    case RegistrationAttack::KernelPage: {
        auto kr = world_.kernel_region();
        if (!kr.empty()) reg.front() = kr.front();
        break;
    }
    case RegistrationAttack::WrongSize: claimed += kPageSize; break;
    case RegistrationAttack::UnregisteredAddress: return static_cast<std::int32_t>(addr);
    }

    const std::uint64_t before = world_.state_hash();
    auto st = kernel_.smc_register_shared(Party::enclave(p.enclave), reg, region, claimed);
    if (!st.ok()) {
        ++stats_.registrations_rejected;
        if (world_.state_hash() != before) ++stats_.rejected_with_state_change;
        // A lying host still hands out the address.
        if (attack != RegistrationAttack::None) return static_cast<std::int32_t>(addr);
        return -kEINVAL;
    }
    return static_cast<std::int32_t>(addr);
}

std::int32_t HostModel::enclave_spawn(Proxy& p, const Sqe& sqe) {
    auto name = read_path(p, sqe.addr, sqe.len);
    if (!name) return -kEFAULT;
    const EnclaveId parent = p.enclave;
    auto child = spawn(*name, parent);
    if (!child.ok()) return -kEAGAIN;
    if (spawn_hook_) spawn_hook_(*child, *name);
    return static_cast<std::int32_t>(*child);
}

void HostModel::post(Proxy& p, Cqe cqe, const Work* w, SimTime now, std::vector<std::byte> payload,
                     VirtAddr payload_addr) {
    if (!p.cq.produce(cqe).ok()) {
        ++stats_.cqes_dropped_full;
        return;
    }
    ++stats_.cqes_posted;
    if (!w) return;
    const auto op = static_cast<Opcode>(w->sqe.opcode);
    if ((op != Opcode::Read && op != Opcode::Recv) || cqe.result <= 0) return;
    Delivery d;
    d.enclave = p.enclave;
    d.op = op;
    d.t_post = now;
    d.result = cqe.result;
    d.bytes = std::move(payload);
    d.payload_addr = payload_addr;
    d.cq_index = p.cq.tail() - 1;
    d.cq_slot_addr = p.cq_addr + p.cq.layout().slot_offset(d.cq_index);
    d.adversarial = w->rule.action == OpAction::Corrupt;
    d.tampered = p.channel_tampered || w->tampered;
    deliveries_.push_back(std::move(d));
}

void HostModel::corrupt(Proxy& p, Cqe& cqe, const Sqe& sqe) {
    ++stats_.corrupted;
    Rng& rng = adversary_.rng();
    const auto op = static_cast<Opcode>(sqe.opcode);
    if ((op == Opcode::Read || op == Opcode::Recv || op == Opcode::Statx) && sqe.len > 0) {
        const std::size_t len = std::min<std::size_t>(sqe.len, 1 << 16);
        if (auto w = proxy_window(p, sqe.addr, len, AccessMode::Write); w.ok()) {
            std::vector<std::byte> junk(len);
            for (auto& b : junk) b = std::byte(rng.below(256));
            w->write(0, junk);
            last_payload_ = junk;
            last_payload_addr_ = sqe.addr;
        }
        switch (rng.below(3)) {
        case 0: cqe.result = -static_cast<std::int32_t>(1 + rng.below(130)); break;
        case 1: cqe.result = static_cast<std::int32_t>(sqe.len + 1 + rng.below(1000)); break;
        default: cqe.result = static_cast<std::int32_t>(rng.below(std::uint64_t(sqe.len) + 1)); break;
        }
        if (cqe.result > 0)
            last_payload_.resize(std::min<std::size_t>(last_payload_.size(), std::size_t(cqe.result)));
        return;
    }
    cqe.result = static_cast<std::int32_t>(rng.next());
}

bool HostModel::run_work(Work& w, SimTime now) {
    Proxy* p = find(w.enclave);
    if (!p || !p->alive) return true;
    if (w.multishot) {
        for (int guard = 0; guard < 64; ++guard) {
            const std::int32_t fd = vfs_.accept(p->proxy_id, w.sqe.fd, now);
            if (fd == -kEAGAIN) return false;
            if (fd < 0) {
                post(*p, Cqe{w.sqe.user_data, fd, 0}, &w, now, {}, 0);
                return true;
            }
            post(*p, Cqe{w.sqe.user_data, fd, kCqeFlagMore}, &w, now, {}, 0);
        }
        return false;
    }
    auto cqe = service_op(w.enclave, w.sqe, now);
    if (!cqe) return false;
    Rng& rng = adversary_.rng();
    switch (w.rule.action) {
    case OpAction::Corrupt: corrupt(*p, *cqe, w.sqe); break;
    case OpAction::Flood:
        for (std::uint32_t i = 0; i < w.rule.flood; ++i) {
            Cqe junk{rng.next(), static_cast<std::int32_t>(rng.next()), static_cast<std::uint32_t>(rng.below(4))};
            if (!p->cq.produce(junk).ok()) break;
            ++stats_.flooded;
        }
        break;
    default: break;
    }
    post(*p, *cqe, &w, now, last_payload_, last_payload_addr_);
    latency_[static_cast<Opcode>(w.sqe.opcode)].add(now - w.queued);
    if (w.rule.action == OpAction::Duplicate) {
        ++stats_.duplicated;
        post(*p, *cqe, nullptr, now, {}, 0);
    }
    return true;
}

void HostModel::mark_tampered(Proxy& p, VirtAddr addr, std::size_t len) {
    if (overlaps(addr, len, p.cq_addr, ring_header::kSize) || overlaps(addr, len, p.sq_addr, ring_header::kSize)) {
        for (auto& d : deliveries_)
            if (d.enclave == p.enclave) d.tampered = true;
        p.channel_tampered = true;
        return;
    }
    if (overlaps(addr, len, p.sq_addr, p.sq_bytes)) {
        const std::uint32_t sq_head = p.sq.head();
        const std::uint32_t sq_tail =
            p.sq.layout().window().load_u32(ring_header::kTail, std::memory_order_acquire).value_or(sq_head);
        const std::uint32_t occ = p.sq.layout().occupancy(sq_head, sq_tail);
        for (std::uint32_t i = sq_head; i != sq_head + occ; ++i)
            if (overlaps(addr, len, p.sq_addr + p.sq.layout().slot_offset(i), Sqe::kSize)) p.sq_dirty.insert(i);
        return;
    }
    const std::uint32_t head =
        p.cq.layout().window().load_u32(ring_header::kHead, std::memory_order_acquire).value_or(0);
    for (auto& d : deliveries_) {
        if (d.enclave != p.enclave || d.tampered) continue;
        const bool consumed = static_cast<std::int32_t>(head - d.cq_index) > 0;
        if (consumed) continue;
        if (overlaps(addr, len, d.cq_slot_addr, Cqe::kSize) ||
            overlaps(addr, len, d.payload_addr, d.bytes.size()))
            d.tampered = true;
    }
}

void HostModel::scribble() {
    if (proxies_.empty()) return;
    Rng& rng = adversary_.rng();
    auto it = proxies_.begin();
    std::advance(it, static_cast<std::ptrdiff_t>(rng.below(proxies_.size())));
    Proxy& p = it->second;
    VirtAddr base = 0;
    std::size_t size = 0;
    const std::uint64_t pick = rng.below(p.blocks.empty() ? 2 : 3);
    if (pick == 0) {
        base = p.sq_addr;
        size = ring_bytes(p.sq.layout().entries(), Sqe::kSize);
    } else if (pick == 1) {
        base = p.cq_addr;
        size = ring_bytes(p.cq.layout().entries(), Cqe::kSize);
    } else {
        const auto& b = p.blocks[rng.below(p.blocks.size())];
        base = b.first;
        size = b.second;
    }
    const std::size_t off = rng.below(size);
    const std::size_t len = 1 + rng.below(std::min<std::size_t>(adversary_.policy().scribble_max_bytes, size - off));
    std::vector<std::byte> junk(len);
    for (auto& b : junk) b = std::byte(rng.below(256));
    if (auto w = proxy_window(p, base + off, len, AccessMode::Write); w.ok()) {
        w->write(0, junk);
        ++stats_.scribbles;
        mark_tampered(p, base + off, len);
    }
}

void HostModel::probe_trusted() {
    std::vector<PhysPageId> trusted;
    for (const auto& [id, e] : world_.page_table())
        if (e.world == World::Trusted) trusted.push_back(id);
    for (const auto& k : world_.kernel_region()) trusted.push_back(k);
    if (trusted.empty()) return;
    Rng& rng = adversary_.rng();
    for (std::uint32_t i = 0; i < adversary_.policy().trusted_probes; ++i) {
        const PhysPageId pg = trusted[rng.below(trusted.size())];
        const PhysAddr pa = pg.index * kPageSize + rng.below(kPageSize - 8);
        ++stats_.probes;
        auto w = world_.access_physical(World::Normal, pa, 8, AccessMode::Read);
        if (!w.ok()) ++stats_.probe_faults;
    }
}

void HostModel::kill_all(SimTime /*now*/) {
    killed_ = true;
    for (auto& [id, p] : proxies_) {
        p.alive = false;
        vfs_.kill_proxy(p.proxy_id);
    }
    work_.clear();
}

SimTime HostModel::activate(SimTime now) {
    ++stats_.activations;
    SimTime cost = config_.activation_cost;
    const auto& pol = adversary_.policy();
    if (pol.kill_proxy_at && now >= *pol.kill_proxy_at && !killed_) kill_all(now);
    handle_wake(now);

    if (!killed_) {
        for (auto& [id, p] : proxies_) {
            if (!p.alive || p.state != PollerState::Awake) continue;
            const std::size_t n = poll_once(id, now);
            cost += static_cast<SimTime>(n) * config_.op_cost;
            if (n == 0 && now - p.last_activity >= config_.idle_timeout) {
                p.state = PollerState::Asleep;
                p.sq.layout().window().store_u32(ring_header::kFlags, kSqNeedWakeup, std::memory_order_release);
                ++stats_.sleeps;
            }
        }
        std::vector<Work> keep;
        std::deque<Work> todo;
        todo.swap(work_);
        for (auto& w : todo) {
            if (w.due > now) {
                keep.push_back(w);
                continue;
            }
            cost += config_.op_cost;
            if (!run_work(w, now)) keep.push_back(w);
        }
        // Spawned children may have queued work while we iterated.
        for (auto& w : work_) keep.push_back(w);
        work_.assign(keep.begin(), keep.end());
    }

    if (adversary_.scribble_now()) scribble();
    if (pol.trusted_probes > 0) probe_trusted();

    SimTime slack = config_.idle_quantum;
    auto consider = [&](SimTime t) {
        if (t > now) slack = std::min(slack, t - now);
    };
    for (const auto& w : work_) consider(w.due);
    if (auto a = vfs_.next_arrival(now)) consider(*a);
    if (pol.kill_proxy_at) consider(*pol.kill_proxy_at);
    return std::max(cost, slack);
}

}  // namespace ringsim
