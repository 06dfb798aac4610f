#include "ringsim/enclave_ring.hpp"

#include <algorithm>
#include <array>
#include <bit>

#include "ringsim/util.hpp"

namespace ringsim {

namespace {
constexpr std::size_t kIovRecord = 16;
}

// --- TranslationTable -------------------------------------------------------

Status TranslationTable::insert(const TranslationEntry& e) {
    if (e.size == 0 || e.enclave_base + e.size < e.enclave_base) return Err{Errc::InvalidArgument};
    if (entries_.size() >= capacity_) return Err{Errc::Full};
    auto it = std::lower_bound(entries_.begin(), entries_.end(), e.enclave_base,
                               [](const TranslationEntry& a, VirtAddr v) { return a.enclave_base < v; });
    if (it != entries_.end() && it->enclave_base < e.enclave_end()) return Err{Errc::TranslationOverlap};
    if (it != entries_.begin() && std::prev(it)->enclave_end() > e.enclave_base)
        return Err{Errc::TranslationOverlap};
    entries_.insert(it, e);
    return {};
}

std::uint32_t TranslationTable::search_bound() const {
    return static_cast<std::uint32_t>(std::bit_width(capacity_)) + 2;
}

const TranslationEntry* TranslationTable::find(VirtAddr addr, std::size_t len, StepMeter* meter) const {
    // Last entry whose base is <= addr.
    std::size_t lo = 0;
    std::size_t hi = entries_.size();
    while (lo < hi) {
        if (meter) meter->tick();
        const std::size_t mid = lo + (hi - lo) / 2;
        if (entries_[mid].enclave_base <= addr)
            lo = mid + 1;
        else
            hi = mid;
    }
    if (lo == 0) return nullptr;
    const auto& e = entries_[lo - 1];
    const std::size_t span = len == 0 ? 1 : len;
    if (addr - e.enclave_base >= e.size || span > e.size - (addr - e.enclave_base)) return nullptr;
    return &e;
}

Result<VirtAddr> TranslationTable::translate(VirtAddr addr, std::size_t len, StepMeter* meter) const {
    const auto* e = find(addr, len, meter);
    if (!e) return Err{Errc::Untranslatable};
    return e->proxy_base + (addr - e->enclave_base);
}

// --- EnclaveRing ------------------------------------------------------------

Result<std::unique_ptr<EnclaveRing>> EnclaveRing::attach(TrustedKernel& kernel, EnclaveId id,
                                                         const RingWindows& rings,
                                                         Instrumentation& inst, Config config) {
    auto sq = RingLayout::attach(rings.sq, rings.sq_entries, Sqe::kSize);
    if (!sq.ok()) return Err{sq.error()};
    auto cq = RingLayout::attach(rings.cq, rings.cq_entries, Cqe::kSize);
    if (!cq.ok()) return Err{cq.error()};
    if (config.drop_budget == 0 || config.pending_multiplier == 0) return Err{Errc::InvalidArgument};
    auto prod = SubmissionProducer::adopt(*sq, &inst.meter);
    auto cons = CompletionConsumer::adopt(*cq, &inst.meter);
    return std::unique_ptr<EnclaveRing>(
        new EnclaveRing(kernel, id, std::move(prod), std::move(cons), inst, config));
}

EnclaveRing::EnclaveRing(TrustedKernel& kernel, EnclaveId id, SubmissionProducer sq,
                         CompletionConsumer cq, Instrumentation& inst, Config config)
    : kernel_(kernel),
      enclave_(id),
      inst_(inst),
      config_(config),
      sq_(std::move(sq)),
      cq_(std::move(cq)),
      table_(config.max_translations) {
    const std::uint32_t entries = sq_.layout().entries();
    slot_state_.assign(entries, SlotState::Free);
    slot_gen_.assign(entries, 0);
    ids_.resize(std::size_t(entries) * config_.pending_multiplier);

    const std::uint32_t search = table_.search_bound();
    const auto cap = static_cast<std::uint32_t>(ids_.size());
    bounds_.try_get_sqe = 3;
    bounds_.translate = search + 1;
    bounds_.deep_translate = 4 + config_.max_iov * (search + 1);
    bounds_.release_sqe = 4 + entries;
    bounds_.prep_and_submit = 6 + bounds_.deep_translate + search + cap + entries;
    bounds_.peek_cqe = 2 + 4 * (config_.drop_budget + 1);
    bounds_.consume_cqe = 3;
}

bool EnclaveRing::valid_reservation(SqeId id) const {
    const std::uint32_t offset = id.position - sq_.tail();
    if (offset >= reserved_) return false;
    const std::uint32_t idx = id.position & sq_.layout().mask();
    return slot_state_[idx] == SlotState::Reserved && slot_gen_[idx] == id.generation;
}

Result<SqeId> EnclaveRing::try_get_sqe() {
    MeteredScope scope(inst_.meter, inst_.stats, MeteredOp::TryGetSqe, bounds_.try_get_sqe);
    inst_.meter.tick();
    if (reserved_ >= sq_.free_slots()) return Err{Errc::Full};
    const std::uint32_t position = sq_.tail() + reserved_;
    const std::uint32_t idx = position & sq_.layout().mask();
    ++reserved_;
    slot_state_[idx] = SlotState::Reserved;
    return SqeId{position, ++slot_gen_[idx]};
}

void EnclaveRing::write_and_publish(SqeId id, const Sqe& sqe) {
    const std::uint32_t mask = sq_.layout().mask();
    sq_.write_slot(id.position, sqe);
    slot_state_[id.position & mask] = SlotState::Prepared;
    std::uint32_t n = 0;
    while (n < reserved_) {
        inst_.meter.tick();
        const std::uint32_t idx = (sq_.tail() + n) & mask;
        if (slot_state_[idx] != SlotState::Prepared) break;
        slot_state_[idx] = SlotState::Free;
        ++n;
    }
    if (n > 0) {
        sq_.publish(sq_.tail() + n);
        reserved_ -= n;
    }
}

Result<std::uint64_t> EnclaveRing::allocate_id(std::uint64_t caller_tag, bool multishot) {
    const std::size_t cap = ids_.size();
    if (live_ >= cap) return Err{Errc::PendingTableFull};
    for (std::size_t i = 0; i < cap; ++i) {
        inst_.meter.tick();
        auto& e = ids_[next_id_ % cap];
        const std::uint64_t id = next_id_++;
        if (e.live) continue;
        e = IdEntry{id, caller_tag, true, multishot};
        ++live_;
        return id;
    }
    return Err{Errc::PendingTableFull};
}

Status EnclaveRing::translate_iov(VirtAddr vec_addr, std::uint32_t count) {
    inst_.meter.tick();
    if (count == 0) return {};
    if (count > config_.max_iov) return Err{Errc::InvalidArgument};
    const std::size_t bytes = std::size_t(count) * kIovRecord;
    if (!table_.find(vec_addr, bytes, &inst_.meter)) return Err{Errc::Untranslatable};
    auto win = kernel_.enclave_access(enclave_, vec_addr, bytes, AccessMode::Write);
    if (!win.ok()) return Err{Errc::Untranslatable};
    std::array<std::byte, 16 * kIovRecord> buf{};
    std::span<std::byte> priv(buf.data(), bytes);
    inst_.meter.tick();
    win->read(0, priv);
    for (std::uint32_t i = 0; i < count; ++i) {
        inst_.meter.tick();
        const VirtAddr a = load_le(priv, i * kIovRecord, 8);
        const std::uint64_t len = load_le(priv, i * kIovRecord + 8, 8);
        auto t = table_.translate(a, len, &inst_.meter);
        if (!t.ok()) return Err{Errc::Untranslatable};
        store_le(priv, i * kIovRecord, *t, 8);
    }
    inst_.meter.tick();
    win->write(0, priv);
    return {};
}

Result<std::uint64_t> EnclaveRing::prep_and_submit(SqeId id, const SqeArgs& args,
                                                    std::uint64_t caller_tag) {
    MeteredScope scope(inst_.meter, inst_.stats, MeteredOp::PrepAndSubmit, bounds_.prep_and_submit);
    inst_.meter.tick();
    if (!valid_reservation(id)) return Err{Errc::StaleSqeId};
    if (live_ >= ids_.size()) return Err{Errc::PendingTableFull};

    std::uint64_t addr = args.addr;
    if (args.addr_kind == AddrKind::Buffer) {
        auto t = table_.translate(args.addr, args.len, &inst_.meter);
        if (!t.ok()) return Err{Errc::Untranslatable};
        addr = *t;
    } else if (args.addr_kind == AddrKind::IoVec) {
        auto t = table_.translate(args.addr, std::size_t(args.len) * kIovRecord, &inst_.meter);
        if (!t.ok()) return Err{Errc::Untranslatable};
        auto st = translate_iov(args.addr, args.len);
        if (!st.ok()) return Err{st.error()};
        addr = *t;
    }

    const bool multishot = (args.flags & kSqeFlagMultishot) != 0;
    auto internal = allocate_id(caller_tag, multishot);
    if (!internal.ok()) return internal;

    Sqe sqe;
    sqe.opcode = static_cast<std::uint8_t>(args.opcode);
    sqe.flags = args.flags;
    sqe.fd = args.fd;
    sqe.addr = addr;
    sqe.len = args.len;
    sqe.off = args.off;
    sqe.user_data = *internal;
    write_and_publish(id, sqe);
    published_.push_back(*internal);
    return internal;
}

Status EnclaveRing::release_sqe(SqeId id) {
    MeteredScope scope(inst_.meter, inst_.stats, MeteredOp::ReleaseSqe, bounds_.release_sqe);
    inst_.meter.tick();
    if (!valid_reservation(id)) return Err{Errc::StaleSqeId};
    write_and_publish(id, Sqe{});
    return {};
}

std::optional<Completion> EnclaveRing::peek_cqe() {
    MeteredScope scope(inst_.meter, inst_.stats, MeteredOp::PeekCqe, bounds_.peek_cqe);
    inst_.meter.tick();
    if (peeked_) return peeked_;
    const std::size_t cap = ids_.size();
    for (std::uint32_t i = 0; i <= config_.drop_budget; ++i) {
        inst_.meter.tick();
        if (cq_.available() == 0) return std::nullopt;
        const Cqe c = cq_.read_slot(cq_.head());
        auto& e = ids_[c.user_data % cap];
        if (c.user_data != 0 && e.live && e.id == c.user_data) {
            Completion out{e.caller_tag, c.result, c.flags, c.user_data};
            if (!e.multishot) out.flags &= ~kCqeFlagMore;
            if (!out.more()) {
                e.live = false;
                --live_;
            }
            peeked_ = out;
            return out;
        }
        cq_.release(1);
        ++dropped_;
    }
    return std::nullopt;
}

Status EnclaveRing::consume_cqe() {
    MeteredScope scope(inst_.meter, inst_.stats, MeteredOp::ConsumeCqe, bounds_.consume_cqe);
    inst_.meter.tick();
    if (peeked_) {
        peeked_.reset();
        cq_.release(1);
        return {};
    }
    return cq_.consume();
}

bool EnclaveRing::abandon(std::uint64_t internal_id) {
    if (internal_id == 0) return false;
    auto& e = ids_[internal_id % ids_.size()];
    if (!e.live || e.id != internal_id) return false;
    e.live = false;
    --live_;
    return true;
}

bool EnclaveRing::is_live(std::uint64_t internal_id) const {
    if (internal_id == 0) return false;
    const auto& e = ids_[internal_id % ids_.size()];
    return e.live && e.id == internal_id;
}

Result<VirtAddr> EnclaveRing::translate_addr(VirtAddr enclave_addr) {
    MeteredScope scope(inst_.meter, inst_.stats, MeteredOp::Translate, bounds_.translate);
    inst_.meter.tick();
    return table_.translate(enclave_addr, 1, &inst_.meter);
}

Status EnclaveRing::deep_translate(VirtAddr vec_addr, std::uint32_t count) {
    MeteredScope scope(inst_.meter, inst_.stats, MeteredOp::DeepTranslate, bounds_.deep_translate);
    return translate_iov(vec_addr, count);
}

Result<std::uint64_t> EnclaveRing::submit_enclave_mmap(SqeId id, std::size_t size, RegionId region,
                                                       std::uint64_t caller_tag) {
    if (size == 0 || size > 0xffffffffu) return Err{Errc::InvalidArgument};
    SqeArgs a;
    a.opcode = Opcode::EnclaveMmap;
    a.len = static_cast<std::uint32_t>(round_up_pages(size));
    a.off = region;
    return prep_and_submit(id, a, caller_tag);
}

Result<TranslationEntry> EnclaveRing::finish_enclave_mmap(RegionId region, std::size_t size,
                                                          std::int64_t proxy_base) {
    size = round_up_pages(size);
    if (proxy_base < 0) return Err{Errc::RegistrationRejected};
    auto base = kernel_.sys_map_shared(enclave_, region, size);
    if (!base.ok()) return Err{Errc::RegistrationRejected};
    TranslationEntry e{*base, static_cast<VirtAddr>(proxy_base), size};
    auto st = table_.insert(e);
    if (!st.ok()) return Err{st.error()};
    return e;
}

bool EnclaveRing::need_wakeup() {
    auto f = sq_.layout().window().load_u32(ring_header::kFlags, std::memory_order_acquire);
    return f && (*f & kSqNeedWakeup) != 0;
}

}  // namespace ringsim
