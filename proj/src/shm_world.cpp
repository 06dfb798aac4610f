#include "ringsim/shm_world.hpp"

#include <algorithm>
#include <cstring>

#include "ringsim/util.hpp"

namespace ringsim {

// ---------------------------------------------------------------------------
// ByteWindow

bool ByteWindow::in_bounds(std::size_t off, std::size_t len) const {
    if (world_ == nullptr) return false;
    if (off > len_ || len > len_ - off) {
        world_->counters_.window_violations.fetch_add(1, std::memory_order_relaxed);
        return false;
    }
    return true;
}

std::byte* ByteWindow::locate(std::size_t off) const {
    const std::size_t abs = start_ + off;
    return world_->page_bytes((*pages_)[abs / kPageSize]) + abs % kPageSize;
}

bool ByteWindow::read(std::size_t off, std::span<std::byte> out) const {
    if (!in_bounds(off, out.size())) return false;
    std::size_t done = 0;
    while (done < out.size()) {
        const std::size_t abs = start_ + off + done;
        const std::size_t chunk = std::min(out.size() - done, kPageSize - abs % kPageSize);
        std::memcpy(out.data() + done, locate(off + done), chunk);
        done += chunk;
    }
    world_->counters_.shared_reads.fetch_add(1, std::memory_order_relaxed);
    return true;
}

bool ByteWindow::write(std::size_t off, std::span<const std::byte> in) const {
    if (!writable_) {
        world_->counters_.window_violations.fetch_add(1, std::memory_order_relaxed);
        return false;
    }
    if (!in_bounds(off, in.size())) return false;
    std::size_t done = 0;
    while (done < in.size()) {
        const std::size_t abs = start_ + off + done;
        const std::size_t chunk = std::min(in.size() - done, kPageSize - abs % kPageSize);
        std::memcpy(locate(off + done), in.data() + done, chunk);
        done += chunk;
    }
    world_->counters_.shared_writes.fetch_add(1, std::memory_order_relaxed);
    return true;
}

bool ByteWindow::fill(std::size_t off, std::size_t len, std::byte value) const {
    if (!writable_ || !in_bounds(off, len)) return false;
    for (std::size_t i = 0; i < len; ++i) *locate(off + i) = value;
    world_->counters_.shared_writes.fetch_add(1, std::memory_order_relaxed);
    return true;
}

std::optional<std::uint32_t> ByteWindow::load_u32(std::size_t off, std::memory_order order) const {
    if (!in_bounds(off, 4) || (start_ + off) % 4 != 0) return std::nullopt;
    auto* p = reinterpret_cast<std::uint32_t*>(locate(off));
    world_->counters_.shared_reads.fetch_add(1, std::memory_order_relaxed);
    return std::atomic_ref<std::uint32_t>(*p).load(order);
}

bool ByteWindow::store_u32(std::size_t off, std::uint32_t v, std::memory_order order) const {
    if (!writable_ || !in_bounds(off, 4) || (start_ + off) % 4 != 0) return false;
    auto* p = reinterpret_cast<std::uint32_t*>(locate(off));
    std::atomic_ref<std::uint32_t>(*p).store(v, order);
    world_->counters_.shared_writes.fetch_add(1, std::memory_order_relaxed);
    return true;
}

ByteWindow ByteWindow::sub(std::size_t off, std::size_t len) const {
    if (!in_bounds(off, len)) return {};
    ByteWindow w = *this;
    w.start_ = start_ + off;
    w.len_ = len;
    w.base_ = base_ + off;
    return w;
}

// ---------------------------------------------------------------------------
// ShmWorld

ShmWorld::ShmWorld() : ShmWorld(Config{}) {}

ShmWorld::ShmWorld(Config config) : config_(config), store_(config.pool_pages * kPageSize / 8, 0) {
    for (std::uint64_t i = 0; i < config_.pool_pages; ++i) free_.insert(i);
    if (config_.kernel_pages > 0) {
        // Boot-time trusted kernel image; never counts against any quota.
        (void)alloc_pages(config_.kernel_pages, Party::kernel(), World::Trusted, PagePurpose::Kernel);
    }
}

std::byte* ShmWorld::page_bytes(PhysPageId id) {
    return reinterpret_cast<std::byte*>(store_.data()) + id.index * kPageSize;
}

void ShmWorld::set_quota(Party owner, std::size_t pages) { quotas_[owner] = pages; }

std::optional<std::size_t> ShmWorld::quota(Party owner) const {
    auto it = quotas_.find(owner);
    if (it == quotas_.end()) return std::nullopt;
    return it->second;
}

std::size_t ShmWorld::pages_owned(Party owner) const {
    auto it = owned_.find(owner);
    return it == owned_.end() ? 0 : it->second;
}

Result<std::vector<PhysPageId>> ShmWorld::alloc_pages(std::size_t n, Party owner, World world,
                                                      PagePurpose purpose) {
    if (n == 0) return Err{Errc::InvalidArgument};
    if (auto q = quota(owner); q && pages_owned(owner) + n > *q) return Err{Errc::QuotaExceeded};
    if (free_.size() < n) return Err{Errc::OutOfMemory};
    std::vector<PhysPageId> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto it = free_.begin();
        PhysPageId id{*it};
        free_.erase(it);
        table_[id] = PageEntry{owner, world, purpose};
        std::memset(page_bytes(id), 0, kPageSize);
        out.push_back(id);
    }
    owned_[owner] += n;
    return out;
}

Status ShmWorld::free_pages(std::span<const PhysPageId> pages) {
    std::set<PhysPageId> seen;
    for (auto p : pages) {
        if (!table_.contains(p) || !seen.insert(p).second) return Err{Errc::UnknownPage};
        if (registered_pages_.contains(p) || map_counts_.contains(p)) return Err{Errc::PageInUse};
    }
    for (auto p : pages) {
        auto owner = table_.at(p).owner;
        table_.erase(p);
        free_.insert(p.index);
        if (--owned_[owner] == 0) owned_.erase(owner);
    }
    return {};
}

std::optional<PageEntry> ShmWorld::page(PhysPageId id) const {
    auto it = table_.find(id);
    if (it == table_.end()) return std::nullopt;
    return it->second;
}

std::vector<PhysPageId> ShmWorld::kernel_region() const {
    std::vector<PhysPageId> out;
    for (const auto& [id, e] : table_)
        if (e.purpose == PagePurpose::Kernel) out.push_back(id);
    return out;
}

SpaceId ShmWorld::create_space(Party owner, World world) {
    spaces_.push_back(AddressSpace{owner, world, {}});
    return static_cast<SpaceId>(spaces_.size() - 1);
}

bool ShmWorld::range_free(const AddressSpace& s, VirtAddr base, std::size_t len) const {
    const VirtAddr end = base + len;
    auto it = s.mappings.lower_bound(base);
    if (it != s.mappings.end() && it->second.base < end) return false;
    if (it != s.mappings.begin()) {
        --it;
        if (it->second.end() > base) return false;
    }
    return true;
}

Status ShmWorld::map_pages(SpaceId space_id, VirtAddr base, std::span<const PhysPageId> pages,
                           Perm perm) {
    if (space_id >= spaces_.size() || pages.empty() || base % kPageSize != 0)
        return Err{Errc::InvalidArgument};
    auto& s = spaces_[space_id];
    for (auto p : pages) {
        auto e = page(p);
        if (!e) return Err{Errc::UnknownPage};
        if (e->world == World::Trusted && s.world == World::Normal) return Err{Errc::BusFault};
        if (e->owner != s.owner && e->owner != Party::kernel()) return Err{Errc::BusFault};
    }
    if (!range_free(s, base, pages.size() * kPageSize)) return Err{Errc::VirtualRangeBusy};
    Mapping m{base, std::make_shared<const std::vector<PhysPageId>>(pages.begin(), pages.end()), perm,
              s.world};
    s.mappings.emplace(base, std::move(m));
    for (auto p : pages) ++map_counts_[p];
    return {};
}

VirtAddr ShmWorld::find_free_range(SpaceId space_id, std::size_t len, VirtAddr hint) const {
    const auto& s = spaces_.at(space_id);
    VirtAddr cand = (hint + kPageSize - 1) / kPageSize * kPageSize;
    for (const auto& [base, m] : s.mappings) {
        if (m.end() <= cand) continue;
        if (base >= cand + len) break;
        cand = m.end();
    }
    return cand;
}

Result<SharedRegistration> ShmWorld::register_shared(Party grantee, std::span<const PhysPageId> pages,
                                                     RegionId region_id, std::size_t expected_size) {
    // Every field is adversary-controlled. Validate fully before mutating.
    std::set<PhysPageId> unique;
    for (auto p : pages)
        if (!unique.insert(p).second) return Err{Errc::DuplicatePage};
    for (auto p : pages) {
        auto e = page(p);
        if (!e) return Err{Errc::UnknownPage};
        if (e->world == World::Trusted || e->purpose == PagePurpose::Kernel ||
            e->purpose == PagePurpose::Device || registered_pages_.contains(p))
            return Err{Errc::OverlapWithPrivate};
    }
    if (pages.empty() || expected_size == 0 || pages.size() * kPageSize != expected_size)
        return Err{Errc::SizeMismatch};
    if (registrations_.contains({grantee, region_id})) return Err{Errc::RegionExists};

    SharedRegistration reg{region_id, grantee, {pages.begin(), pages.end()}, expected_size,
                           RegState::Validated};
    for (auto p : pages) registered_pages_.insert(p);
    registrations_.emplace(std::pair{grantee, region_id}, reg);
    return reg;
}

const SharedRegistration* ShmWorld::registration(Party grantee, RegionId region_id) const {
    auto it = registrations_.find({grantee, region_id});
    return it == registrations_.end() ? nullptr : &it->second;
}

Status ShmWorld::revoke(Party grantee, RegionId region_id) {
    auto it = registrations_.find({grantee, region_id});
    if (it == registrations_.end()) return Err{Errc::UnknownRegion};
    if (it->second.state == RegState::Mapped) return Err{Errc::RegionMapped};
    for (auto p : it->second.pages) registered_pages_.erase(p);
    registrations_.erase(it);
    return {};
}

Status ShmWorld::map_region(SpaceId space_id, Party grantee, RegionId region_id, VirtAddr base,
                            Perm perm) {
    auto it = registrations_.find({grantee, region_id});
    if (it == registrations_.end()) return Err{Errc::UnknownRegion};
    auto& reg = it->second;
    if (reg.state == RegState::Pending) return Err{Errc::NotValidated};
    if (space_id >= spaces_.size() || base % kPageSize != 0) return Err{Errc::InvalidArgument};
    auto& s = spaces_[space_id];
    if (s.world == World::Trusted && s.owner != grantee) return Err{Errc::NotValidated};
    if (!range_free(s, base, reg.expected_size)) return Err{Errc::VirtualRangeBusy};
    Mapping m{base, std::make_shared<const std::vector<PhysPageId>>(reg.pages), perm, s.world};
    s.mappings.emplace(base, std::move(m));
    for (auto p : reg.pages) ++map_counts_[p];
    reg.state = RegState::Mapped;
    return {};
}

Result<ByteWindow> ShmWorld::access(SpaceId space_id, VirtAddr vaddr, std::size_t len, AccessMode mode) {
    auto fault = [&]() -> Result<ByteWindow> {
        counters_.faults.fetch_add(1, std::memory_order_relaxed);
        return Err{Errc::BusFault};
    };
    if (space_id >= spaces_.size()) return fault();
    const auto& s = spaces_[space_id];
    auto it = s.mappings.upper_bound(vaddr);
    if (it == s.mappings.begin()) return fault();
    --it;
    const Mapping& m = it->second;
    if (vaddr < m.base || vaddr >= m.end() || len > m.end() - vaddr) return fault();
    if (mode == AccessMode::Write && m.perm == Perm::ReadOnly) return fault();
    const std::size_t first = (vaddr - m.base) / kPageSize;
    const std::size_t last = len == 0 ? first : (vaddr - m.base + len - 1) / kPageSize;
    if (s.world == World::Normal) {
        for (std::size_t i = first; i <= last && i < m.pages->size(); ++i) {
            auto e = page((*m.pages)[i]);
            if (!e || e->world == World::Trusted) return fault();
        }
    }
    ByteWindow w;
    w.world_ = this;
    w.pages_ = m.pages;
    w.start_ = vaddr - m.base;
    w.len_ = len;
    w.base_ = vaddr;
    w.writable_ = m.perm == Perm::ReadWrite;
    return w;
}

Result<ByteWindow> ShmWorld::access_physical(World requester, PhysAddr paddr, std::size_t len,
                                             AccessMode mode) {
    (void)mode;
    const std::uint64_t total = config_.pool_pages * kPageSize;
    if (paddr >= total || len > total - paddr) {
        counters_.faults.fetch_add(1, std::memory_order_relaxed);
        return Err{Errc::BusFault};
    }
    const std::uint64_t first = paddr / kPageSize;
    const std::uint64_t last = len == 0 ? first : (paddr + len - 1) / kPageSize;
    auto pages = std::make_shared<std::vector<PhysPageId>>();
    for (std::uint64_t i = first; i <= last; ++i) {
        auto e = page(PhysPageId{i});
        if (requester == World::Normal && e && e->world == World::Trusted) {
            counters_.faults.fetch_add(1, std::memory_order_relaxed);
            return Err{Errc::BusFault};
        }
        pages->push_back(PhysPageId{i});
    }
    ByteWindow w;
    w.world_ = this;
    w.pages_ = std::move(pages);
    w.start_ = paddr % kPageSize;
    w.len_ = len;
    w.base_ = paddr;
    w.writable_ = true;
    return w;
}

MonitorSnapshot ShmWorld::monitor() const {
    return MonitorSnapshot{counters_.faults.load(), counters_.window_violations.load(),
                           counters_.shared_reads.load(), counters_.shared_writes.load(),
                           counters_.trusted_leaks.load()};
}

void ShmWorld::reset_monitor() {
    counters_.faults = 0;
    counters_.window_violations = 0;
    counters_.shared_reads = 0;
    counters_.shared_writes = 0;
    counters_.trusted_leaks = 0;
}

std::uint64_t ShmWorld::state_hash() const {
    Fnv1a h;
    auto party = [&](Party p) { h.u64(static_cast<std::uint64_t>(p.kind)).u64(p.id); };
    h.u64(table_.size());
    for (const auto& [id, e] : table_) {
        h.u64(id.index);
        party(e.owner);
        h.u64(static_cast<std::uint64_t>(e.world)).u64(static_cast<std::uint64_t>(e.purpose));
    }
    h.u64(free_.size());
    for (auto f : free_) h.u64(f);
    for (const auto& [p, q] : quotas_) {
        party(p);
        h.u64(q);
    }
    for (const auto& [p, n] : owned_) {
        party(p);
        h.u64(n);
    }
    for (const auto& [key, reg] : registrations_) {
        party(key.first);
        h.u64(key.second).u64(reg.expected_size).u64(static_cast<std::uint64_t>(reg.state));
        for (auto p : reg.pages) h.u64(p.index);
    }
    for (const auto& s : spaces_) {
        party(s.owner);
        h.u64(static_cast<std::uint64_t>(s.world)).u64(s.mappings.size());
        for (const auto& [base, m] : s.mappings) {
            h.u64(base).u64(static_cast<std::uint64_t>(m.perm));
            for (auto p : *m.pages) h.u64(p.index);
        }
    }
    return h.digest();
}

}  // namespace ringsim
