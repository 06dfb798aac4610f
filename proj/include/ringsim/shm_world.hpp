#pragma once

// Simulated physical memory, per-party address spaces and the trusted
// registration authority that validates every shared-memory grant.

#include <atomic>
#include <compare>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "ringsim/types.hpp"

namespace ringsim {

enum class World : std::uint8_t { Trusted, Normal };

enum class PartyKind : std::uint8_t { TrustedKernel, Enclave, Proxy };

struct Party {
    PartyKind kind = PartyKind::TrustedKernel;
    std::uint32_t id = 0;

    auto operator<=>(const Party&) const = default;

    static constexpr Party kernel() { return {PartyKind::TrustedKernel, 0}; }
    static constexpr Party enclave(std::uint32_t id) { return {PartyKind::Enclave, id}; }
    static constexpr Party proxy(std::uint32_t id) { return {PartyKind::Proxy, id}; }
};

struct PhysPageId {
    std::uint64_t index = 0;
    auto operator<=>(const PhysPageId&) const = default;
};

enum class PagePurpose : std::uint8_t { Private, Shared, Ring, Kernel, Device, WakeQueue };

struct PageEntry {
    Party owner;
    World world = World::Normal;
    PagePurpose purpose = PagePurpose::Private;
};

enum class AccessMode : std::uint8_t { Read, Write };
enum class Perm : std::uint8_t { ReadOnly, ReadWrite };

using SpaceId = std::uint32_t;

enum class RegState : std::uint8_t { Pending, Validated, Mapped };

struct SharedRegistration {
    RegionId region_id = 0;
    Party grantee;
    std::vector<PhysPageId> pages;
    std::size_t expected_size = 0;
    RegState state = RegState::Pending;
};

struct Mapping {
    VirtAddr base = 0;
    std::shared_ptr<const std::vector<PhysPageId>> pages;
    Perm perm = Perm::ReadWrite;
    World world = World::Normal;

    std::size_t size() const { return pages->size() * kPageSize; }
    VirtAddr end() const { return base + size(); }
};

struct AddressSpace {
    Party owner;
    World world = World::Normal;
    std::map<VirtAddr, Mapping> mappings;
};

/// Counters kept by the bus-access monitor. Thread-safe.
struct MonitorCounters {
    std::atomic<std::uint64_t> faults{0};             // BusFault returned by access()
    std::atomic<std::uint64_t> window_violations{0};  // out-of-window reads/writes attempted
    std::atomic<std::uint64_t> shared_reads{0};
    std::atomic<std::uint64_t> shared_writes{0};
    std::atomic<std::uint64_t> trusted_leaks{0};      // normal-world requester granted trusted bytes
};

struct MonitorSnapshot {
    std::uint64_t faults = 0;
    std::uint64_t window_violations = 0;
    std::uint64_t shared_reads = 0;
    std::uint64_t shared_writes = 0;
    std::uint64_t trusted_leaks = 0;
};

class ShmWorld;

/// A bounds-checked view of `size()` bytes reachable through one mapping.
/// Every read and write is checked against the window; out-of-window
/// attempts fail and are counted by the monitor instead of touching memory.
class ByteWindow {
public:
    ByteWindow() = default;

    std::size_t size() const { return len_; }
    bool valid() const { return world_ != nullptr; }
    bool writable() const { return writable_; }
    /// Virtual (or physical) address of byte 0 in the requester's view.
    std::uint64_t base() const { return base_; }

    bool read(std::size_t off, std::span<std::byte> out) const;
    bool write(std::size_t off, std::span<const std::byte> in) const;
    bool fill(std::size_t off, std::size_t len, std::byte value) const;

    std::optional<std::uint32_t> load_u32(std::size_t off, std::memory_order order) const;
    bool store_u32(std::size_t off, std::uint32_t v, std::memory_order order) const;

    /// Narrower window; an out-of-range request yields an invalid window.
    ByteWindow sub(std::size_t off, std::size_t len) const;

private:
    friend class ShmWorld;

    bool in_bounds(std::size_t off, std::size_t len) const;
    std::byte* locate(std::size_t off) const;

    ShmWorld* world_ = nullptr;
    std::shared_ptr<const std::vector<PhysPageId>> pages_;
    std::size_t start_ = 0;  // byte offset of window start within pages_
    std::size_t len_ = 0;
    std::uint64_t base_ = 0;
    bool writable_ = false;
};

/// Flat simulated physical memory plus the trusted page-allocation table.
/// All mutation is expected to be serialized through the trusted kernel.
class ShmWorld {
public:
    struct Config {
        std::size_t pool_pages = 1024;
        std::size_t kernel_pages = 8;  // reserved trusted-kernel region at the start of memory
    };

    ShmWorld();
    explicit ShmWorld(Config config);
    ShmWorld(const ShmWorld&) = delete;
    ShmWorld& operator=(const ShmWorld&) = delete;

    std::size_t pool_pages() const { return config_.pool_pages; }

    // --- page allocation table -------------------------------------------
    void set_quota(Party owner, std::size_t pages);
    std::optional<std::size_t> quota(Party owner) const;
    std::size_t pages_owned(Party owner) const;

    Result<std::vector<PhysPageId>> alloc_pages(std::size_t n, Party owner, World world,
                                                PagePurpose purpose);
    Status free_pages(std::span<const PhysPageId> pages);
    std::optional<PageEntry> page(PhysPageId id) const;
    const std::map<PhysPageId, PageEntry>& page_table() const { return table_; }
    std::vector<PhysPageId> kernel_region() const;

    // --- address spaces -----------------------------------------------------
    SpaceId create_space(Party owner, World world);
    const AddressSpace& space(SpaceId id) const { return spaces_.at(id); }

    /// Maps pages the space owner (or the trusted kernel) owns. Trusted pages
    /// can never enter a normal-world space.
    Status map_pages(SpaceId space, VirtAddr base, std::span<const PhysPageId> pages, Perm perm);
    /// Lowest page-aligned free virtual range of `len` bytes at or above `hint`.
    VirtAddr find_free_range(SpaceId space, std::size_t len, VirtAddr hint) const;

    // --- registrations ------------------------------------------------------
    /// Validates an untrusted grant. On rejection no state changes.
    Result<SharedRegistration> register_shared(Party grantee, std::span<const PhysPageId> pages,
                                               RegionId region_id, std::size_t expected_size);
    const SharedRegistration* registration(Party grantee, RegionId region_id) const;
    /// Revocation is only available for registrations that were never mapped.
    Status revoke(Party grantee, RegionId region_id);
    Status map_region(SpaceId space, Party grantee, RegionId region_id, VirtAddr base, Perm perm);

    // --- bus access ---------------------------------------------------------
    Result<ByteWindow> access(SpaceId space, VirtAddr vaddr, std::size_t len, AccessMode mode);
    /// Raw physical access as issued by a party of the given world (a DMA or
    /// kernel-mode probe). Normal-world requests fault on trusted pages.
    Result<ByteWindow> access_physical(World requester, PhysAddr paddr, std::size_t len,
                                       AccessMode mode);

    MonitorSnapshot monitor() const;
    void reset_monitor();

    /// Digest of the allocation table, registrations, quotas and mappings.
    std::uint64_t state_hash() const;

private:
    friend class ByteWindow;

    std::byte* page_bytes(PhysPageId id);
    bool range_free(const AddressSpace& s, VirtAddr base, std::size_t len) const;

    Config config_;
    std::vector<std::uint64_t> store_;  // 8-byte aligned backing bytes
    std::map<PhysPageId, PageEntry> table_;
    std::set<std::uint64_t> free_;
    std::map<Party, std::size_t> quotas_;
    std::map<Party, std::size_t> owned_;
    std::map<PhysPageId, std::uint32_t> map_counts_;
    std::set<PhysPageId> registered_pages_;
    std::map<std::pair<Party, RegionId>, SharedRegistration> registrations_;
    std::vector<AddressSpace> spaces_;
    mutable MonitorCounters counters_;
};

}  // namespace ringsim
