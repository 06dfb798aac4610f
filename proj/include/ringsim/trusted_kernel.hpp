#pragma once

// Trusted-kernel model: owns enclave records, validates host grants, maps
// shared memory into enclaves and services the secure devices.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ringsim/ring_protocol.hpp"
#include "ringsim/rt_scheduler.hpp"
#include "ringsim/secure_device.hpp"
#include "ringsim/shm_world.hpp"

namespace ringsim {

using EnclaveId = std::uint32_t;

/// Trusted launch parameters for an enclave image. The host names a binary
/// but can never choose these values.
struct BinarySpec {
    SimTime budget = 0;
    std::size_t quota_pages = 16;
    std::size_t private_pages = 2;
    int priority = 0;
    std::uint32_t sq_entries = 32;
    std::uint32_t cq_entries = 32;
};

struct SpawnRequest {
    Party proxy;
    std::string binary;
    std::vector<PhysPageId> sq_pages;
    std::vector<PhysPageId> cq_pages;
    /// Spawning enclave; the root pool funds the child when absent.
    std::optional<EnclaveId> parent;
};

struct EnclaveRecord {
    EnclaveId id = 0;
    TaskId task = 0;
    SpaceId space = 0;
    Party proxy;
    std::string binary;
    RegionId sq_region = 0;
    RegionId cq_region = 0;
    std::uint32_t sq_entries = 0;
    std::uint32_t cq_entries = 0;
    std::vector<PhysPageId> private_pages;
    bool rings_mapped = false;
    VirtAddr sq_base = 0;
    VirtAddr cq_base = 0;
    std::optional<EnclaveId> parent;
};

struct RingWindows {
    ByteWindow sq;
    ByteWindow cq;
    std::uint32_t sq_entries = 0;
    std::uint32_t cq_entries = 0;
};

/// Virtual layout of an enclave address space.
inline constexpr VirtAddr kEnclavePrivateBase = 0x1000;
inline constexpr VirtAddr kEnclaveRingBase = 0x8000;
inline constexpr VirtAddr kEnclaveSharedBase = 0x11000;

/// Region ids reserved for the rings of every enclave.
inline constexpr RegionId kSqRegion = 1;
inline constexpr RegionId kCqRegion = 2;
inline constexpr RegionId kFirstUserRegion = 16;

class TrustedKernel {
public:
    struct Config {
        std::uint32_t wake_entries = 64;
        std::size_t device_capacity = 1 << 16;
        std::size_t devices = 1;
        std::size_t max_enclaves = 128;
        /// Root pool that funds enclaves spawned without an enclave parent.
        SimTime root_period = 1'000'000;
        SimTime root_budget = 200'000;
        std::size_t root_quota_pages = 256;
        std::uint32_t root_core = 0;
        int root_priority = 0;
    };

    TrustedKernel(ShmWorld& world, Scheduler& sched);
    TrustedKernel(ShmWorld& world, Scheduler& sched, Config config);

    ShmWorld& world() { return world_; }
    Scheduler& scheduler() { return sched_; }
    TaskId root_task() const { return root_task_; }

    void register_binary(const std::string& name, BinarySpec spec) { binaries_[name] = spec; }
    /// Public launch metadata of a registered image.
    const BinarySpec* binary(const std::string& name) const {
        auto it = binaries_.find(name);
        return it == binaries_.end() ? nullptr : &it->second;
    }

    // --- host-facing secure monitor calls (all inputs untrusted) ----------
    Status smc_register_shared(Party grantee, std::span<const PhysPageId> pages,
                               RegionId region_id, std::size_t expected_size);
    Result<EnclaveId> smc_spawn(const SpawnRequest& req);
    /// Clean exit: scheduler budget and quota flow back to the funder.
    Status smc_exit(EnclaveId id);

    // --- enclave-facing trusted calls -------------------------------------
    /// First trusted call of a new enclave: maps its registered rings.
    Result<RingWindows> sys_attach_rings(EnclaveId id);
    /// Maps a validated grant of exactly `expected_size` bytes and returns
    /// its enclave-space base.
    Result<VirtAddr> sys_map_shared(EnclaveId id, RegionId region, std::size_t expected_size);
    /// Queues a wake notification for the host and raises a masked interrupt.
    void sys_enter(EnclaveId id, SimTime now);
    std::vector<std::byte> sys_chardev_read(EnclaveId id, std::size_t dev, std::size_t max);
    /// Reserves device capacity now; the record is committed with the
    /// trusted timestamp of the end of the current activation.
    Result<std::size_t> sys_chardev_write(EnclaveId id, std::size_t dev,
                                          std::span<const std::byte> bytes);
    void commit_device_writes(TaskId task, SimTime t);
    Result<ByteWindow> enclave_access(EnclaveId id, VirtAddr vaddr, std::size_t len, AccessMode mode);

    // --- host interrupt plumbing ------------------------------------------
    /// Returns and clears the pending software interrupt.
    bool take_sgi();
    bool sgi_pending() const { return sgi_pending_; }
    /// Physical base of the wake-queue ring (normal-world memory).
    PhysAddr wake_queue_paddr() const { return wake_pages_.front().index * kPageSize; }
    std::uint32_t wake_entries() const { return config_.wake_entries; }
    std::uint64_t wakes_raised() const { return wakes_raised_; }

    SecureSerialDevice& device(std::size_t i) { return *devices_.at(i); }
    std::size_t device_count() const { return devices_.size(); }

    const EnclaveRecord* enclave(EnclaveId id) const;
    const std::map<EnclaveId, EnclaveRecord>& enclaves() const { return enclaves_; }
    std::optional<EnclaveId> enclave_of_task(TaskId task) const;

    std::uint64_t rejected_registrations() const { return rejected_; }

private:
    struct PendingWrite {
        TaskId task;
        std::size_t dev;
        std::vector<std::byte> bytes;
    };

    ShmWorld& world_;
    Scheduler& sched_;
    Config config_;
    TaskId root_task_ = 0;
    std::map<std::string, BinarySpec> binaries_;
    std::map<EnclaveId, EnclaveRecord> enclaves_;
    EnclaveId next_enclave_ = 1;
    std::vector<std::unique_ptr<SecureSerialDevice>> devices_;
    std::vector<PendingWrite> pending_writes_;
    std::vector<std::size_t> reserved_;
    std::vector<PhysPageId> wake_pages_;
    std::optional<CompletionProducer> wake_producer_;
    bool sgi_pending_ = false;
    std::uint64_t wakes_raised_ = 0;
    std::uint64_t rejected_ = 0;
};

}  // namespace ringsim
