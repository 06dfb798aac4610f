#include "ringsim/trusted_kernel.hpp"

namespace ringsim {

TrustedKernel::TrustedKernel(ShmWorld& world, Scheduler& sched)
    : TrustedKernel(world, sched, Config{}) {}

TrustedKernel::TrustedKernel(ShmWorld& world, Scheduler& sched, Config config)
    : world_(world), sched_(sched), config_(config) {
    TaskSpec root;
    root.kind = TaskKind::Enclave;
    root.period = config_.root_period;
    root.budget = config_.root_budget;
    root.priority = config_.root_priority;
    root.mem_quota = config_.root_quota_pages;
    root.core = config_.root_core;
    root.name = "root-pool";
    auto id = sched_.admit(root);
    root_task_ = id.ok() ? *id : 0;

    for (std::size_t i = 0; i < config_.devices; ++i) {
        auto mmio = world_.alloc_pages(1, Party::kernel(), World::Trusted, PagePurpose::Device);
        devices_.push_back(std::make_unique<SecureSerialDevice>(
            config_.device_capacity, mmio.ok() ? *mmio : std::vector<PhysPageId>{}));
        reserved_.push_back(0);
    }

    const std::size_t wake_bytes = round_up_pages(ring_bytes(config_.wake_entries, Cqe::kSize));
    auto wake = world_.alloc_pages(wake_bytes / kPageSize, Party::kernel(), World::Normal,
                                   PagePurpose::WakeQueue);
    if (wake.ok()) {
        wake_pages_ = *wake;
        auto win = world_.access_physical(World::Trusted, wake_queue_paddr(), wake_bytes,
                                          AccessMode::Write);
        if (win.ok()) {
            auto layout = RingLayout::init(*win, config_.wake_entries, Cqe::kSize);
            if (layout.ok()) wake_producer_.emplace(*layout, 0);
        }
    }
}

Status TrustedKernel::smc_register_shared(Party grantee, std::span<const PhysPageId> pages,
                                          RegionId region_id, std::size_t expected_size) {
    if (grantee.kind != PartyKind::Enclave || !enclaves_.contains(grantee.id) ||
        region_id < kFirstUserRegion) {
        ++rejected_;
        return Err{Errc::RegistrationRejected};
    }
    auto r = world_.register_shared(grantee, pages, region_id, expected_size);
    if (!r.ok()) {
        ++rejected_;
        return Err{r.error()};
    }
    return {};
}

Result<EnclaveId> TrustedKernel::smc_spawn(const SpawnRequest& req) {
    auto bin = binaries_.find(req.binary);
    if (bin == binaries_.end()) return Err{Errc::InvalidArgument};
    const BinarySpec& spec = bin->second;
    if (enclaves_.size() >= config_.max_enclaves) return Err{Errc::InsufficientDonation};

    TaskId funder = root_task_;
    if (req.parent) {
        auto p = enclaves_.find(*req.parent);
        if (p == enclaves_.end()) return Err{Errc::UnknownTask};
        funder = p->second.task;
    }
    if (!sched_.has_task(funder)) return Err{Errc::UnknownTask};
    const auto& ft = sched_.task(funder);
    if (spec.budget <= 0 || spec.budget > ft.spec.budget || spec.quota_pages > ft.spec.mem_quota)
        return Err{Errc::InsufficientDonation};

    const EnclaveId id = next_enclave_;
    const Party me = Party::enclave(id);
    const std::size_t sq_bytes = round_up_pages(ring_bytes(spec.sq_entries, Sqe::kSize));
    const std::size_t cq_bytes = round_up_pages(ring_bytes(spec.cq_entries, Cqe::kSize));
    if (!world_.register_shared(me, req.sq_pages, kSqRegion, sq_bytes).ok()) {
        ++rejected_;
        return Err{Errc::RegistrationRejected};
    }
    if (!world_.register_shared(me, req.cq_pages, kCqRegion, cq_bytes).ok()) {
        (void)world_.revoke(me, kSqRegion);
        ++rejected_;
        return Err{Errc::RegistrationRejected};
    }

    world_.set_quota(me, spec.quota_pages);
    auto priv = world_.alloc_pages(spec.private_pages, me, World::Trusted, PagePurpose::Private);
    if (!priv.ok()) {
        (void)world_.revoke(me, kSqRegion);
        (void)world_.revoke(me, kCqRegion);
        return Err{priv.error()};
    }

    TaskSpec child;
    child.kind = TaskKind::Enclave;
    child.priority = spec.priority;
    child.name = req.binary + "#" + std::to_string(id);
    auto task = sched_.donate(funder, child, spec.budget, spec.quota_pages);
    if (!task.ok()) {
        (void)world_.free_pages(*priv);
        (void)world_.revoke(me, kSqRegion);
        (void)world_.revoke(me, kCqRegion);
        return Err{task.error()};
    }

    EnclaveRecord rec;
    rec.id = id;
    rec.task = *task;
    rec.space = world_.create_space(me, World::Trusted);
    rec.proxy = req.proxy;
    rec.binary = req.binary;
    rec.sq_region = kSqRegion;
    rec.cq_region = kCqRegion;
    rec.sq_entries = spec.sq_entries;
    rec.cq_entries = spec.cq_entries;
    rec.private_pages = *priv;
    rec.parent = req.parent;
    (void)world_.map_pages(rec.space, kEnclavePrivateBase, rec.private_pages, Perm::ReadWrite);
    enclaves_.emplace(id, std::move(rec));
    ++next_enclave_;
    return id;
}

Status TrustedKernel::smc_exit(EnclaveId id) {
    auto it = enclaves_.find(id);
    if (it == enclaves_.end()) return Err{Errc::UnknownTask};
    auto st = sched_.retire(it->second.task);
    enclaves_.erase(it);
    return st;
}

Result<RingWindows> TrustedKernel::sys_attach_rings(EnclaveId id) {
    auto it = enclaves_.find(id);
    if (it == enclaves_.end()) return Err{Errc::UnknownTask};
    auto& rec = it->second;
    const Party me = Party::enclave(id);
    const std::size_t sq_bytes = round_up_pages(ring_bytes(rec.sq_entries, Sqe::kSize));
    const std::size_t cq_bytes = round_up_pages(ring_bytes(rec.cq_entries, Cqe::kSize));
    if (!rec.rings_mapped) {
        const auto* sq = world_.registration(me, rec.sq_region);
        const auto* cq = world_.registration(me, rec.cq_region);
        if (!sq || !cq) return Err{Errc::NoRings};
        rec.sq_base = kEnclaveRingBase;
        rec.cq_base = kEnclaveRingBase + sq_bytes;
        if (!world_.map_region(rec.space, me, rec.sq_region, rec.sq_base, Perm::ReadWrite).ok() ||
            !world_.map_region(rec.space, me, rec.cq_region, rec.cq_base, Perm::ReadWrite).ok())
            return Err{Errc::NoRings};
        rec.rings_mapped = true;
    }
    auto sq = world_.access(rec.space, rec.sq_base, ring_bytes(rec.sq_entries, Sqe::kSize),
                            AccessMode::Write);
    auto cq = world_.access(rec.space, rec.cq_base, ring_bytes(rec.cq_entries, Cqe::kSize),
                            AccessMode::Write);
    if (!sq.ok() || !cq.ok()) return Err{Errc::NoRings};
    (void)cq_bytes;
    return RingWindows{*sq, *cq, rec.sq_entries, rec.cq_entries};
}

Result<VirtAddr> TrustedKernel::sys_map_shared(EnclaveId id, RegionId region,
                                               std::size_t expected_size) {
    auto it = enclaves_.find(id);
    if (it == enclaves_.end()) return Err{Errc::UnknownTask};
    const auto& rec = it->second;
    const Party me = Party::enclave(id);
    const auto* reg = world_.registration(me, region);
    if (!reg) return Err{Errc::UnknownRegion};
    if (reg->state != RegState::Validated) return Err{Errc::NotValidated};
    if (reg->expected_size != expected_size) return Err{Errc::SizeMismatch};
    const VirtAddr base = world_.find_free_range(rec.space, expected_size, kEnclaveSharedBase);
    auto st = world_.map_region(rec.space, me, region, base, Perm::ReadWrite);
    if (!st.ok()) return Err{st.error()};
    return base;
}

void TrustedKernel::sys_enter(EnclaveId id, SimTime now) {
    ++wakes_raised_;
    if (wake_producer_) {
        Cqe rec{id, 0, static_cast<std::uint32_t>(now & 0xffffffff)};
        (void)wake_producer_->produce(rec);
    }
    sgi_pending_ = true;
}

bool TrustedKernel::take_sgi() {
    const bool p = sgi_pending_;
    sgi_pending_ = false;
    return p;
}

std::vector<std::byte> TrustedKernel::sys_chardev_read(EnclaveId id, std::size_t dev,
                                                       std::size_t max) {
    if (!enclaves_.contains(id) || dev >= devices_.size()) return {};
    return devices_[dev]->read(max);
}

Result<std::size_t> TrustedKernel::sys_chardev_write(EnclaveId id, std::size_t dev,
                                                     std::span<const std::byte> bytes) {
    auto it = enclaves_.find(id);
    if (it == enclaves_.end() || dev >= devices_.size()) return Err{Errc::InvalidArgument};
    auto& d = *devices_[dev];
    if (d.tx_bytes() + reserved_[dev] + bytes.size() > d.capacity()) return Err{Errc::DeviceFull};
    reserved_[dev] += bytes.size();
    pending_writes_.push_back({it->second.task, dev, {bytes.begin(), bytes.end()}});
    return bytes.size();
}

void TrustedKernel::commit_device_writes(TaskId task, SimTime t) {
    std::vector<PendingWrite> keep;
    for (auto& w : pending_writes_) {
        if (w.task != task) {
            keep.push_back(std::move(w));
            continue;
        }
        reserved_[w.dev] -= w.bytes.size();
        (void)devices_[w.dev]->write(w.bytes, t, task);
    }
    pending_writes_ = std::move(keep);
}

Result<ByteWindow> TrustedKernel::enclave_access(EnclaveId id, VirtAddr vaddr, std::size_t len,
                                                 AccessMode mode) {
    auto it = enclaves_.find(id);
    if (it == enclaves_.end()) return Err{Errc::UnknownTask};
    return world_.access(it->second.space, vaddr, len, mode);
}

const EnclaveRecord* TrustedKernel::enclave(EnclaveId id) const {
    auto it = enclaves_.find(id);
    return it == enclaves_.end() ? nullptr : &it->second;
}

std::optional<EnclaveId> TrustedKernel::enclave_of_task(TaskId task) const {
    for (const auto& [id, rec] : enclaves_)
        if (rec.task == task) return id;
    return std::nullopt;
}

}  // namespace ringsim
