#pragma once

// Trusted-world serial device serviced synchronously by the trusted kernel.

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "ringsim/shm_world.hpp"
#include "ringsim/types.hpp"

namespace ringsim {

struct TxRecord {
    std::vector<std::byte> bytes;
    SimTime t = 0;
    TaskId writer = 0;
    bool operator==(const TxRecord&) const = default;
};

class SecureSerialDevice {
public:
    /// `mmio` is the trusted page backing the device registers; the host
    /// world has no mapping of it.
    SecureSerialDevice(std::size_t capacity, std::vector<PhysPageId> mmio);

    /// Scenario input arriving on the wire.
    void inject_rx(std::span<const std::byte> bytes);

    std::vector<std::byte> read(std::size_t max);
    Result<std::size_t> write(std::span<const std::byte> bytes, SimTime t, TaskId writer);

    const std::vector<TxRecord>& tx_log() const { return tx_; }
    std::size_t tx_bytes() const { return tx_bytes_; }
    std::size_t rx_pending() const { return rx_.size(); }
    std::size_t capacity() const { return capacity_; }
    const std::vector<PhysPageId>& mmio_pages() const { return mmio_; }
    std::uint64_t digest() const;

private:
    std::size_t capacity_;
    std::vector<PhysPageId> mmio_;
    std::deque<std::byte> rx_;
    std::vector<TxRecord> tx_;
    std::size_t tx_bytes_ = 0;
};

}  // namespace ringsim
