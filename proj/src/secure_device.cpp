#include "ringsim/secure_device.hpp"

#include "ringsim/util.hpp"

namespace ringsim {

SecureSerialDevice::SecureSerialDevice(std::size_t capacity, std::vector<PhysPageId> mmio)
    : capacity_(capacity), mmio_(std::move(mmio)) {}

void SecureSerialDevice::inject_rx(std::span<const std::byte> bytes) {
    rx_.insert(rx_.end(), bytes.begin(), bytes.end());
}

std::vector<std::byte> SecureSerialDevice::read(std::size_t max) {
    const std::size_t n = std::min(max, rx_.size());
    std::vector<std::byte> out(rx_.begin(), rx_.begin() + static_cast<std::ptrdiff_t>(n));
    rx_.erase(rx_.begin(), rx_.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

Result<std::size_t> SecureSerialDevice::write(std::span<const std::byte> bytes, SimTime t,
                                              TaskId writer) {
    if (tx_bytes_ + bytes.size() > capacity_) return Err{Errc::DeviceFull};
    tx_.push_back({{bytes.begin(), bytes.end()}, t, writer});
    tx_bytes_ += bytes.size();
    return bytes.size();
}

std::uint64_t SecureSerialDevice::digest() const {
    Fnv1a h;
    for (const auto& r : tx_) h.u64(static_cast<std::uint64_t>(r.t)).u64(r.writer).u64(r.bytes.size()).bytes(r.bytes);
    h.u64(rx_.size());
    return h.digest();
}

}  // namespace ringsim
