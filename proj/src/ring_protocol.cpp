#include "ringsim/ring_protocol.hpp"

#include "ringsim/util.hpp"

namespace ringsim {

void Sqe::encode(std::span<std::byte, kSize> out) const {
    std::fill(out.begin(), out.end(), std::byte{0});
    store_le(out, 0, opcode, 1);
    store_le(out, 1, flags, 1);
    store_le(out, 4, static_cast<std::uint32_t>(fd), 4);
    store_le(out, 8, addr, 8);
    store_le(out, 16, len, 4);
    store_le(out, 24, off, 8);
    store_le(out, 32, user_data, 8);
}

Sqe Sqe::decode(std::span<const std::byte, kSize> in) {
    Sqe e;
    e.opcode = static_cast<std::uint8_t>(load_le(in, 0, 1));
    e.flags = static_cast<std::uint8_t>(load_le(in, 1, 1));
    e.fd = static_cast<std::int32_t>(static_cast<std::uint32_t>(load_le(in, 4, 4)));
    e.addr = load_le(in, 8, 8);
    e.len = static_cast<std::uint32_t>(load_le(in, 16, 4));
    e.off = load_le(in, 24, 8);
    e.user_data = load_le(in, 32, 8);
    return e;
}

void Cqe::encode(std::span<std::byte, kSize> out) const {
    store_le(out, 0, user_data, 8);
    store_le(out, 8, static_cast<std::uint32_t>(result), 4);
    store_le(out, 12, flags, 4);
}

Cqe Cqe::decode(std::span<const std::byte, kSize> in) {
    Cqe e;
    e.user_data = load_le(in, 0, 8);
    e.result = static_cast<std::int32_t>(static_cast<std::uint32_t>(load_le(in, 8, 4)));
    e.flags = static_cast<std::uint32_t>(load_le(in, 12, 4));
    return e;
}

Result<RingLayout> RingLayout::init(ByteWindow region, std::uint32_t entries, std::size_t slot_size) {
    if (!is_power_of_two(entries) || slot_size == 0 || !region.valid() ||
        region.size() < ring_bytes(entries, slot_size))
        return Err{Errc::BadSize};
    region.fill(0, ring_header::kSize, std::byte{0});
    region.store_u32(ring_header::kEntries, entries, std::memory_order_relaxed);
    region.store_u32(ring_header::kMask, entries - 1, std::memory_order_relaxed);
    region.store_u32(ring_header::kHead, 0, std::memory_order_relaxed);
    region.store_u32(ring_header::kTail, 0, std::memory_order_release);
    return RingLayout(std::move(region), entries, slot_size);
}

Result<RingLayout> RingLayout::attach(ByteWindow region, std::uint32_t expected_entries,
                                      std::size_t slot_size) {
    if (!is_power_of_two(expected_entries) || slot_size == 0 || !region.valid() ||
        region.size() < ring_bytes(expected_entries, slot_size))
        return Err{Errc::BadSize};
    auto advertised = region.load_u32(ring_header::kEntries, std::memory_order_acquire);
    if (!advertised || *advertised != expected_entries) return Err{Errc::BadSize};
    return RingLayout(std::move(region), expected_entries, slot_size);
}

}  // namespace ringsim
