#pragma once

// Fixed-layout submission/completion rings in shared memory. Each party
// keeps its own copy of the ring size and mask plus its own index; only the
// peer's index is read from shared memory, and the derived occupancy is
// clamped to [0, entries] before use.

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ringsim/shm_world.hpp"
#include "ringsim/step_meter.hpp"
#include "ringsim/types.hpp"

namespace ringsim {

enum class Opcode : std::uint8_t {
    Nop = 0,
    Open = 1,
    Read = 2,
    Write = 3,
    Close = 4,
    Statx = 5,
    Unlink = 6,
    Mkdir = 7,
    Sync = 8,
    Socket = 9,
    Bind = 10,
    Listen = 11,
    Accept = 12,
    Recv = 13,
    Send = 14,
    Writev = 15,
    Getpid = 16,
    EnclaveMmap = 17,
    EnclaveSpawn = 18,
};

inline constexpr std::uint8_t kSqeFlagMultishot = 0x01;
inline constexpr std::uint32_t kCqeFlagMore = 0x02;
inline constexpr std::uint32_t kSqNeedWakeup = 0x01;

struct Sqe {
    std::uint8_t opcode = 0;
    std::uint8_t flags = 0;
    std::int32_t fd = 0;
    std::uint64_t addr = 0;
    std::uint32_t len = 0;
    std::uint64_t off = 0;
    std::uint64_t user_data = 0;

    static constexpr std::size_t kSize = 64;
    void encode(std::span<std::byte, kSize> out) const;
    static Sqe decode(std::span<const std::byte, kSize> in);
    bool operator==(const Sqe&) const = default;
};

struct Cqe {
    std::uint64_t user_data = 0;
    std::int32_t result = 0;
    std::uint32_t flags = 0;

    static constexpr std::size_t kSize = 16;
    void encode(std::span<std::byte, kSize> out) const;
    static Cqe decode(std::span<const std::byte, kSize> in);
    bool operator==(const Cqe&) const = default;
};

/// Shared ring header offsets (bytes from the start of the ring window).
namespace ring_header {
inline constexpr std::size_t kHead = 0;
inline constexpr std::size_t kTail = 4;
inline constexpr std::size_t kEntries = 8;
inline constexpr std::size_t kMask = 12;
inline constexpr std::size_t kFlags = 16;
inline constexpr std::size_t kDropped = 20;
inline constexpr std::size_t kSize = 64;
}  // namespace ring_header

constexpr std::size_t ring_bytes(std::uint32_t entries, std::size_t slot_size) {
    return ring_header::kSize + std::size_t(entries) * slot_size;
}

/// A party's private description of one ring. Nothing here is re-read from
/// shared memory after construction.
class RingLayout {
public:
    RingLayout() = default;

    /// Writes a fresh header (head = tail = 0) into the region.
    static Result<RingLayout> init(ByteWindow region, std::uint32_t entries, std::size_t slot_size);
    /// Adopts an existing ring, confirming that the shared header advertises
    /// the size this party expects.
    static Result<RingLayout> attach(ByteWindow region, std::uint32_t expected_entries,
                                     std::size_t slot_size);

    std::uint32_t entries() const { return entries_; }
    std::uint32_t mask() const { return mask_; }
    std::size_t slot_size() const { return slot_size_; }
    const ByteWindow& window() const { return window_; }

    std::size_t slot_offset(std::uint32_t index) const {
        return ring_header::kSize + std::size_t(index & mask_) * slot_size_;
    }
    /// Clamped occupancy of a ring whose indices are (head, tail).
    std::uint32_t occupancy(std::uint32_t head, std::uint32_t tail) const {
        const std::uint32_t delta = tail - head;
        return delta > entries_ ? entries_ : delta;
    }

private:
    RingLayout(ByteWindow w, std::uint32_t entries, std::size_t slot_size)
        : window_(std::move(w)), entries_(entries), mask_(entries - 1), slot_size_(slot_size) {}

    ByteWindow window_;
    std::uint32_t entries_ = 0;
    std::uint32_t mask_ = 0;
    std::size_t slot_size_ = 0;
};

/// Producer end. The producer owns the tail; only the head is read back.
template <class Entry>
class RingProducer {
public:
    RingProducer() = default;
    RingProducer(RingLayout layout, std::uint32_t tail, StepMeter* meter = nullptr)
        : layout_(std::move(layout)), tail_(tail), meter_(meter) {}

    static RingProducer adopt(RingLayout layout, StepMeter* meter = nullptr) {
        auto t = layout.window().load_u32(ring_header::kTail, std::memory_order_relaxed);
        return RingProducer(std::move(layout), t.value_or(0), meter);
    }

    /// Free slots as seen through the (untrusted) shared head.
    std::uint32_t free_slots() const {
        tick();
        const std::uint32_t head =
            layout_.window().load_u32(ring_header::kHead, std::memory_order_acquire).value_or(tail_);
        return layout_.entries() - layout_.occupancy(head, tail_);
    }
    /// Serializes an entry into the slot for `index` (not yet published).
    void write_slot(std::uint32_t index, const Entry& e) const {
        tick();
        std::array<std::byte, Entry::kSize> buf{};
        e.encode(buf);
        layout_.window().write(layout_.slot_offset(index), buf);
    }
    /// Publishes everything up to `new_tail` with release ordering.
    void publish(std::uint32_t new_tail) {
        tick();
        tail_ = new_tail;
        layout_.window().store_u32(ring_header::kTail, tail_, std::memory_order_release);
    }

    Status produce(const Entry& e) {
        if (free_slots() == 0) return Err{Errc::Full};
        write_slot(tail_, e);
        publish(tail_ + 1);
        return {};
    }

    std::uint32_t tail() const { return tail_; }
    const RingLayout& layout() const { return layout_; }
    void set_meter(StepMeter* m) { meter_ = m; }

private:
    void tick() const {
        if (meter_) meter_->tick();
    }

    RingLayout layout_;
    std::uint32_t tail_ = 0;
    StepMeter* meter_ = nullptr;
};

/// Consumer end. The consumer owns the head; only the tail is read back.
template <class Entry>
class RingConsumer {
public:
    RingConsumer() = default;
    RingConsumer(RingLayout layout, std::uint32_t head, StepMeter* meter = nullptr)
        : layout_(std::move(layout)), head_(head), meter_(meter) {}

    static RingConsumer adopt(RingLayout layout, StepMeter* meter = nullptr) {
        auto h = layout.window().load_u32(ring_header::kHead, std::memory_order_relaxed);
        return RingConsumer(std::move(layout), h.value_or(0), meter);
    }

    /// Entries available as seen through the (untrusted) shared tail.
    std::uint32_t available() const {
        tick();
        const std::uint32_t tail =
            layout_.window().load_u32(ring_header::kTail, std::memory_order_acquire).value_or(head_);
        return layout_.occupancy(head_, tail);
    }
    /// Copies the slot for `index` out of shared memory exactly once.
    Entry read_slot(std::uint32_t index) const {
        tick();
        std::array<std::byte, Entry::kSize> buf{};
        layout_.window().read(layout_.slot_offset(index), buf);
        return Entry::decode(buf);
    }
    /// Advances the head by `count` with release ordering.
    void release(std::uint32_t count) {
        tick();
        head_ += count;
        layout_.window().store_u32(ring_header::kHead, head_, std::memory_order_release);
    }

    /// Private snapshot of the oldest entry; head is not advanced.
    std::optional<Entry> peek() const {
        if (available() == 0) return std::nullopt;
        return read_slot(head_);
    }
    Status consume() {
        if (available() == 0) return Err{Errc::EmptyConsume};
        release(1);
        return {};
    }
    /// Copies out up to `max` entries; loops at most min(max, entries) times.
    std::vector<Entry> consume_batch(std::uint32_t max) {
        const std::uint32_t n = std::min(max, available());
        std::vector<Entry> out;
        out.reserve(n);
        for (std::uint32_t i = 0; i < n; ++i) out.push_back(read_slot(head_ + i));
        if (n > 0) release(n);
        return out;
    }

    std::uint32_t head() const { return head_; }
    const RingLayout& layout() const { return layout_; }
    void set_meter(StepMeter* m) { meter_ = m; }

private:
    void tick() const {
        if (meter_) meter_->tick();
    }

    RingLayout layout_;
    std::uint32_t head_ = 0;
    StepMeter* meter_ = nullptr;
};

using SubmissionProducer = RingProducer<Sqe>;
using SubmissionConsumer = RingConsumer<Sqe>;
using CompletionProducer = RingProducer<Cqe>;
using CompletionConsumer = RingConsumer<Cqe>;

// Convenience names matching the protocol's operations.
inline Status sq_produce(SubmissionProducer& p, const Sqe& e) { return p.produce(e); }
inline std::vector<Sqe> sq_consume_batch(SubmissionConsumer& c, std::uint32_t max) {
    return c.consume_batch(max);
}
inline Status cq_produce(CompletionProducer& p, const Cqe& e) { return p.produce(e); }
inline std::optional<Cqe> cq_peek(const CompletionConsumer& c) { return c.peek(); }
inline Status cq_consume(CompletionConsumer& c) { return c.consume(); }

}  // namespace ringsim
