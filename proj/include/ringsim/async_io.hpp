#pragma once

// Promise-returning I/O over the enclave ring: shared-memory arenas for
// payloads, parked submissions when the SQ is full, and ENCLAVE_MMAP refills
// for the arena pool.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "ringsim/arena.hpp"
#include "ringsim/enclave_ring.hpp"
#include "ringsim/promise.hpp"

namespace ringsim {

class AsyncIo {
public:
    struct Config {
        std::size_t max_parked = 64;
        std::size_t stream_capacity = 64;
    };

    AsyncIo(EnclaveRing& ring, ArenaPool& arenas, PromisePool& promises)
        : AsyncIo(ring, arenas, promises, Config{}) {}
    AsyncIo(EnclaveRing& ring, ArenaPool& arenas, PromisePool& promises, Config config);

    /// Submits one request; the promise settles with the completion result
    /// (failed with the positive errno when the result is negative).
    Result<PromiseId> submit(const SqeArgs& args);
    /// Fulfilled with ArenaId::pack() of a live arena.
    Result<PromiseId> request_arena(std::size_t size);
    /// Fulfilled with the enclave-space base of a new shared block.
    Result<PromiseId> enclave_mmap(std::size_t size);

    /// Copies `data` into an arena and writes it. A zero-length write is
    /// fulfilled with 0 without touching the ring.
    Result<PromiseId> async_write(std::int32_t fd, std::span<const std::byte> data, std::uint64_t off);
    /// Reads up to `n` bytes; the bytes land in `*dest` (private memory)
    /// only if the chain fulfills. `dest` must outlive the chain.
    Result<PromiseId> async_read(std::int32_t fd, std::size_t n, std::uint64_t off,
                                 std::vector<std::byte>* dest);

    /// Multi-shot request whose completions are queued per stream.
    Result<std::uint64_t> open_stream(const SqeArgs& args);
    std::optional<Completion> next_event(std::uint64_t stream);
    bool stream_open(std::uint64_t stream) const;
    void close_stream(std::uint64_t stream);

    /// Drains completions, settles arena tickets, issues refills and parked
    /// submissions, then runs deferred continuations. Bounded per call.
    void pump();
    /// Gives up on the request behind `p` (an op promise or the final
    /// promise of a write/read chain). The promise fails with ECANCELED.
    Status abandon(PromiseId p);

    std::size_t parked() const { return parked_.size(); }
    std::size_t in_flight() const { return ops_.size(); }
    std::uint64_t ops_submitted() const { return ops_submitted_; }
    /// Terminal completions that reached this layer a second time.
    std::uint64_t double_deliveries() const { return double_deliveries_; }
    EnclaveRing& ring() { return ring_; }
    ArenaPool& arenas() { return arenas_; }
    PromisePool& promises() { return promises_; }

private:
    enum class OpKind : std::uint8_t { Plain, Mmap, Refill, Stream };

    struct Op {
        OpKind kind = OpKind::Plain;
        std::optional<PromiseId> promise;
        std::uint64_t internal_id = 0;
        RegionId region = 0;
        std::size_t size = 0;
        bool parked = false;
        SqeArgs args;
    };

    struct Chain {
        bool is_write = false;
        std::int32_t fd = 0;
        std::uint64_t off = 0;
        std::vector<std::byte> payload;
        std::size_t n = 0;
        std::vector<std::byte>* dest = nullptr;
        VirtAddr addr = 0;
        std::optional<ArenaId> arena;
        std::optional<PromiseId> head;
        std::optional<std::uint64_t> op_tag;
        PromiseId final{};
    };

    std::uint64_t new_internal_tag() { return (1ULL << 63) | next_internal_++; }
    Status issue(std::uint64_t tag, Op& op);
    void queue_op(std::uint64_t tag, Op op);
    void handle(const Completion& c);
    void fail_op(std::uint64_t tag, std::int64_t err);
    Result<PromiseId> start_chain(Chain chain);

    static Step write_stage(void* ctx, const PromiseArgs& args, const Settlement& in);
    static Step read_stage(void* ctx, const PromiseArgs& args, const Settlement& in);
    static Step copy_stage(void* ctx, const PromiseArgs& args, const Settlement& in);
    static Step finish_stage(void* ctx, const PromiseArgs& args, const Settlement& in);

    EnclaveRing& ring_;
    ArenaPool& arenas_;
    PromisePool& promises_;
    Config config_;
    std::map<std::uint64_t, Op> ops_;
    std::deque<std::uint64_t> parked_;
    std::map<std::uint64_t, PromiseId> tickets_;
    std::map<std::uint64_t, Chain> chains_;
    std::map<std::uint64_t, std::deque<Completion>> streams_;
    std::uint64_t next_internal_ = 1;
    std::uint64_t next_chain_ = 1;
    std::uint64_t ops_submitted_ = 0;
    std::set<std::uint64_t> terminal_seen_;
    std::uint64_t double_deliveries_ = 0;
};

}  // namespace ringsim
