#pragma once

// FILO arenas over shared blocks. All metadata (top, capacity, bins) is
// private to the enclave; the shared bytes are only ever payload.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ringsim/enclave_ring.hpp"

namespace ringsim {

struct ArenaId {
    std::uint32_t index = 0;
    std::uint32_t generation = 0;
    bool operator==(const ArenaId&) const = default;

    std::uint64_t pack() const { return (std::uint64_t(generation) << 32) | index; }
    static ArenaId unpack(std::uint64_t v) {
        return {static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(v >> 32)};
    }
};

struct ArenaInfo {
    VirtAddr base = 0;  // enclave-space address of byte 0
    std::size_t capacity = 0;
    std::size_t top = 0;
};

/// Outcome of a request that could not be served immediately.
struct TicketOutcome {
    std::uint64_t ticket = 0;
    std::optional<ArenaId> arena;  // empty when the request failed
};

struct RefillOrder {
    std::size_t bytes = 0;
    bool prefill = false;
};

class ArenaPool {
public:
    struct Config {
        std::size_t min_class = 256;
        std::size_t max_class = 64 * 1024;
        std::size_t refill_min = 16 * 1024;
        std::size_t default_align = 16;
        /// Initial shared-memory request issued before main logic; 0 disables.
        std::size_t init_bytes = 0;
        /// (arena size, count) carved from the initial block, in order.
        std::vector<std::pair<std::size_t, std::size_t>> prefill_plan;
        /// Consecutive rejected grants tolerated before waiting requests fail.
        std::uint32_t max_rejections = 4;
    };

    /// Reads RINGSIM_INIT_SHM_BYTES from the given launch environment.
    static std::size_t init_bytes_from_env(const std::map<std::string, std::string>& env);

    ArenaPool(Instrumentation& inst, Config config);

    /// Either an arena available now or a ticket settled by a later refill.
    struct Request {
        std::optional<ArenaId> arena;
        std::uint64_t ticket = 0;
    };
    Result<Request> request_arena(std::size_t size);

    /// Queues the initial request when configured. No-op otherwise.
    void prefill();
    /// Next shared-memory request to issue; at most one is in flight.
    std::optional<RefillOrder> take_refill_order();
    /// Delivers the block obtained for the in-flight order.
    void on_refill(const TranslationEntry& block);
    /// The host answered the in-flight order with an error.
    void on_refill_failed();
    /// The host's grant was refused by the trusted side; the order is
    /// re-issued until `max_rejections` consecutive refusals.
    void on_refill_rejected();
    std::vector<TicketOutcome> take_outcomes();

    Result<std::size_t> push(ArenaId a, std::size_t n, std::size_t align);
    Result<std::size_t> push(ArenaId a, std::size_t n) { return push(a, n, config_.default_align); }
    Status pop(ArenaId a, std::size_t n);
    Status free_arena(ArenaId a);
    Result<ArenaInfo> info(ArenaId a) const;

    std::size_t size_class(std::size_t size) const;
    /// Number of free arenas binned at the given capacity.
    std::size_t bin_count(std::size_t capacity) const;
    std::map<std::size_t, std::size_t> bin_census() const;
    std::size_t received_bytes() const { return received_; }
    std::size_t live_bytes() const;
    std::size_t binned_bytes() const;
    bool refill_in_flight() const { return in_flight_.has_value(); }
    std::size_t queued_requests() const { return queue_.size(); }
    std::uint64_t refills_issued() const { return refills_issued_; }

private:
    struct Record {
        VirtAddr base = 0;
        std::size_t capacity = 0;
        std::size_t top = 0;
        std::uint32_t generation = 0;
        bool live = false;
    };
    struct Waiting {
        std::uint64_t ticket;
        std::size_t cls;
    };

    Record* lookup(ArenaId a);
    const Record* lookup(ArenaId a) const;
    std::optional<ArenaId> take_from_bins(std::size_t cls);
    void bin_block(VirtAddr base, std::size_t capacity);
    void split_greedy(VirtAddr base, std::size_t bytes);
    void serve_queue();

    Instrumentation& inst_;
    Config config_;
    std::vector<Record> records_;
    std::map<std::size_t, std::vector<std::uint32_t>> bins_;
    std::deque<Waiting> queue_;
    std::vector<TicketOutcome> outcomes_;
    std::optional<RefillOrder> wanted_;
    std::optional<RefillOrder> in_flight_;
    std::uint64_t next_ticket_ = 1;
    std::size_t received_ = 0;
    std::uint64_t refills_issued_ = 0;
    std::uint32_t rejections_ = 0;
};

}  // namespace ringsim
