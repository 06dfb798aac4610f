#pragma once

// Bounded promise pool. A promise carries a callback, a fixed argument
// array and at most one successor; callbacks run on the owning task only.

#include <array>
#include <cstdint>
#include <deque>
#include <memory>
#include <optional>
#include <vector>

#include "ringsim/enclave_ring.hpp"

namespace ringsim {

struct PromiseId {
    std::uint32_t index = 0;
    std::uint32_t generation = 0;
    bool operator==(const PromiseId&) const = default;

    /// Wire tag used as the caller tag of ring submissions. Never zero.
    std::uint64_t tag() const { return (std::uint64_t(generation) << 32) | index; }
    static PromiseId from_tag(std::uint64_t t) {
        return {static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(t >> 32)};
    }
};

enum class PromiseState : std::uint8_t { Pending, Fulfilled, Failed, Invalid };

struct Settlement {
    PromiseState state = PromiseState::Pending;
    /// Fulfilled value, or a positive error number when failed.
    std::int64_t value = 0;

    bool settled() const { return state == PromiseState::Fulfilled || state == PromiseState::Failed; }
};

using PromiseArgs = std::array<std::uint64_t, 8>;

/// What a callback decided for the promise it settles.
struct Step {
    enum class Kind : std::uint8_t { Fulfill, Fail, Adopt };
    Kind kind = Kind::Fulfill;
    std::int64_t value = 0;
    PromiseId adopt{};

    static Step fulfill(std::int64_t v) { return {Kind::Fulfill, v, {}}; }
    static Step fail(std::int64_t err) { return {Kind::Fail, err, {}}; }
    /// Settle with whatever `p` settles with.
    static Step follow(PromiseId p) { return {Kind::Adopt, 0, p}; }
};

using PromiseCallback = Step (*)(void* ctx, const PromiseArgs& args, const Settlement& input);

class PromisePool {
public:
    struct Config {
        std::size_t max_outstanding = 256;
        std::size_t chunk_size = 32;
        std::uint32_t continuation_budget = 32;
    };

    explicit PromisePool(Instrumentation& inst) : PromisePool(inst, Config{}) {}
    PromisePool(Instrumentation& inst, Config config);

    Result<PromiseId> make();
    Result<PromiseId> make_fulfilled(std::int64_t v);
    Result<PromiseId> make_failed(std::int64_t err);

    /// Links a new promise after `p`. The callback runs when `p` fulfills;
    /// with `always` it also runs when `p` fails, otherwise the failure
    /// propagates without running it. `p` is released automatically once it
    /// has handed its result on.
    Result<PromiseId> then(PromiseId p, PromiseCallback cb, void* ctx, const PromiseArgs& args,
                           bool always = false);

    Settlement poll(PromiseId p) const;
    Status fulfill(PromiseId p, std::int64_t value);
    Status fail(PromiseId p, std::int64_t err);
    /// Maps a completion result to a settlement: negative means failure.
    Status settle_from_cqe(std::uint64_t tag, std::int32_t result);
    /// Continues propagation deferred by the continuation budget.
    void run_deferred();
    bool has_deferred() const { return !ready_.empty(); }
    Status release(PromiseId p);

    std::size_t outstanding() const { return outstanding_; }
    std::size_t capacity() const { return config_.max_outstanding; }
    std::uint64_t callbacks_run() const { return callbacks_run_; }
    const Config& config() const { return config_; }

private:
    struct Record {
        std::uint32_t generation = 0;
        bool in_use = false;
        Settlement s;
        bool has_next = false;
        PromiseId next{};
        // Callback used to settle `next`; null forwards the settlement.
        PromiseCallback cb = nullptr;
        void* ctx = nullptr;
        PromiseArgs args{};
        bool always = false;
        bool owned_by_chain = false;
    };

    Record* get(PromiseId p);
    const Record* get(PromiseId p) const;
    Result<PromiseId> allocate();
    void free_record(PromiseId p);
    void settle(PromiseId p, Settlement s);
    void drain(std::uint32_t budget);

    Instrumentation& inst_;
    Config config_;
    std::vector<std::unique_ptr<Record[]>> chunks_;
    std::vector<std::uint32_t> free_;
    std::size_t outstanding_ = 0;
    std::deque<PromiseId> ready_;
    std::uint64_t callbacks_run_ = 0;
    bool draining_ = false;
};

}  // namespace ringsim
