#pragma once

// Synchronous POSIX-style calls over the promise layer. Every call spins
// under the scheduler until its promise settles, its timeout expires or an
// alarm fires; regular-file writes are staged privately and written back
// with at most one write in flight per descriptor.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ringsim/enclave_env.hpp"
#include "ringsim/runtime.hpp"
#include "ringsim/vfs.hpp"

namespace ringsim {

struct TimeoutConfig {
    /// Per-call timeout; nullopt waits forever, 0 polls once.
    std::optional<SimTime> timeout;
    /// Absolute time at which a pending call is interrupted.
    std::optional<SimTime> alarm_at;
    SimTime poll_cost = 2'000;
    /// Minimum spacing of wake requests while the host poller sleeps.
    SimTime wake_backoff = 50'000;
};

struct WriteSubmission {
    std::int32_t fd = 0;
    std::uint64_t off = 0;
    std::size_t len = 0;
    SimTime t = 0;
    bool buffered = false;
};

class LibcShim {
public:
    struct Config {
        std::size_t llc_bytes = 1 << 20;
        bool buffering = true;
        std::size_t max_write = 64 * 1024;
        TimeoutConfig timeouts{};
        /// Simulated cost of copying one KiB into the staging buffer.
        SimTime stage_cost_per_kib = 50;
    };

    LibcShim(EnclaveEnv& env, ExecContext& ctx) : LibcShim(env, ctx, Config{}) {}
    LibcShim(EnclaveEnv& env, ExecContext& ctx, Config config);

    /// Result (>= 0) or -errno.
    Co<std::int64_t> sync_call(SqeArgs args);
    Co<std::int64_t> sync_call(SqeArgs args, TimeoutConfig cfg);
    Co<std::int64_t> await_promise(PromiseId p, TimeoutConfig cfg);

    Co<std::int64_t> open(std::string path, std::uint32_t flags);
    Co<std::int64_t> write(std::int32_t fd, std::vector<std::byte> bytes);
    Co<std::int64_t> read(std::int32_t fd, std::size_t n, std::vector<std::byte>* out);
    /// Positional read; the descriptor position is left alone.
    Co<std::int64_t> pread(std::int32_t fd, std::size_t n, std::uint64_t off, std::vector<std::byte>* out);
    Co<std::int64_t> flush(std::int32_t fd);
    Co<std::int64_t> close(std::int32_t fd);
    Co<std::int64_t> statx(std::string path, StatxRecord* out);
    Co<std::int64_t> unlink(std::string path);
    Co<std::int64_t> mkdir(std::string path);
    /// Request whose addr points at `in` copied to shared memory; `out_len`
    /// bytes following the 8-aligned input are copied back to `*out`.
    Co<std::int64_t> buffer_call(SqeArgs args, std::vector<std::byte> in, std::size_t out_len,
                                 std::vector<std::byte>* out);

    void set_timeouts(TimeoutConfig cfg) { config_.timeouts = cfg; }
    const TimeoutConfig& timeouts() const { return config_.timeouts; }
    std::size_t cap() const { return config_.llc_bytes / 2; }
    bool buffered(std::int32_t fd) const;
    std::size_t staged(std::int32_t fd) const;
    std::size_t block_size(std::int32_t fd) const;
    const std::vector<WriteSubmission>& write_log() const { return write_log_; }
    /// Largest number of writes ever in flight on one descriptor.
    std::size_t max_outstanding() const { return max_outstanding_; }
    std::uint64_t alarms_fired() const { return alarms_fired_; }
    std::uint64_t timeouts_hit() const { return timeouts_hit_; }

private:
    struct FdState {
        std::string path;
        std::uint64_t pos = 0;
        bool buffered = false;
        std::size_t block = 4096;
        std::vector<std::byte> staging;
        std::uint64_t staging_off = 0;
        std::optional<PromiseId> outstanding;
        std::vector<std::byte> inflight;
        std::uint64_t inflight_off = 0;
        std::int32_t poison = 0;
    };

    Co<std::int64_t> await_until(PromiseId p, TimeoutConfig cfg, SimTime start);
    Co<std::int64_t> wait_outstanding(std::int32_t fd, TimeoutConfig cfg, SimTime start);
    void reap(FdState& fs);
    void finish_write(FdState& fs, const Settlement& s);
    void submit_staged(std::int32_t fd, FdState& fs, bool allow_tail);
    Co<std::int64_t> write_direct(std::int32_t fd, std::vector<std::byte> bytes, std::uint64_t off);
    FdState* state(std::int32_t fd);

    EnclaveEnv& env_;
    ExecContext& ctx_;
    Config config_;
    std::map<std::int32_t, FdState> fds_;
    std::vector<WriteSubmission> write_log_;
    std::size_t max_outstanding_ = 0;
    SimTime last_enter_ = -1;
    std::uint64_t alarms_fired_ = 0;
    std::uint64_t timeouts_hit_ = 0;
};

}  // namespace ringsim
