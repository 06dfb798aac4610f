#pragma once

// Simulated untrusted OS: one proxy per enclave with an SQ-polling loop, a
// latency-modelled worker queue, the virtual filesystem, and the adversary
// hooks. Runs as a scheduler task through activate().

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "ringsim/adversary.hpp"
#include "ringsim/ring_protocol.hpp"
#include "ringsim/trusted_kernel.hpp"
#include "ringsim/vfs.hpp"

namespace ringsim {

struct HostConfig {
    SimTime idle_timeout = 200'000;
    /// Longest slice an idle host burns before checking again.
    SimTime idle_quantum = 20'000;
    SimTime activation_cost = 500;
    SimTime op_cost = 1'000;
    SimTime base_latency = 20'000;
    SimTime jitter = 5'000;
    std::uint32_t batch = 32;
    /// Proxy-space base for ring and shared mappings.
    VirtAddr proxy_base = 0x10000000;
    std::uint64_t latency_seed = 1;
};

/// One completion carrying payload to the enclave, kept for game audits.
struct Delivery {
    EnclaveId enclave = 0;
    Opcode op = Opcode::Nop;
    SimTime t_post = 0;
    std::int32_t result = 0;
    std::vector<std::byte> bytes;
    VirtAddr payload_addr = 0;  // proxy space
    VirtAddr cq_slot_addr = 0;  // proxy space
    std::uint32_t cq_index = 0;
    bool adversarial = false;   // corrupted by policy when posted
    bool tampered = false;      // overwritten after posting
};

struct HostStats {
    std::uint64_t activations = 0;
    std::uint64_t sqes_consumed = 0;
    std::uint64_t cqes_posted = 0;
    std::uint64_t cqes_dropped_full = 0;
    std::uint64_t denied = 0;
    std::uint64_t corrupted = 0;
    std::uint64_t duplicated = 0;
    std::uint64_t flooded = 0;
    std::uint64_t sleeps = 0;
    std::uint64_t wakes = 0;
    std::uint64_t wakes_ignored = 0;
    std::uint64_t scribbles = 0;
    std::uint64_t probes = 0;
    std::uint64_t probe_faults = 0;
    std::uint64_t registrations_rejected = 0;
    /// Rejected registrations that nevertheless changed trusted state.
    std::uint64_t rejected_with_state_change = 0;
};

/// Power-of-two latency buckets in simulated nanoseconds.
struct LatencyHistogram {
    std::uint64_t count = 0;
    SimTime total = 0;
    SimTime max = 0;
    std::map<int, std::uint64_t> buckets;  // floor(log2(ns)) -> count

    void add(SimTime ns);
};

enum class PollerState : std::uint8_t { Awake, Asleep };

class HostModel {
public:
    using SpawnHook = std::function<void(EnclaveId child, const std::string& binary)>;

    HostModel(TrustedKernel& kernel, VirtualFs& vfs, Adversary adversary, HostConfig config);

    /// Allocates and initializes ring pages for a new proxy and asks the
    /// trusted kernel to launch `binary` behind it.
    Result<EnclaveId> spawn(const std::string& binary, std::optional<EnclaveId> parent = std::nullopt);
    void set_spawn_hook(SpawnHook hook) { spawn_hook_ = std::move(hook); }

    /// One host time slice. Returns the simulated time it consumed.
    SimTime activate(SimTime now);

    /// Consumes up to `batch` SQEs of one proxy. Returns the count.
    std::size_t poll_once(EnclaveId id, SimTime now);
    /// Honest semantics of one request; the completion is not posted.
    /// Returns nullopt while the request has to wait for data.
    std::optional<Cqe> service_op(EnclaveId id, const Sqe& sqe, SimTime now);
    /// Handles a pending software interrupt from the trusted side.
    void handle_wake(SimTime now);
    /// One random overwrite of a proxy's shared memory, regardless of policy.
    void scribble_once() { scribble(); }

    PollerState poller(EnclaveId id) const;
    std::optional<SimTime> next_due() const;
    bool proxy_alive(EnclaveId id) const;
    std::size_t pending_work() const { return work_.size(); }
    std::int32_t proxy_pid(EnclaveId id) const;

    const std::vector<Delivery>& deliveries() const { return deliveries_; }
    const HostStats& stats() const { return stats_; }
    /// Submission-to-completion latency per opcode, as seen by the host.
    const std::map<Opcode, LatencyHistogram>& latencies() const { return latency_; }
    Adversary& adversary() { return adversary_; }
    VirtualFs& vfs() { return vfs_; }
    TrustedKernel& kernel() { return kernel_; }
    const HostConfig& config() const { return config_; }

private:
    struct Proxy {
        EnclaveId enclave = 0;
        std::uint32_t proxy_id = 0;
        SpaceId space = 0;
        VirtAddr sq_addr = 0;
        VirtAddr cq_addr = 0;
        std::size_t sq_bytes = 0;
        std::size_t cq_bytes = 0;
        SubmissionConsumer sq;
        CompletionProducer cq;
        PollerState state = PollerState::Awake;
        SimTime last_activity = 0;
        bool alive = true;
        bool channel_tampered = false;
        std::set<std::uint32_t> sq_dirty;  // unconsumed SQ indices overwritten by a scribble
        std::vector<std::pair<VirtAddr, std::size_t>> blocks;  // shared data mappings
    };

    struct Work {
        EnclaveId enclave = 0;
        Sqe sqe;
        SimTime due = 0;
        SimTime queued = 0;
        OpRule rule;
        bool multishot = false;
        bool tampered = false;
        std::uint64_t seq = 0;
    };

    Party proxy_party(const Proxy& p) const { return Party::proxy(p.proxy_id); }
    Proxy* find(EnclaveId id);
    const Proxy* find(EnclaveId id) const;
    Result<ByteWindow> proxy_window(Proxy& p, VirtAddr addr, std::size_t len, AccessMode mode);
    std::optional<std::string> read_path(Proxy& p, VirtAddr addr, std::size_t len);

    void enqueue(Proxy& p, const Sqe& sqe, SimTime now, bool tampered);
    bool run_work(Work& w, SimTime now);
    void post(Proxy& p, Cqe cqe, const Work* w, SimTime now, std::vector<std::byte> payload,
              VirtAddr payload_addr);
    void corrupt(Proxy& p, Cqe& cqe, const Sqe& sqe);
    std::int32_t enclave_mmap(Proxy& p, const Sqe& sqe);
    std::int32_t enclave_spawn(Proxy& p, const Sqe& sqe);
    void scribble();
    void probe_trusted();
    void kill_all(SimTime now);
    void mark_tampered(Proxy& p, VirtAddr addr, std::size_t len);

    TrustedKernel& kernel_;
    ShmWorld& world_;
    VirtualFs& vfs_;
    Adversary adversary_;
    HostConfig config_;
    SpawnHook spawn_hook_;
    std::map<EnclaveId, Proxy> proxies_;
    std::uint32_t next_proxy_ = 1;
    std::deque<Work> work_;
    std::uint64_t work_seq_ = 0;
    std::vector<Delivery> deliveries_;
    std::optional<CompletionConsumer> wake_consumer_;
    bool killed_ = false;
    HostStats stats_;
    std::map<Opcode, LatencyHistogram> latency_;
    Rng latency_rng_;
    std::vector<std::byte> last_payload_;
    VirtAddr last_payload_addr_ = 0;
};

}  // namespace ringsim
