#pragma once

// Enclave-side ring API. Nothing returned to callers points into shared
// memory: SQE slots are handed out as index tokens, completions are private
// copies, and user_data values on the wire are internal ids that map to the
// caller's tag through a private table.

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "ringsim/ring_protocol.hpp"
#include "ringsim/step_meter.hpp"
#include "ringsim/trusted_kernel.hpp"

namespace ringsim {

/// Step counter and per-op statistics shared by all enclave-side layers of
/// one enclave.
struct Instrumentation {
    StepMeter meter;
    StepStats stats;
};

struct TranslationEntry {
    VirtAddr enclave_base = 0;
    VirtAddr proxy_base = 0;
    std::size_t size = 0;

    VirtAddr enclave_end() const { return enclave_base + size; }
    bool operator==(const TranslationEntry&) const = default;
};

/// Sorted, pairwise-disjoint list of shared blocks.
class TranslationTable {
public:
    explicit TranslationTable(std::size_t capacity = 64) : capacity_(capacity) {}

    Status insert(const TranslationEntry& e);
    /// Binary search for the block containing [addr, addr + len).
    const TranslationEntry* find(VirtAddr addr, std::size_t len = 1, StepMeter* meter = nullptr) const;
    Result<VirtAddr> translate(VirtAddr addr, std::size_t len = 1, StepMeter* meter = nullptr) const;

    const std::vector<TranslationEntry>& entries() const { return entries_; }
    std::size_t capacity() const { return capacity_; }
    /// Upper bound on loop iterations of one lookup.
    std::uint32_t search_bound() const;

private:
    std::size_t capacity_;
    std::vector<TranslationEntry> entries_;
};

struct SqeId {
    std::uint32_t position = 0;
    std::uint32_t generation = 0;
    bool operator==(const SqeId&) const = default;
};

/// How the addr field of a request is interpreted before publishing.
enum class AddrKind : std::uint8_t {
    Value,    // passed through untouched
    Buffer,   // [addr, addr+len) must be shared; rewritten to proxy space
    IoVec,    // array of `len` (addr, len) records, each deep-translated
};

struct SqeArgs {
    Opcode opcode = Opcode::Nop;
    std::uint8_t flags = 0;
    std::int32_t fd = 0;
    std::uint64_t addr = 0;
    std::uint32_t len = 0;
    std::uint64_t off = 0;
    AddrKind addr_kind = AddrKind::Value;
};

struct Completion {
    std::uint64_t caller_tag = 0;
    std::int32_t result = 0;
    std::uint32_t flags = 0;
    std::uint64_t internal_id = 0;

    bool more() const { return (flags & kCqeFlagMore) != 0; }
};

inline std::int32_t cqe_get_result(const Completion& c) { return c.result; }
inline std::uint64_t cqe_get_data64(const Completion& c) { return c.caller_tag; }

/// Declared per-operation step bounds for a ring configuration.
struct StepBounds {
    std::uint32_t try_get_sqe;
    std::uint32_t prep_and_submit;
    std::uint32_t release_sqe;
    std::uint32_t peek_cqe;
    std::uint32_t consume_cqe;
    std::uint32_t translate;
    std::uint32_t deep_translate;
};

class EnclaveRing {
public:
    struct Config {
        std::uint32_t drop_budget = 8;
        std::uint32_t pending_multiplier = 4;
        std::size_t max_translations = 64;
        std::uint32_t max_iov = 16;
    };

    static Result<std::unique_ptr<EnclaveRing>> attach(TrustedKernel& kernel, EnclaveId id,
                                                       const RingWindows& rings,
                                                       Instrumentation& inst, Config config);
    static Result<std::unique_ptr<EnclaveRing>> attach(TrustedKernel& kernel, EnclaveId id,
                                                       const RingWindows& rings,
                                                       Instrumentation& inst) {
        return attach(kernel, id, rings, inst, Config{});
    }

    EnclaveRing(const EnclaveRing&) = delete;
    EnclaveRing& operator=(const EnclaveRing&) = delete;

    // --- submission ---------------------------------------------------------
    Result<SqeId> try_get_sqe();
    /// Writes and publishes the request; returns the internal id placed in
    /// the SQE's user_data field.
    Result<std::uint64_t> prep_and_submit(SqeId id, const SqeArgs& args, std::uint64_t caller_tag);
    /// Gives a reservation back; its slot is published as a no-op.
    Status release_sqe(SqeId id);

    // --- completion ---------------------------------------------------------
    std::optional<Completion> peek_cqe();
    Status consume_cqe();
    /// Tombstones an outstanding id; any later completion for it is dropped.
    bool abandon(std::uint64_t internal_id);
    bool is_live(std::uint64_t internal_id) const;

    // --- translation --------------------------------------------------------
    Result<VirtAddr> translate_addr(VirtAddr enclave_addr);
    /// Rewrites `count` (addr, len) records at `vec_addr` all-or-nothing.
    Status deep_translate(VirtAddr vec_addr, std::uint32_t count);
    const TranslationTable& translations() const { return table_; }

    // --- shared-memory grants ----------------------------------------------
    /// Submits an ENCLAVE_MMAP request for a fresh region id.
    Result<std::uint64_t> submit_enclave_mmap(SqeId id, std::size_t size, RegionId region,
                                              std::uint64_t caller_tag);
    /// Maps the region named by a completed ENCLAVE_MMAP whose result carried
    /// the proxy-space base, and records the translation.
    Result<TranslationEntry> finish_enclave_mmap(RegionId region, std::size_t size,
                                                 std::int64_t proxy_base);
    RegionId next_region_id() { return next_region_++; }

    // --- misc ---------------------------------------------------------------
    /// True when the host poller has advertised that it is asleep.
    bool need_wakeup();
    void enter_kernel(SimTime now) { kernel_.sys_enter(enclave_, now); }
    std::uint32_t sq_entries() const { return sq_.layout().entries(); }
    std::uint32_t cq_entries() const { return cq_.layout().entries(); }
    std::uint32_t reserved() const { return reserved_; }
    std::size_t live_ids() const { return live_; }
    std::size_t id_capacity() const { return ids_.size(); }
    std::uint64_t last_internal_id() const { return next_id_ - 1; }
    std::uint64_t dropped() const { return dropped_; }
    /// Ids published so far, in publication order (for invariant checks).
    const std::vector<std::uint64_t>& published_ids() const { return published_; }
    const StepBounds& bounds() const { return bounds_; }
    Instrumentation& instrumentation() { return inst_; }
    TrustedKernel& kernel() { return kernel_; }
    EnclaveId enclave() const { return enclave_; }
    const Config& config() const { return config_; }

private:
    enum class SlotState : std::uint8_t { Free, Reserved, Prepared };

    struct IdEntry {
        std::uint64_t id = 0;
        std::uint64_t caller_tag = 0;
        bool live = false;
        bool multishot = false;
    };

    EnclaveRing(TrustedKernel& kernel, EnclaveId id, SubmissionProducer sq, CompletionConsumer cq,
                Instrumentation& inst, Config config);

    bool valid_reservation(SqeId id) const;
    Result<std::uint64_t> allocate_id(std::uint64_t caller_tag, bool multishot);
    void write_and_publish(SqeId id, const Sqe& sqe);
    Status translate_iov(VirtAddr vec_addr, std::uint32_t count);

    TrustedKernel& kernel_;
    EnclaveId enclave_;
    Instrumentation& inst_;
    Config config_;
    SubmissionProducer sq_;
    CompletionConsumer cq_;
    TranslationTable table_;
    StepBounds bounds_{};

    std::uint32_t reserved_ = 0;
    std::vector<SlotState> slot_state_;
    std::vector<std::uint32_t> slot_gen_;

    std::vector<IdEntry> ids_;
    std::size_t live_ = 0;
    std::uint64_t next_id_ = 1;
    std::optional<Completion> peeked_;
    std::uint64_t dropped_ = 0;
    std::vector<std::uint64_t> published_;
    RegionId next_region_ = kFirstUserRegion;
};

}  // namespace ringsim
