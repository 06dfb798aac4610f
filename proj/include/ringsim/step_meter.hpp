#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string_view>

namespace ringsim {

/// Counts basic steps taken by the current operation. Each shared-memory
/// access and each loop iteration is one tick.
struct StepMeter {
    std::uint32_t current = 0;
    void tick(std::uint32_t n = 1) { current += n; }
};

/// Enclave-side operations whose step count is bounded.
enum class MeteredOp : std::uint8_t {
    TryGetSqe,
    PrepAndSubmit,
    ReleaseSqe,
    PeekCqe,
    ConsumeCqe,
    Translate,
    DeepTranslate,
    ArenaPush,
    ArenaPop,
    PromisePoll,
    Count,
};

std::string_view to_string(MeteredOp op);

/// Per-op maxima and bound violations observed by a meter owner.
class StepStats {
public:
    void record(MeteredOp op, std::uint32_t steps, std::uint32_t bound) {
        auto i = static_cast<std::size_t>(op);
        if (steps > max_[i]) max_[i] = steps;
        ++calls_[i];
        bound_[i] = bound;
        if (steps > bound) ++violations_[i];
    }
    std::uint32_t max(MeteredOp op) const { return max_[static_cast<std::size_t>(op)]; }
    /// Bound declared by the most recent call.
    std::uint32_t bound(MeteredOp op) const { return bound_[static_cast<std::size_t>(op)]; }
    std::uint64_t calls(MeteredOp op) const { return calls_[static_cast<std::size_t>(op)]; }
    std::uint64_t violations(MeteredOp op) const { return violations_[static_cast<std::size_t>(op)]; }
    std::uint64_t total_violations() const {
        std::uint64_t t = 0;
        for (auto v : violations_) t += v;
        return t;
    }

private:
    static constexpr std::size_t kOps = static_cast<std::size_t>(MeteredOp::Count);
    std::array<std::uint32_t, kOps> max_{};
    std::array<std::uint32_t, kOps> bound_{};
    std::array<std::uint64_t, kOps> calls_{};
    std::array<std::uint64_t, kOps> violations_{};
};

/// RAII scope: resets the meter on entry and records the step count on exit.
class MeteredScope {
public:
    MeteredScope(StepMeter& meter, StepStats& stats, MeteredOp op, std::uint32_t bound)
        : meter_(meter), stats_(stats), op_(op), bound_(bound), saved_(meter.current) {
        meter_.current = 0;
    }
    ~MeteredScope() {
        stats_.record(op_, meter_.current, bound_);
        meter_.current += saved_;
    }
    MeteredScope(const MeteredScope&) = delete;
    MeteredScope& operator=(const MeteredScope&) = delete;

private:
    StepMeter& meter_;
    StepStats& stats_;
    MeteredOp op_;
    std::uint32_t bound_;
    std::uint32_t saved_;
};

}  // namespace ringsim
