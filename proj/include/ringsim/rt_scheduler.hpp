#pragma once

// Budget-enforcing real-time scheduler over simulated time. Enclave tasks
// and host-core tasks are treated identically: each has a period and a
// budget replenished at every period boundary, and a task whose budget is
// exhausted is not dispatched again until its next replenishment.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ringsim/types.hpp"

namespace ringsim {

enum class SchedPolicy : std::uint8_t { FixedPriority, Edf };
enum class TaskKind : std::uint8_t { Enclave, HostCore };
enum class TaskState : std::uint8_t { Ready, Running, Yielded, BudgetExhausted, Retired };
enum class SchedEvent : std::uint8_t { Dispatch, Preempt, Yield, Exhaust, Replenish };

std::string_view to_string(SchedEvent e);
std::string_view to_string(TaskKind k);

struct TraceRecord {
    SimTime t = 0;
    TaskId task = 0;
    SchedEvent event = SchedEvent::Dispatch;
    bool operator==(const TraceRecord&) const = default;
};

struct TaskSpec {
    TaskKind kind = TaskKind::Enclave;
    SimTime period = 0;
    SimTime budget = 0;
    /// Fixed-priority rank: smaller value runs first. Ignored under EDF.
    int priority = 0;
    std::size_t mem_quota = 0;
    std::uint32_t core = 0;
    std::string name;
};

struct TaskControl {
    TaskId id = 0;
    TaskSpec spec;
    SimTime remaining = 0;
    SimTime deadline = 0;      // absolute, end of the current period
    SimTime next_release = 0;  // next replenishment instant
    TaskState state = TaskState::Ready;
    std::uint64_t admit_seq = 0;
    std::optional<TaskId> parent;
};

struct DonationRecord {
    TaskId parent = 0;
    TaskId child = 0;
    SimTime donated_budget = 0;
    std::size_t donated_quota = 0;
};

class Scheduler {
public:
    explicit Scheduler(SchedPolicy policy, std::uint32_t cores = 1);

    SchedPolicy policy() const { return policy_; }
    std::uint32_t cores() const { return static_cast<std::uint32_t>(running_.size()); }
    SimTime now() const { return now_; }

    /// Admits a task released at the current time. Rejected when the
    /// per-core utilization would exceed one.
    Result<TaskId> admit(TaskSpec spec);
    /// Creates a child funded entirely from the parent's budget and quota.
    /// The child inherits the parent's period and core.
    Result<TaskId> donate(TaskId parent, TaskSpec child_spec, SimTime budget_share,
                          std::size_t quota_share);
    /// Removes a task; donated resources flow back to a live parent.
    Status retire(TaskId id);

    /// Advances simulated time by dt > 0 and returns the trace records
    /// produced during the interval.
    std::vector<TraceRecord> advance(SimTime dt);
    /// Forfeits the rest of the running task's budget for this period.
    Status yield_remaining(TaskId id);

    std::optional<TaskId> running(std::uint32_t core = 0) const { return running_.at(core); }
    /// Time until the next budget exhaustion or replenishment.
    SimTime time_to_next_event() const;

    const TaskControl& task(TaskId id) const { return tasks_.at(id); }
    bool has_task(TaskId id) const { return tasks_.contains(id); }
    const std::map<TaskId, TaskControl>& tasks() const { return tasks_; }
    const std::vector<TraceRecord>& trace() const { return trace_; }
    const std::vector<DonationRecord>& donations() const { return donations_; }
    void clear_trace() { trace_.clear(); }

    /// Sum of budget/period on a core, as a double for reporting.
    double utilization(std::uint32_t core = 0) const;

private:
    bool fits(std::uint32_t core, SimTime budget, SimTime period) const;
    void emit(TaskId id, SchedEvent ev);
    void process_instant();
    void reschedule(std::uint32_t core);
    std::optional<TaskId> pick(std::uint32_t core) const;
    bool better(const TaskControl& a, const TaskControl& b) const;

    SchedPolicy policy_;
    SimTime now_ = 0;
    TaskId next_id_ = 0;
    std::uint64_t admit_seq_ = 0;
    std::map<TaskId, TaskControl> tasks_;
    std::vector<std::optional<TaskId>> running_;
    std::vector<TraceRecord> trace_;
    std::vector<DonationRecord> donations_;
};

}  // namespace ringsim
