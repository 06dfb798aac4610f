#include "ringsim/rt_scheduler.hpp"

#include <boost/multiprecision/cpp_int.hpp>
#include <limits>

namespace ringsim {

std::string_view to_string(SchedEvent e) {
    switch (e) {
    case SchedEvent::Dispatch: return "dispatch";
    case SchedEvent::Preempt: return "preempt";
    case SchedEvent::Yield: return "yield";
    case SchedEvent::Exhaust: return "exhaust";
    case SchedEvent::Replenish: return "replenish";
    }
    return "?";
}

std::string_view to_string(TaskKind k) {
    return k == TaskKind::Enclave ? "enclave" : "host-core";
}

Scheduler::Scheduler(SchedPolicy policy, std::uint32_t cores)
    : policy_(policy), running_(cores == 0 ? 1 : cores) {}

bool Scheduler::fits(std::uint32_t core, SimTime budget, SimTime period) const {
    using boost::multiprecision::cpp_rational;
    cpp_rational sum(budget, period);
    for (const auto& [id, t] : tasks_) {
        if (t.spec.core != core) continue;
        sum += cpp_rational(t.spec.budget, t.spec.period);
    }
    return sum <= 1;
}

Result<TaskId> Scheduler::admit(TaskSpec spec) {
    if (spec.period <= 0 || spec.budget <= 0 || spec.budget > spec.period) {
        return Err{Errc::InvalidArgument};
    }
    if (spec.core >= cores()) return Err{Errc::InvalidArgument};
    if (!fits(spec.core, spec.budget, spec.period)) return Err{Errc::Rejected};

    TaskControl t;
    t.id = next_id_++;
    t.spec = std::move(spec);
    t.remaining = t.spec.budget;
    t.deadline = now_ + t.spec.period;
    t.next_release = now_ + t.spec.period;
    t.admit_seq = admit_seq_++;
    const auto core = t.spec.core;
    const auto id = t.id;
    tasks_.emplace(id, std::move(t));
    reschedule(core);
    return id;
}

Result<TaskId> Scheduler::donate(TaskId parent_id, TaskSpec child_spec, SimTime budget_share,
                                 std::size_t quota_share) {
    auto it = tasks_.find(parent_id);
    if (it == tasks_.end()) return Err{Errc::UnknownTask};
    auto& parent = it->second;
    if (budget_share <= 0 || budget_share > parent.spec.budget ||
        quota_share > parent.spec.mem_quota) {
        return Err{Errc::InsufficientDonation};
    }
    parent.spec.budget -= budget_share;
    parent.spec.mem_quota -= quota_share;
    parent.remaining = std::min(parent.remaining, parent.spec.budget);

    TaskControl c;
    c.id = next_id_++;
    c.spec = std::move(child_spec);
    c.spec.period = parent.spec.period;
    c.spec.core = parent.spec.core;
    c.spec.budget = budget_share;
    c.spec.mem_quota = quota_share;
    c.parent = parent_id;
    // The child shares the parent's period boundaries so the combined demand
    // per window never exceeds the original budget.
    c.next_release = parent.next_release;
    c.deadline = parent.deadline;
    c.remaining = 0;
    c.state = TaskState::BudgetExhausted;
    c.admit_seq = admit_seq_++;
    const auto core = c.spec.core;
    const auto id = c.id;
    donations_.push_back({parent_id, id, budget_share, quota_share});
    tasks_.emplace(id, std::move(c));

    auto& p = tasks_.at(parent_id);
    if (p.remaining == 0 && running_[core] == parent_id) {
        emit(parent_id, SchedEvent::Exhaust);
        p.state = TaskState::BudgetExhausted;
        running_[core].reset();
    }
    reschedule(core);
    return id;
}

Status Scheduler::retire(TaskId id) {
    auto it = tasks_.find(id);
    if (it == tasks_.end()) return Err{Errc::UnknownTask};
    const auto core = it->second.spec.core;
    if (running_[core] == id) running_[core].reset();
    if (it->second.parent) {
        auto pit = tasks_.find(*it->second.parent);
        if (pit != tasks_.end()) {
            pit->second.spec.budget += it->second.spec.budget;
            pit->second.spec.mem_quota += it->second.spec.mem_quota;
        }
    }
    // Orphaned children become independent owners of what they hold.
    for (auto& [cid, c] : tasks_) {
        if (c.parent == id) c.parent.reset();
    }
    tasks_.erase(it);
    reschedule(core);
    return {};
}

void Scheduler::emit(TaskId id, SchedEvent ev) { trace_.push_back({now_, id, ev}); }

bool Scheduler::better(const TaskControl& a, const TaskControl& b) const {
    if (policy_ == SchedPolicy::FixedPriority) {
        if (a.spec.priority != b.spec.priority) return a.spec.priority < b.spec.priority;
        return a.id < b.id;
    }
    if (a.deadline != b.deadline) return a.deadline < b.deadline;
    return a.admit_seq < b.admit_seq;
}

std::optional<TaskId> Scheduler::pick(std::uint32_t core) const {
    const TaskControl* best = nullptr;
    for (const auto& [id, t] : tasks_) {
        if (t.spec.core != core || t.remaining <= 0) continue;
        if (t.state != TaskState::Ready && t.state != TaskState::Running) continue;
        if (!best || better(t, *best)) best = &t;
    }
    if (!best) return std::nullopt;
    return best->id;
}

void Scheduler::reschedule(std::uint32_t core) {
    const auto best = pick(core);
    if (best == running_[core]) return;
    if (running_[core]) {
        auto& cur = tasks_.at(*running_[core]);
        emit(cur.id, SchedEvent::Preempt);
        cur.state = TaskState::Ready;
    }
    running_[core] = best;
    if (best) {
        tasks_.at(*best).state = TaskState::Running;
        emit(*best, SchedEvent::Dispatch);
    }
}

void Scheduler::process_instant() {
    for (auto& slot : running_) {
        if (!slot) continue;
        auto& t = tasks_.at(*slot);
        if (t.remaining <= 0) {
            emit(t.id, SchedEvent::Exhaust);
            t.state = TaskState::BudgetExhausted;
            slot.reset();
        }
    }
    for (auto& [id, t] : tasks_) {
        if (t.next_release != now_) continue;
        t.remaining = t.spec.budget;
        t.deadline = now_ + t.spec.period;
        t.next_release = now_ + t.spec.period;
        if (t.state != TaskState::Running) t.state = TaskState::Ready;
        emit(id, SchedEvent::Replenish);
    }
    for (std::uint32_t c = 0; c < cores(); ++c) reschedule(c);
}

SimTime Scheduler::time_to_next_event() const {
    SimTime next = std::numeric_limits<SimTime>::max();
    for (const auto& slot : running_) {
        if (slot) next = std::min(next, tasks_.at(*slot).remaining);
    }
    for (const auto& [id, t] : tasks_) next = std::min(next, t.next_release - now_);
    return next;
}

std::vector<TraceRecord> Scheduler::advance(SimTime dt) {
    const std::size_t mark = trace_.size();
    const SimTime target = now_ + dt;
    while (now_ < target) {
        const SimTime step = std::min(target - now_, time_to_next_event());
        for (auto& slot : running_) {
            if (slot) tasks_.at(*slot).remaining -= step;
        }
        now_ += step;
        process_instant();
    }
    return {trace_.begin() + static_cast<std::ptrdiff_t>(mark), trace_.end()};
}

Status Scheduler::yield_remaining(TaskId id) {
    auto it = tasks_.find(id);
    if (it == tasks_.end()) return Err{Errc::UnknownTask};
    auto& t = it->second;
    const auto core = t.spec.core;
    if (running_[core] != id) return {};
    emit(id, SchedEvent::Yield);
    t.remaining = 0;
    t.state = TaskState::Yielded;
    running_[core].reset();
    reschedule(core);
    return {};
}

double Scheduler::utilization(std::uint32_t core) const {
    double u = 0;
    for (const auto& [id, t] : tasks_) {
        if (t.spec.core == core) u += double(t.spec.budget) / double(t.spec.period);
    }
    return u;
}

}  // namespace ringsim
