#include "ringsim/runtime.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace ringsim {

Runtime::Runtime(RuntimeConfig config)
    : world_(config.world), sched_(config.policy, config.cores), kernel_(world_, sched_, config.kernel) {}

ExecContext& Runtime::attach_program(EnclaveId enclave, Program program) {
    const EnclaveRecord* rec = kernel_.enclave(enclave);
    const TaskId task = rec ? rec->task : std::numeric_limits<TaskId>::max();
    auto s = std::make_unique<Slot>();
    s->task = task;
    s->enclave = enclave;
    s->program = std::move(program);
    s->ctx = std::make_unique<ExecContext>(kernel_, task, enclave);
    if (!rec) s->exited = true;
    ExecContext& ctx = *s->ctx;
    enclave_tasks_[enclave] = task;
    slots_[task] = std::move(s);
    return ctx;
}

void Runtime::attach_activity(TaskId task, Activity activity) {
    auto s = std::make_unique<Slot>();
    s->task = task;
    s->activity = std::move(activity);
    slots_[task] = std::move(s);
}

Result<TaskId> Runtime::add_host_core(SimTime period, SimTime budget, int priority, std::uint32_t core,
                                      Activity activity) {
    TaskSpec spec;
    spec.kind = TaskKind::HostCore;
    spec.period = period;
    spec.budget = budget;
    spec.priority = priority;
    spec.core = core;
    spec.name = "host-core" + std::to_string(core);
    auto id = sched_.admit(spec);
    if (!id.ok()) return id;
    attach_activity(*id, std::move(activity));
    return id;
}

bool Runtime::finished(EnclaveId enclave) const {
    auto it = enclave_tasks_.find(enclave);
    if (it == enclave_tasks_.end()) return false;
    auto s = slots_.find(it->second);
    return s != slots_.end() && s->second->exited;
}

void Runtime::activate(Slot& s) {
    ++activations_;
    const SimTime now = sched_.now();
    if (s.activity) {
        s.debt = std::max<SimTime>(s.activity(now), 1);
        return;
    }
    ExecContext& ctx = *s.ctx;
    ctx.start_ = now;
    ctx.charged_ = 0;
    ctx.yield_ = false;
    ++ctx.activations_;
    if (!s.started) {
        s.started = true;
        s.co = s.program(ctx);
        ctx.resume_point_ = s.co.handle();
    }
    auto h = std::exchange(ctx.resume_point_, {});
    if (h) h.resume();
    if (s.co.done()) s.done = true;
    s.debt = std::max<SimTime>(ctx.charged_, 1);
    if (ctx.yield_ && !s.done) {
        s.pending_yield = true;
        s.yield_release = sched_.task(s.task).next_release;
    }
}

void Runtime::settle(Slot& s) {
    kernel_.commit_device_writes(s.task, sched_.now());
    if (s.done && !s.exited) {
        s.exited = true;
        if (s.enclave) (void)kernel_.smc_exit(*s.enclave);
        return;
    }
    if (s.pending_yield && sched_.running(sched_.task(s.task).spec.core) == s.task) {
        s.pending_yield = false;
        (void)sched_.yield_remaining(s.task);
    }
}

void Runtime::run_until(SimTime t_end) {
    while (sched_.now() < t_end) {
        for (std::uint32_t core = 0; core < sched_.cores(); ++core) {
            for (int guard = 0; guard < 4096; ++guard) {
                auto r = sched_.running(core);
                if (!r) break;
                auto it = slots_.find(*r);
                Slot* s = it == slots_.end() ? nullptr : it->second.get();
                if (!s || s->exited) {
                    (void)sched_.yield_remaining(*r);
                    continue;
                }
                if (s->debt > 0) break;
                if (s->pending_yield) {
                    s->pending_yield = false;
                    if (sched_.task(*r).next_release == s->yield_release) {
                        (void)sched_.yield_remaining(*r);
                        continue;
                    }
                }
                activate(*s);
                if (s->debt > 0) break;
            }
        }

        SimTime step = std::min(t_end - sched_.now(), sched_.time_to_next_event());
        std::vector<Slot*> running;
        for (std::uint32_t core = 0; core < sched_.cores(); ++core) {
            auto r = sched_.running(core);
            if (!r) continue;
            auto it = slots_.find(*r);
            if (it == slots_.end() || it->second->debt <= 0) continue;
            running.push_back(it->second.get());
            step = std::min(step, it->second->debt);
        }
        step = std::max<SimTime>(step, 1);
        sched_.advance(step);
        for (Slot* s : running) {
            s->debt -= step;
            if (s->debt <= 0) {
                s->debt = 0;
                settle(*s);
            }
        }
    }
}

}  // namespace ringsim
