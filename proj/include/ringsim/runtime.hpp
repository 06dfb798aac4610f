#pragma once

// Discrete-event driver. Enclave programs are coroutines resumed whenever
// their task is dispatched; each activation runs atomically at its start
// time and the time it charged is then paid off as scheduled CPU time.

#include <coroutine>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <utility>

#include "ringsim/rt_scheduler.hpp"
#include "ringsim/shm_world.hpp"
#include "ringsim/trusted_kernel.hpp"

namespace ringsim {

namespace detail {
template <class T>
struct CoValue {
    std::optional<T> value;
    void return_value(T v) { value = std::move(v); }
    T take() { return std::move(*value); }
};
template <>
struct CoValue<void> {
    void return_void() {}
    void take() {}
};
}  // namespace detail

/// Lazily started coroutine that can be awaited from another Co.
template <class T = void>
class [[nodiscard]] Co {
public:
    struct promise_type : detail::CoValue<T> {
        std::coroutine_handle<> continuation;

        Co get_return_object() { return Co{std::coroutine_handle<promise_type>::from_promise(*this)}; }
        std::suspend_always initial_suspend() noexcept { return {}; }
        struct Final {
            bool await_ready() noexcept { return false; }
            std::coroutine_handle<> await_suspend(std::coroutine_handle<promise_type> h) noexcept {
                auto c = h.promise().continuation;
                return c ? c : std::noop_coroutine();
            }
            void await_resume() noexcept {}
        };
        Final final_suspend() noexcept { return {}; }
        void unhandled_exception() { std::terminate(); }
    };

    Co() = default;
    explicit Co(std::coroutine_handle<promise_type> h) : h_(h) {}
    Co(Co&& o) noexcept : h_(std::exchange(o.h_, {})) {}
    Co& operator=(Co&& o) noexcept {
        if (this != &o) {
            if (h_) h_.destroy();
            h_ = std::exchange(o.h_, {});
        }
        return *this;
    }
    Co(const Co&) = delete;
    Co& operator=(const Co&) = delete;
    ~Co() {
        if (h_) h_.destroy();
    }

    bool await_ready() const noexcept { return false; }
    std::coroutine_handle<> await_suspend(std::coroutine_handle<> caller) noexcept {
        h_.promise().continuation = caller;
        return h_;
    }
    T await_resume() { return h_.promise().take(); }

    std::coroutine_handle<promise_type> handle() const { return h_; }
    bool done() const { return !h_ || h_.done(); }

private:
    std::coroutine_handle<promise_type> h_;
};

/// Execution context of one enclave task.
class ExecContext {
public:
    struct Suspend {
        ExecContext& ctx;
        bool await_ready() const noexcept { return false; }
        void await_suspend(std::coroutine_handle<> h) noexcept { ctx.resume_point_ = h; }
        void await_resume() const noexcept {}
    };

    ExecContext(TrustedKernel& kernel, TaskId task, EnclaveId enclave)
        : kernel_(kernel), task_(task), enclave_(enclave) {}

    /// Activation start plus everything charged since.
    SimTime now() const { return start_ + charged_; }
    void charge(SimTime ns) { charged_ += ns; }
    /// Charges `ns` and suspends until it has been executed.
    Suspend compute(SimTime ns) {
        charged_ += ns;
        return {*this};
    }
    /// Suspends and forfeits the rest of this period's budget.
    Suspend yield() {
        yield_ = true;
        return {*this};
    }

    TaskId task() const { return task_; }
    EnclaveId enclave() const { return enclave_; }
    TrustedKernel& kernel() { return kernel_; }
    std::uint64_t activations() const { return activations_; }

private:
    friend class Runtime;

    TrustedKernel& kernel_;
    TaskId task_;
    EnclaveId enclave_;
    SimTime start_ = 0;
    SimTime charged_ = 0;
    bool yield_ = false;
    std::uint64_t activations_ = 0;
    std::coroutine_handle<> resume_point_;
};

struct RuntimeConfig {
    SchedPolicy policy = SchedPolicy::FixedPriority;
    std::uint32_t cores = 1;
    ShmWorld::Config world{};
    TrustedKernel::Config kernel{};
};

class Runtime {
public:
    using Program = std::function<Co<void>(ExecContext&)>;
    /// Host-style activity: called at `now`, returns the time it consumed.
    using Activity = std::function<SimTime(SimTime now)>;

    explicit Runtime(RuntimeConfig config);
    Runtime(const Runtime&) = delete;
    Runtime& operator=(const Runtime&) = delete;

    ShmWorld& world() { return world_; }
    Scheduler& scheduler() { return sched_; }
    TrustedKernel& kernel() { return kernel_; }
    SimTime now() const { return sched_.now(); }

    /// Binds a coroutine program to an enclave; it starts at the enclave's
    /// first dispatch and the enclave exits when it returns.
    ExecContext& attach_program(EnclaveId enclave, Program program);
    void attach_activity(TaskId task, Activity activity);
    /// Admits a never-yielding host core task running `activity`.
    Result<TaskId> add_host_core(SimTime period, SimTime budget, int priority, std::uint32_t core,
                                 Activity activity);

    void run_until(SimTime t_end);
    bool finished(EnclaveId enclave) const;
    std::uint64_t activations() const { return activations_; }

private:
    struct Slot {
        TaskId task = 0;
        std::optional<EnclaveId> enclave;
        Program program;
        Activity activity;
        std::unique_ptr<ExecContext> ctx;
        Co<void> co;
        bool started = false;
        SimTime debt = 0;
        bool pending_yield = false;
        SimTime yield_release = 0;
        bool done = false;
        bool exited = false;
    };

    void activate(Slot& s);
    void settle(Slot& s);

    ShmWorld world_;
    Scheduler sched_;
    TrustedKernel kernel_;
    std::map<TaskId, std::unique_ptr<Slot>> slots_;
    std::map<EnclaveId, TaskId> enclave_tasks_;
    std::uint64_t activations_ = 0;
};

}  // namespace ringsim
